//! Monte-Carlo timing of cyclic versus heterogeneous assignment under random
//! availability.
//!
//! Each iteration draws `N_t` uniformly from the realizations with at most
//! `P` machines preempted, builds the assignment, and times every machine as
//! `load / speed * base`, plus optional shifted-exponential noise, times a
//! slowdown for `S` randomly chosen stragglers. The step ends when the
//! `(N_t - S)`-th fastest machine finishes.
//!
//! Iteration `i` draws from a ChaCha stream keyed by `(seed, i)`, and all
//! assignment rules see the same draws within an iteration.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{loads, recovery_group_size, Assignment, AssignmentRule, MachineId};
use crate::elastic::{binomial, AvailabilityRealization};
use crate::error::{Error, Result};
use crate::rational::{frac, int, to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    ShiftedExponential { shift: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingModel {
    #[serde(with = "crate::rational::serde_str")]
    pub base_time_per_load: Rational,
    pub noise: Noise,
    pub straggler_slowdown: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            base_time_per_load: int(1),
            noise: Noise::None,
            straggler_slowdown: 1.0,
        }
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<()> {
        if self.base_time_per_load <= Rational::zero() {
            return Err(Error::InvalidParameter(
                "base_time_per_load must be positive".into(),
            ));
        }
        if !(self.straggler_slowdown >= 1.0 && self.straggler_slowdown.is_finite()) {
            return Err(Error::InvalidParameter(
                "straggler_slowdown must be at least 1".into(),
            ));
        }
        if let Noise::ShiftedExponential { shift, rate } = self.noise {
            if !(shift >= 0.0 && shift.is_finite() && rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidParameter(
                    "noise needs shift >= 0 and rate > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Ten machines at speed 1 and ten at 1.5.
pub fn default_speeds() -> Vec<Rational> {
    let mut s = vec![int(1); 10];
    s.extend(vec![frac(3, 2); 10]);
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub l: usize,
    #[serde(with = "crate::rational::serde_vec")]
    pub speeds: Vec<Rational>,
    pub p_values: Vec<usize>,
    pub rules: Vec<AssignmentRule>,
    pub s_values: Vec<usize>,
    pub iters: u64,
    pub seed: u64,
    pub model: TimingModel,
    /// Skip `(P, S)` pairs with `2L+S-1 > N-P` instead of failing.
    pub skip_infeasible: bool,
}

impl SimConfig {
    /// The experiment defaults: N=20, L=5, S in {0, 4}, P = 0..=10.
    pub fn reference_default() -> Self {
        Self {
            n: 20,
            l: 5,
            speeds: default_speeds(),
            p_values: (0..=10).collect(),
            rules: vec![AssignmentRule::Cyclic, AssignmentRule::Heterogeneous],
            s_values: vec![0, 4],
            iters: 5000,
            seed: 0,
            model: TimingModel::default(),
            skip_infeasible: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub p: usize,
    pub rule: AssignmentRule,
    pub s: usize,
    pub mean_time: f64,
    /// Count of iterations per realized `N_t`.
    pub histogram: BTreeMap<usize, u64>,
    /// `(cyclic - this) / cyclic` of the mean times; 0 for cyclic itself.
    pub gain_vs_cyclic: f64,
    /// Iterations with `N_t = 2L+S-1`.
    pub pinned_iterations: u64,
    /// Pinned iterations where this rule's step time differed from cyclic.
    pub pinned_mismatches: u64,
    /// Iterations where this rule's step time exceeded cyclic.
    pub slower_than_cyclic: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub rows: Vec<SimRow>,
    /// `(P, S)` pairs left out as infeasible.
    pub skipped: Vec<(usize, usize)>,
}

/// Uniform draw from all subsets of `[n]` with at least `n - p` members.
pub fn sample_realization<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    rng: &mut R,
) -> Result<AvailabilityRealization> {
    if p > n {
        return Err(Error::InvalidParameter(format!("P = {p} exceeds N = {n}")));
    }
    let weights: Vec<u128> = (0..=p)
        .map(|k| {
            binomial(n, k)
                .try_into()
                .map_err(|_| Error::InvalidParameter(format!("C({n}, {k}) overflows u128")))
        })
        .collect::<Result<_>>()?;
    let total: u128 = weights.iter().sum();
    let mut u = rng.random_range(0..total);
    let mut missing = p;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            missing = k;
            break;
        }
        u -= w;
    }
    let mut ids = index::sample(rng, n, n - missing).into_vec();
    ids.sort_unstable();
    AvailabilityRealization::new(ids.into_iter().map(MachineId), n, p)
}

fn iteration_rng(seed: u64, iter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iter);
    rng
}

struct Draw {
    realization: AvailabilityRealization,
    noise: Vec<f64>,
    stragglers: Vec<usize>,
}

fn draw<R: Rng>(cfg: &SimConfig, p: usize, s: usize, rng: &mut R) -> Result<Draw> {
    let realization = sample_realization(cfg.n, p, rng)?;
    let nt = realization.len();
    let noise = match cfg.model.noise {
        Noise::None => vec![0.0; nt],
        Noise::ShiftedExponential { shift, rate } => {
            let exp = Exp::new(rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            (0..nt).map(|_| shift + exp.sample(rng)).collect()
        }
    };
    let stragglers = index::sample(rng, nt, s.min(nt)).into_vec();
    Ok(Draw {
        realization,
        noise,
        stragglers,
    })
}

/// The `(N_t - S)`-th smallest finish time for one rule.
fn step_time(cfg: &SimConfig, rule: AssignmentRule, s: usize, d: &Draw) -> Result<f64> {
    let nt = d.realization.available();
    let speeds: Vec<Rational> = nt.iter().map(|m| cfg.speeds[m.0]).collect();
    let asg = Assignment::build(rule, nt, &speeds, cfg.l, s)?;
    let base = cfg.model.base_time_per_load;
    let mut times: Vec<f64> = loads(&asg, nt)
        .iter()
        .zip(&speeds)
        .zip(&d.noise)
        .map(|((ml, speed), noise)| to_f64(&(ml.load / speed * base)) + noise)
        .collect();
    for &i in &d.stragglers {
        times[i] *= cfg.model.straggler_slowdown;
    }
    times.sort_by(f64::total_cmp);
    Ok(times[nt.len() - s - 1])
}

pub fn simulate(cfg: &SimConfig) -> Result<RunStats> {
    cfg.model.validate()?;
    if cfg.speeds.len() != cfg.n || cfg.speeds.iter().any(|s| *s <= Rational::zero()) {
        return Err(Error::InvalidParameter(format!(
            "need {} positive speeds",
            cfg.n
        )));
    }
    if cfg.iters == 0 {
        return Err(Error::InvalidParameter("iters must be positive".into()));
    }
    let mut rules = vec![AssignmentRule::Cyclic];
    rules.extend(
        cfg.rules
            .iter()
            .copied()
            .filter(|r| *r != AssignmentRule::Cyclic),
    );

    let mut stats = RunStats {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for &s in &cfg.s_values {
        let k = recovery_group_size(cfg.l, s);
        for &p in &cfg.p_values {
            if p > cfg.n || k > cfg.n - p {
                if cfg.skip_infeasible {
                    stats.skipped.push((p, s));
                    continue;
                }
                return Err(Error::Infeasible(format!(
                    "2L+S-1 = {k} exceeds N-P = {} at P = {p}, S = {s}",
                    cfg.n as i64 - p as i64
                )));
            }
            // One row of step times per iteration, cyclic first.
            let per_iter: Vec<(usize, Vec<f64>)> = (0..cfg.iters)
                .into_par_iter()
                .map(|i| {
                    let mut rng = iteration_rng(cfg.seed, i);
                    let d = draw(cfg, p, s, &mut rng)?;
                    let times = rules
                        .iter()
                        .map(|&r| step_time(cfg, r, s, &d))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((d.realization.len(), times))
                })
                .collect::<Result<_>>()?;

            let mut histogram = BTreeMap::new();
            for (nt, _) in &per_iter {
                *histogram.entry(*nt).or_insert(0u64) += 1;
            }
            let means: Vec<f64> = (0..rules.len())
                .map(|j| per_iter.iter().map(|(_, t)| t[j]).sum::<f64>() / cfg.iters as f64)
                .collect();
            for (j, &rule) in rules.iter().enumerate() {
                if !cfg.rules.contains(&rule) {
                    continue;
                }
                let pinned = per_iter.iter().filter(|(nt, _)| *nt == k);
                stats.rows.push(SimRow {
                    p,
                    rule,
                    s,
                    mean_time: means[j],
                    histogram: histogram.clone(),
                    gain_vs_cyclic: (means[0] - means[j]) / means[0],
                    pinned_iterations: pinned.clone().count() as u64,
                    pinned_mismatches: pinned.filter(|(_, t)| t[j] != t[0]).count() as u64,
                    slower_than_cyclic: per_iter.iter().filter(|(_, t)| t[j] > t[0]).count() as u64,
                });
            }
        }
    }
    Ok(stats)
}
