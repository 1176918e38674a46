//! Run configuration: a JSON document whose fields can be overridden by
//! flags, resolved per command into concrete settings.

use std::path::{Path, PathBuf};

use lcsd_core::assignment::{recovery_group_size, AssignmentRule};
use lcsd_core::rational::{self, Rational};
use lcsd_core::sharing::DEFAULT_GRID_POINTS;
use lcsd_core::sim::{default_speeds, Noise, SimConfig, TimingModel};
use lcsd_core::{PrimeField, Scheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every field is optional; each command fills in its own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub s: Option<usize>,
    pub p: Option<usize>,
    pub prime: Option<u64>,
    pub q: Option<usize>,
    pub v: Option<usize>,
    pub r: Option<usize>,
    /// Speeds as `"1"`, `"3/2"` or `"1.5"`.
    pub speeds: Option<Vec<String>>,
    pub scheme: Option<Scheme>,
    pub scheme_j: Option<Scheme>,
    pub assignment: Option<AssignmentRule>,
    pub p_range: Option<Vec<usize>>,
    pub s_values: Option<Vec<usize>>,
    pub iters: Option<u64>,
    pub seed: Option<u64>,
    pub timing: Option<TimingModel>,
    pub out: Option<PathBuf>,
    pub l_prime: Option<usize>,
    pub lambda_grid: Option<Vec<String>>,
    pub lambda_points: Option<usize>,
    pub max_l: Option<usize>,
    pub max_s: Option<usize>,
    pub max_n: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(
            base,
            top,
            n,
            l,
            s,
            p,
            prime,
            q,
            v,
            r,
            speeds,
            scheme,
            scheme_j,
            assignment,
            p_range,
            s_values,
            iters,
            seed,
            timing,
            out,
            l_prime,
            lambda_grid,
            lambda_points,
            max_l,
            max_s,
            max_n
        )
    }
}

fn bad(field: &'static str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field,
        message: message.into(),
    }
}

fn positive(field: &'static str, x: usize) -> Result<usize, CliError> {
    if x == 0 {
        return Err(bad(field, "must be positive"));
    }
    Ok(x)
}

fn field_of(cfg: &RunConfig) -> Result<PrimeField, CliError> {
    let p = cfg.prime.unwrap_or(1993);
    PrimeField::new(p).map_err(|e| bad("prime", e.to_string()))
}

fn rationals(field: &'static str, raw: &[String]) -> Result<Vec<Rational>, CliError> {
    raw.iter()
        .map(|x| rational::parse(x).map_err(|e| bad(field, e.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case {
    pub l: usize,
    pub s: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySettings {
    pub prime: u64,
    pub q: usize,
    pub v: usize,
    pub r: usize,
    pub schemes: Vec<Scheme>,
    pub assignments: Vec<AssignmentRule>,
    /// Machine `i` of a case runs at `speeds[i]`; `None` means half the
    /// machines at 1 and the rest at 3/2.
    #[serde(with = "opt_rationals")]
    pub speeds: Option<Vec<Rational>>,
    pub seed: u64,
    pub cases: Vec<Case>,
}

mod opt_rationals {
    use lcsd_core::rational::{display, Rational};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(xs: &Option<Vec<Rational>>, s: S) -> Result<S::Ok, S::Error> {
        match xs {
            Some(xs) => s.collect_seq(xs.iter().map(display)),
            None => s.serialize_none(),
        }
    }
}

pub fn verify_settings(cfg: &RunConfig) -> Result<VerifySettings, CliError> {
    let field = field_of(cfg)?;
    let q = positive("q", cfg.q.unwrap_or(6))?;
    let v = positive("v", cfg.v.unwrap_or(6))?;
    let r = positive("r", cfg.r.unwrap_or(6))?;
    let max_l = cfg.max_l.unwrap_or(3);
    let max_s = cfg.max_s.unwrap_or(2);
    let max_n = cfg.max_n.unwrap_or(9);
    let ls: Vec<usize> = match cfg.l {
        Some(l) => vec![positive("l", l)?],
        None => (1..=positive("max_l", max_l)?).collect(),
    };
    let ss: Vec<usize> = match cfg.s {
        Some(s) => vec![s],
        None => (0..=max_s).collect(),
    };
    let mut cases = Vec::new();
    for &l in &ls {
        for &s in &ss {
            let k = recovery_group_size(l, s);
            match cfg.n {
                Some(n) if k > n => {
                    return Err(bad(
                        "n",
                        format!("2L+S-1 = {k} exceeds N = {n} (L = {l}, S = {s})"),
                    ))
                }
                Some(n) => cases.push(Case { l, s, nt: n }),
                None => cases.extend((k..=max_n).map(|nt| Case { l, s, nt })),
            }
        }
    }
    if cases.is_empty() {
        return Err(bad("max_n", "no feasible (L, S, N) combination"));
    }
    let speeds = cfg
        .speeds
        .as_deref()
        .map(|s| rationals("speeds", s))
        .transpose()?;
    if let Some(sp) = &speeds {
        let need = cases.iter().map(|c| c.nt).max().unwrap_or(0);
        if sp.len() < need || sp.iter().any(|x| *x <= Rational::from_integer(0)) {
            return Err(bad(
                "speeds",
                format!("need at least {need} positive speeds"),
            ));
        }
    }
    let schemes = match cfg.scheme {
        Some(s) => vec![s],
        None => vec![Scheme::One, Scheme::Two],
    };
    let assignments = match cfg.assignment {
        Some(a) => vec![a],
        None => vec![AssignmentRule::Cyclic, AssignmentRule::Heterogeneous],
    };
    Ok(VerifySettings {
        prime: field.modulus(),
        q,
        v,
        r,
        schemes,
        assignments,
        speeds,
        seed: cfg.seed.unwrap_or(0),
        cases,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSettings {
    pub l: usize,
    pub s: usize,
    pub nt: usize,
    pub q: usize,
    pub v: usize,
    pub r: usize,
}

pub fn cost_settings(cfg: &RunConfig) -> Result<CostSettings, CliError> {
    let l = positive("l", cfg.l.unwrap_or(9))?;
    let s = cfg.s.unwrap_or(0);
    let nt = positive("n", cfg.n.unwrap_or(21))?;
    let k = recovery_group_size(l, s);
    if k > nt {
        return Err(bad("n", format!("2L+S-1 = {k} exceeds N_t = {nt}")));
    }
    Ok(CostSettings {
        l,
        s,
        nt,
        q: positive("q", cfg.q.unwrap_or(500))?,
        v: positive("v", cfg.v.unwrap_or(500))?,
        r: positive("r", cfg.r.unwrap_or(500))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub scheme_i: Scheme,
    pub scheme_j: Scheme,
    pub l_prime: usize,
    pub nt: usize,
    pub s_values: Vec<usize>,
    pub q: usize,
    pub v: usize,
    pub r: usize,
    #[serde(with = "lcsd_core::rational::serde_vec")]
    pub lambda_grid: Vec<Rational>,
}

pub fn sweep_settings(cfg: &RunConfig) -> Result<SweepSettings, CliError> {
    let scheme_i = cfg.scheme.unwrap_or(Scheme::One);
    let scheme_j = cfg.scheme_j.unwrap_or(scheme_i);
    for (field, s) in [("scheme", scheme_i), ("scheme_j", scheme_j)] {
        if s == Scheme::Lcc {
            return Err(bad(field, "storage-sharing pairs schemes 1 and 2"));
        }
    }
    let l_prime = positive("l_prime", cfg.l_prime.or(cfg.l).unwrap_or(9))?;
    if scheme_i == scheme_j && l_prime < 3 {
        return Err(bad("l_prime", "same-scheme sharing needs L' >= 3"));
    }
    let nt = positive("n", cfg.n.unwrap_or(21))?;
    let s_values = match (&cfg.s_values, cfg.s) {
        (Some(v), _) => v.clone(),
        (None, Some(s)) => vec![s],
        (None, None) => vec![0, 1, 2],
    };
    if s_values.is_empty() {
        return Err(bad("s_values", "empty"));
    }
    for &s in &s_values {
        let k = recovery_group_size(l_prime, s);
        if k > nt {
            return Err(bad(
                "n",
                format!("2L'+S-1 = {k} exceeds N_t = {nt} at S = {s}"),
            ));
        }
    }
    let lambda_grid = match (&cfg.lambda_grid, cfg.lambda_points) {
        (Some(g), _) => rationals("lambda_grid", g)?,
        (None, points) => {
            let points = points.unwrap_or(DEFAULT_GRID_POINTS);
            lcsd_core::sharing::uniform_grid(points)
                .map_err(|e| bad("lambda_points", e.to_string()))?
        }
    };
    if lambda_grid.is_empty() {
        return Err(bad("lambda_grid", "empty lambda grid"));
    }
    if lambda_grid
        .iter()
        .any(|x| *x < Rational::from_integer(0) || *x > Rational::from_integer(1))
    {
        return Err(bad("lambda_grid", "values must lie in [0, 1]"));
    }
    Ok(SweepSettings {
        scheme_i,
        scheme_j,
        l_prime,
        nt,
        s_values,
        q: positive("q", cfg.q.unwrap_or(500))?,
        v: positive("v", cfg.v.unwrap_or(500))?,
        r: positive("r", cfg.r.unwrap_or(500))?,
        lambda_grid,
    })
}

pub fn simulate_settings(cfg: &RunConfig) -> Result<SimConfig, CliError> {
    let mut sim = SimConfig::reference_default();
    if let Some(n) = cfg.n {
        sim.n = positive("n", n)?;
        if cfg.speeds.is_none() {
            // Half at 1, half at 3/2, as in the default.
            sim.speeds = (0..n)
                .map(|i| {
                    if i < n / 2 {
                        default_speeds()[0]
                    } else {
                        default_speeds()[19]
                    }
                })
                .collect();
        }
    }
    if let Some(l) = cfg.l {
        sim.l = positive("l", l)?;
    }
    if let Some(s) = &cfg.speeds {
        sim.speeds = rationals("speeds", s)?;
    }
    if sim.speeds.len() != sim.n || sim.speeds.iter().any(|x| *x <= Rational::from_integer(0)) {
        return Err(bad("speeds", format!("need {} positive speeds", sim.n)));
    }
    if let Some(p) = &cfg.p_range {
        sim.p_values = p.clone();
    } else if let Some(p) = cfg.p {
        sim.p_values = vec![p];
    }
    if sim.p_values.is_empty() {
        return Err(bad("p_range", "empty"));
    }
    if let Some(p) = sim.p_values.iter().find(|&&p| p > sim.n) {
        return Err(bad("p_range", format!("P = {p} exceeds N = {}", sim.n)));
    }
    if let Some(s) = &cfg.s_values {
        sim.s_values = s.clone();
    } else if let Some(s) = cfg.s {
        sim.s_values = vec![s];
    }
    if sim.s_values.is_empty() {
        return Err(bad("s_values", "empty"));
    }
    let k = recovery_group_size(sim.l, *sim.s_values.iter().min().unwrap());
    if k > sim.n {
        return Err(bad(
            "n",
            format!("2L+S-1 = {k} exceeds N = {} for every P", sim.n),
        ));
    }
    match cfg.assignment {
        Some(AssignmentRule::Cyclic) => sim.rules = vec![AssignmentRule::Cyclic],
        Some(AssignmentRule::Heterogeneous) | None => {}
    }
    if let Some(iters) = cfg.iters {
        if iters == 0 {
            return Err(bad("iters", "must be positive"));
        }
        sim.iters = iters;
    }
    sim.seed = cfg.seed.unwrap_or(0);
    if let Some(t) = &cfg.timing {
        t.validate().map_err(|e| bad("timing", e.to_string()))?;
        sim.model = t.clone();
    }
    Ok(sim)
}

/// Builds a timing model override from individual flags.
pub fn timing_from_flags(
    base: Option<&str>,
    shift: Option<f64>,
    rate: Option<f64>,
    slowdown: Option<f64>,
    existing: Option<TimingModel>,
) -> Result<Option<TimingModel>, CliError> {
    if base.is_none() && shift.is_none() && rate.is_none() && slowdown.is_none() {
        return Ok(existing);
    }
    let mut t = existing.unwrap_or_default();
    if let Some(b) = base {
        t.base_time_per_load = rational::parse(b).map_err(|e| bad("timing", e.to_string()))?;
    }
    match (shift, rate) {
        (None, None) => {}
        (shift, Some(rate)) => {
            t.noise = Noise::ShiftedExponential {
                shift: shift.unwrap_or(0.0),
                rate,
            }
        }
        (Some(_), None) => return Err(bad("timing", "noise shift needs a rate")),
    }
    if let Some(s) = slowdown {
        t.straggler_slowdown = s;
    }
    Ok(Some(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_prefers_top() {
        let base = RunConfig {
            n: Some(5),
            seed: Some(3),
            ..Default::default()
        };
        let top = RunConfig {
            seed: Some(9),
            ..Default::default()
        };
        let merged = base.overlay(top);
        assert_eq!((merged.n, merged.seed), (Some(5), Some(9)));
    }

    #[test]
    fn default_verify_grid() {
        let v = verify_settings(&RunConfig::default()).unwrap();
        assert_eq!(v.prime, 1993);
        assert!(v
            .cases
            .iter()
            .all(|c| 2 * c.l + c.s - 1 <= c.nt && c.nt <= 9));
        // L=3, S=2 needs 7 machines: N_t in {7, 8, 9}.
        assert_eq!(v.cases.iter().filter(|c| c.l == 3 && c.s == 2).count(), 3);
    }

    #[test]
    fn infeasible_case_names_the_field() {
        let cfg = RunConfig {
            l: Some(3),
            s: Some(2),
            n: Some(5),
            ..Default::default()
        };
        match verify_settings(&cfg) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "n"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"nn": 3}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(
            r#"{"scheme": "2", "assignment": "heterogeneous", "speeds": ["1", "3/2"],
                "timing": {"noise": {"kind": "shifted_exponential", "shift": 0.1, "rate": 2.0}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.scheme, Some(Scheme::Two));
        assert_eq!(
            cfg.timing.unwrap().noise,
            Noise::ShiftedExponential {
                shift: 0.1,
                rate: 2.0
            }
        );
    }

    #[test]
    fn sweep_rejects_empty_grid_and_lcc() {
        let empty = RunConfig {
            lambda_grid: Some(vec![]),
            ..Default::default()
        };
        assert!(matches!(
            sweep_settings(&empty),
            Err(CliError::Config {
                field: "lambda_grid",
                ..
            })
        ));
        let lcc = RunConfig {
            scheme: Some(Scheme::Lcc),
            ..Default::default()
        };
        assert!(sweep_settings(&lcc).is_err());
    }

    #[test]
    fn simulate_defaults() {
        let sim = simulate_settings(&RunConfig::default()).unwrap();
        assert_eq!((sim.n, sim.l, sim.iters, sim.seed), (20, 5, 5000, 0));
        assert_eq!(sim.p_values, (0..=10).collect::<Vec<_>>());
        assert_eq!(sim.s_values, vec![0, 4]);
    }

    #[test]
    fn timing_flags() {
        let t = timing_from_flags(Some("2"), None, Some(1.0), None, None)
            .unwrap()
            .unwrap();
        assert_eq!(t.base_time_per_load, Rational::from_integer(2));
        assert_eq!(
            t.noise,
            Noise::ShiftedExponential {
                shift: 0.0,
                rate: 1.0
            }
        );
        assert!(timing_from_flags(None, Some(1.0), None, None, None).is_err());
    }
}
