//! Acceptance gate. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Tolerances and time budgets are fixed below.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use lcsd_cli::commands;
use lcsd_cli::config::{self, RunConfig};
use lcsd_core::assignment::{recovery_group_size, Assignment, AssignmentRule, MachineId};
use lcsd_core::cost::{check_measured, cost_row, CostReport, TableRow};
use lcsd_core::elastic::{
    binomial, build_union_storage, combinations, enumerate_realizations, realization_count,
    run_step, DEFAULT_ENUMERATION_CAP,
};
use lcsd_core::rational::{frac, Rational};
use lcsd_core::scheme::{self, Dims, Scheme, SystemParams};
use lcsd_core::sharing::{
    sweep_curves, uniform_grid, SharingConfig, SharingSystem, DEFAULT_GRID_POINTS,
};
use lcsd_core::sim::{sample_realization, SimConfig};
use lcsd_core::{Error, FieldMatrix, PrimeField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const P: u64 = 1993;
/// Chi-square acceptance: statistic below `df + SIGMAS * sqrt(2 df)`.
const SIGMAS: f64 = 3.0;
const REALIZATION_RATIO_BAND: (f64, f64) = (0.56, 0.565);

fn field() -> PrimeField {
    PrimeField::new(P).unwrap()
}

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn inputs(dims: Dims, seed: u64) -> (FieldMatrix, FieldMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        FieldMatrix::random(field(), dims.q, dims.v, &mut rng),
        FieldMatrix::random(field(), dims.v, dims.r, &mut rng),
    )
}

fn decode_equivalence() -> Outcome {
    let settings = config::verify_settings(&RunConfig::default()).map_err(|e| e.to_string())?;
    ensure(
        settings.prime == P && (settings.q, settings.v, settings.r) == (6, 6, 6),
        || "default verify grid is not 6x6 over GF(1993)".into(),
    )?;
    let mut want = BTreeSet::new();
    for l in 1..=3 {
        for s in 0..=2 {
            for nt in recovery_group_size(l, s)..=9 {
                want.insert((l, s, nt));
            }
        }
    }
    let got: BTreeSet<_> = settings.cases.iter().map(|c| (c.l, c.s, c.nt)).collect();
    ensure(got == want, || {
        format!("grid covers {} cases, expected {}", got.len(), want.len())
    })?;
    let out = commands::verify(&settings, false).map_err(|e| e.to_string())?;
    ensure(out.failures.is_empty(), || out.failures.join("; "))?;
    let runs: usize = out
        .csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(5).unwrap().parse::<usize>().unwrap())
        .sum();
    Ok(format!(
        "{} (L,S,N_t) cases x 2 schemes x 2 assignments, {runs} straggler subsets, all exact",
        want.len()
    ))
}

fn threshold_sharpness() -> Outcome {
    let mut checked = 0usize;
    let mut boundary = 0usize;
    for l in [2, 3] {
        for s in [0, 1] {
            let k = recovery_group_size(l, s);
            for nt in [k, k + 1] {
                let dims = Dims::new(nt * 2, 2 * l, nt);
                let params =
                    SystemParams::new(nt, l, s, 0, field(), dims).map_err(|e| e.to_string())?;
                let machines = params.machines();
                let asg = Assignment::cyclic(&machines, l, s).map_err(|e| e.to_string())?;
                let (a, b) = inputs(dims, (l * 100 + s * 10 + nt) as u64);
                let expected = a.matmul(&b).unwrap();
                for size in 0..=nt {
                    for down in combinations(nt, size) {
                        let slow: Vec<MachineId> = down.iter().copied().map(MachineId).collect();
                        let worst = asg
                            .groups()
                            .iter()
                            .map(|g| g.iter().filter(|m| !slow.contains(m)).count())
                            .min()
                            .unwrap();
                        if worst == 2 * l - 1 {
                            boundary += 1;
                        }
                        for sch in [Scheme::One, Scheme::Two] {
                            checked += 1;
                            let res = scheme::run(sch, &a, &b, &params, &machines, &asg, &slow);
                            match (worst >= 2 * l - 1, res) {
                                (true, Ok(out)) if out.product == expected => {}
                                (false, Err(Error::DecodeFailure { .. })) => {}
                                (enough, res) => {
                                    return Err(format!(
                                        "L={l} S={s} N_t={nt} scheme {sch} down {down:?}: min survivors {worst}, enough={enough}, got {:?}",
                                        res.map(|_| "product")
                                    ))
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(format!(
        "{checked} runs over every survivor pattern at L=2,3; {boundary} patterns with exactly 2L-1 survivors in the weakest group"
    ))
}

fn cost_fidelity() -> Outcome {
    let mut lines = Vec::new();
    for (nt, l, s, n) in [(6, 2, 1, 12), (9, 3, 2, 18), (4, 1, 0, 8)] {
        let dims = Dims::square(n);
        let params = SystemParams::new(nt, l, s, 0, field(), dims).map_err(|e| e.to_string())?;
        let machines = params.machines();
        let asg = Assignment::cyclic(&machines, l, s).map_err(|e| e.to_string())?;
        let (a, b) = inputs(dims, n as u64);
        for (sch, row) in [
            (Scheme::One, TableRow::Scheme1),
            (Scheme::Two, TableRow::Scheme2),
        ] {
            let out = scheme::run(sch, &a, &b, &params, &machines, &asg, &[])
                .map_err(|e| e.to_string())?;
            let measured = CostReport::measured(&out.counters, dims, &machines);
            let expected = cost_row(row, l, s, nt, dims).map_err(|e| e.to_string())?;
            check_measured(&expected, &measured)
                .map_err(|d| format!("N_t={nt} L={l} S={s} scheme {sch}: {d}"))?;
        }
        lines.push(format!("(N_t={nt},L={l},S={s},q=v=r={n})"));
    }
    Ok(format!(
        "measured counters equal the closed forms exactly in all six columns, both schemes, at {}",
        lines.join(" ")
    ))
}

fn sharing_endpoints() -> Outcome {
    let grid = uniform_grid(DEFAULT_GRID_POINTS).unwrap();
    let span = |cfg: &SharingConfig, s: usize| -> Result<(Rational, Rational), String> {
        let sys = SharingSystem {
            nt: 21,
            s,
            dims: Dims::square(500),
        };
        let rows = sweep_curves(cfg, &sys).map_err(|e| e.to_string())?;
        let st = rows.iter().map(|r| r.report.storage_fraction);
        Ok((st.clone().min().unwrap(), st.max().unwrap()))
    };
    let same = SharingConfig::new(Scheme::One, Scheme::One, 9, grid.clone()).unwrap();
    for s in 0..=2 {
        let got = span(&same, s)?;
        ensure(got == (frac(1, 9), frac(1, 2)), || {
            format!("i=j=1, S={s}: span {got:?}")
        })?;
    }
    let cross = SharingConfig::new(Scheme::One, Scheme::Two, 9, grid).unwrap();
    for s in 0..=2 {
        let got = span(&cross, s)?;
        let want = (frac(17 + s as i128, 9 * 21), frac(1, 9));
        ensure(got == want, || {
            format!("i=1, j=2, S={s}: span {got:?}, want {want:?}")
        })?;
    }
    Ok(
        "i=j=1 spans [1/9, 1/2]; i=1,j=2 spans [(2L'+S-1)/(L'N_t), 1/L'] for S=0,1,2 (exact)"
            .into(),
    )
}

fn as_f64<T: TryInto<u128>>(x: T) -> f64 {
    x.try_into().ok().expect("fits in u128") as f64
}

fn realization_probability() -> Outcome {
    let count = realization_count(20, 7);
    ensure(count == 137_980u32.into(), || {
        format!("realization_count(20,7) = {count}")
    })?;
    let total = as_f64(count);
    let ratio = as_f64(binomial(20, 7)) / total;
    ensure(
        ratio >= REALIZATION_RATIO_BAND.0 && ratio <= REALIZATION_RATIO_BAND.1,
        || format!("ratio {ratio}"),
    )?;
    let draws = 100_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0u64; 8];
    for _ in 0..draws {
        counts[20 - sample_realization(20, 7, &mut rng).unwrap().len()] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let e = draws as f64 * as_f64(binomial(20, k)) / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let df: f64 = 7.0;
    let limit = df + SIGMAS * (2.0 * df).sqrt();
    ensure(chi2 < limit, || {
        format!("chi-square {chi2:.2} >= {limit:.2}")
    })?;
    Ok(format!(
        "|N_7| = 137980, C(20,7)/|N_7| = {ratio:.4}, chi-square {chi2:.2} < {limit:.2} over {draws} draws"
    ))
}

fn elasticity_sweep() -> Outcome {
    let dims = Dims::new(6, 4, 6);
    let params = SystemParams::new(6, 2, 1, 1, field(), dims).map_err(|e| e.to_string())?;
    let (a, b) = inputs(dims, 6);
    let expected = a.matmul(&b).unwrap();
    let realizations =
        enumerate_realizations(6, 1, DEFAULT_ENUMERATION_CAP).map_err(|e| e.to_string())?;
    ensure(realizations.len() == 7, || {
        format!("{} realizations", realizations.len())
    })?;
    let mut steps = 0;
    for sch in [Scheme::One, Scheme::Two] {
        for rule in [AssignmentRule::Cyclic, AssignmentRule::Heterogeneous] {
            let storage = build_union_storage(&a, &params, sch, rule, DEFAULT_ENUMERATION_CAP)
                .map_err(|e| e.to_string())?;
            for r in &realizations {
                let mut patterns: Vec<Vec<MachineId>> = vec![vec![]];
                patterns.extend(r.available().iter().map(|&m| vec![m]));
                for slow in patterns {
                    let (out, _) = run_step(&storage, &b, r, &params, &slow)
                        .map_err(|e| format!("scheme {sch} {rule} {r:?} {slow:?}: {e}"))?;
                    ensure(out == expected, || {
                        format!("scheme {sch} {rule} {r:?} {slow:?}: wrong product")
                    })?;
                    steps += 1;
                }
            }
        }
    }
    Ok(format!(
        "union storage built once per scheme/assignment; {steps} steps over all 7 realizations and every single straggler decode exactly"
    ))
}

fn assignment_optimality() -> Outcome {
    let settings = config::simulate_settings(&RunConfig::default()).map_err(|e| e.to_string())?;
    ensure(settings == SimConfig::reference_default(), || {
        "default simulation config drifted".into()
    })?;
    let first = commands::simulate(&settings).map_err(|e| e.to_string())?;
    let second = commands::simulate(&settings).map_err(|e| e.to_string())?;
    ensure(first == second, || {
        "fixed-seed CSV differs between runs".into()
    })?;

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(first.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let find = |p: usize, rule: &str, s: usize| {
        rows.iter()
            .find(|r| r[0] == *p.to_string() && &r[1] == rule && r[2] == *s.to_string())
    };
    let mut checked = 0;
    let mut skipped = Vec::new();
    let mut pinned = 0u64;
    for s in [0usize, 4] {
        for p in 0..=10usize {
            let k = recovery_group_size(5, s);
            let (Some(c), Some(h)) = (find(p, "cyclic", s), find(p, "heterogeneous", s)) else {
                ensure(k > 20 - p, || format!("missing feasible row P={p} S={s}"))?;
                skipped.push(format!("(P={p},S={s})"));
                continue;
            };
            let (tc, th): (f64, f64) = (c[3].parse().unwrap(), h[3].parse().unwrap());
            ensure(th <= tc, || {
                format!("P={p} S={s}: heterogeneous {th} > cyclic {tc}")
            })?;
            ensure(&h[7] == "0", || {
                format!("P={p} S={s}: {} pinned iterations with nonzero gain", &h[7])
            })?;
            pinned += h[6].parse::<u64>().unwrap();
            checked += 1;
        }
    }
    ensure(pinned > 0, || "no iteration had N_t = 2L+S-1".into())?;
    let gain = |s: usize| -> f64 { find(7, "heterogeneous", s).unwrap()[4].parse().unwrap() };
    let (g0, g4) = (gain(0), gain(4));
    ensure(g4 < g0, || {
        format!("gain at S=4,P=7 ({g4:.4}) not below S=0,P=7 ({g0:.4})")
    })?;
    Ok(format!(
        "heterogeneous <= cyclic on all {checked} feasible (P,S); {pinned} pinned iterations all zero-gain; \
         gain S=0,P=7 {g0:.3} > S=4,P=7 {g4:.3}; CSV byte-identical; infeasible since 2L+S-1 > N-P: {}",
        skipped.join(" ")
    ))
}

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion {
            id: 1,
            name: "exact decode equivalence",
            budget: Duration::from_secs(60),
            check: decode_equivalence,
        },
        Criterion {
            id: 2,
            name: "recovery-threshold sharpness",
            budget: Duration::from_secs(10),
            check: threshold_sharpness,
        },
        Criterion {
            id: 3,
            name: "cost-table fidelity",
            budget: Duration::from_secs(10),
            check: cost_fidelity,
        },
        Criterion {
            id: 4,
            name: "storage-sharing endpoints",
            budget: Duration::from_secs(5),
            check: sharing_endpoints,
        },
        Criterion {
            id: 5,
            name: "realization probability",
            budget: Duration::from_secs(30),
            check: realization_probability,
        },
        Criterion {
            id: 6,
            name: "elasticity sweep",
            budget: Duration::from_secs(30),
            check: elasticity_sweep,
        },
        Criterion {
            id: 7,
            name: "assignment optimality",
            budget: Duration::from_secs(120),
            check: assignment_optimality,
        },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let took = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if took <= c.budget {
                Ok(msg)
            } else {
                Err(format!("took {took:.1?}, budget {:?}", c.budget))
            }
        });
        match outcome {
            Ok(msg) => println!("[PASS] {}. {} ({took:.2?}): {msg}", c.id, c.name),
            Err(msg) => {
                println!("[FAIL] {}. {} ({took:.2?}): {msg}", c.id, c.name);
                failed.push(c.id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
