//! The four batch commands. Each returns the full CSV text, config comment
//! line included.

use lcsd_core::assignment::{Assignment, MachineId};
use lcsd_core::cost::{cost_row, CostReport, TableRow};
use lcsd_core::elastic::combinations;
use lcsd_core::rational::{display, frac, int, to_f64, Rational};
use lcsd_core::scheme::{
    self, lcc, one, two, Counters, Dims, Layout, Scheme, SystemParams, TaskResult,
};
use lcsd_core::sharing::{sweep_curves, SharingConfig, SharingSystem};
use lcsd_core::sim::{simulate as run_sim, SimConfig};
use lcsd_core::{FieldMatrix, PrimeField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{Case, CostSettings, SweepSettings, VerifySettings};
use crate::CliError;

fn comment(command: &str, settings: &impl Serialize, extra: Option<serde_json::Value>) -> String {
    let mut v = json!({ "command": command, "settings": settings });
    if let Some(extra) = extra {
        v["extra"] = extra;
    }
    format!("# config: {v}\n")
}

fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Usage(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("csv: {e}"))
}

fn f64s(xs: &[Rational]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|x| to_f64(x).to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub csv: String,
    pub failures: Vec<String>,
}

fn case_speeds(settings: &VerifySettings, nt: usize) -> Vec<Rational> {
    match &settings.speeds {
        Some(s) => s[..nt].to_vec(),
        None => (0..nt)
            .map(|i| if i < nt / 2 { int(1) } else { frac(3, 2) })
            .collect(),
    }
}

fn case_inputs(
    settings: &VerifySettings,
    field: PrimeField,
    index: usize,
) -> (FieldMatrix, FieldMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    rng.set_stream(index as u64);
    let a = FieldMatrix::random(field, settings.q, settings.v, &mut rng);
    let b = FieldMatrix::random(field, settings.v, settings.r, &mut rng);
    (a, b)
}

fn case_params(
    settings: &VerifySettings,
    field: PrimeField,
    c: &Case,
) -> Result<SystemParams, CliError> {
    let dims = Dims::new(settings.q, settings.v, settings.r);
    Ok(SystemParams::new(c.nt, c.l, c.s, 0, field, dims)?
        .with_speeds(case_speeds(settings, c.nt))?)
}

fn first_mismatch(got: &FieldMatrix, want: &FieldMatrix) -> Option<(usize, usize)> {
    if got.shape() != want.shape() {
        return Some((0, 0));
    }
    (0..want.rows())
        .flat_map(|i| (0..want.cols()).map(move |j| (i, j)))
        .find(|&(i, j)| got.get(i, j) != want.get(i, j))
}

/// Flips the low bit of entry (0, 0), or the next bit if that leaves the field.
fn corrupt(result: &mut TaskResult, field: PrimeField) {
    let x = result.product.get(0, 0).value();
    let flipped = if (x ^ 1) < field.modulus() {
        x ^ 1
    } else {
        x ^ 2
    };
    result.product.set(0, 0, flipped);
}

/// One step with a single corrupted result from the first member of the
/// first non-empty group, so the corrupted result is always used.
fn run_with_fault(
    scheme: Scheme,
    a: &FieldMatrix,
    b: &FieldMatrix,
    params: &SystemParams,
    asg: &Assignment,
) -> lcsd_core::Result<(FieldMatrix, Layout, MachineId)> {
    let nt = params.machines();
    let mut c = Counters::default();
    let pick = |results: &[TaskResult]| {
        results
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.product.is_empty())
            .min_by_key(|(_, r)| (r.group, r.machine))
            .map(|(i, _)| i)
            .expect("some result is non-empty")
    };
    match scheme {
        Scheme::Lcc => {
            let layout = Layout::new(Scheme::Lcc, params.dims, params.l, None)?;
            let st = lcc::place_storage(a, params, &nt, &mut c)?;
            let dl = lcc::download(b, params, &nt, &mut c)?;
            let mut res = lcc::compute(&st, &dl, &mut c)?;
            let i = pick(&res);
            corrupt(&mut res[i], params.field);
            let out = lcc::decode(&res, params, &nt, &mut c)?;
            Ok((out, layout, res[i].machine))
        }
        Scheme::One => {
            let layout = Layout::new(Scheme::One, params.dims, params.l, Some(asg))?;
            let st = one::place_storage(a, params, &nt, &mut c)?;
            let dl = one::downloads(b, asg, params, &layout, &mut c)?;
            let mut res = one::compute(&st, &dl, &mut c)?;
            let i = pick(&res);
            corrupt(&mut res[i], params.field);
            let out = one::decode(&res, asg, params, &layout, &[], &mut c)?;
            Ok((out, layout, res[i].machine))
        }
        Scheme::Two => {
            let layout = Layout::new(Scheme::Two, params.dims, params.l, Some(asg))?;
            let st = two::place_storage(a, asg, params, &layout, &mut c)?;
            let dl = two::download(b, params, &nt, &mut c)?;
            let mut res = two::compute(&st, &dl, &mut c)?;
            let i = pick(&res);
            corrupt(&mut res[i], params.field);
            let out = two::decode(&res, asg, params, &layout, &[], &mut c)?;
            Ok((out, layout, res[i].machine))
        }
    }
}

/// Decode-equals-product over every case, scheme, assignment and straggler
/// subset of size `S`.
pub fn verify(settings: &VerifySettings, inject_fault: bool) -> Result<VerifyOutcome, CliError> {
    let field = PrimeField::new(settings.prime)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (ci, c) in settings.cases.iter().enumerate() {
        let params = case_params(settings, field, c)?;
        let (a, b) = case_inputs(settings, field, ci);
        let expected = scheme::reference_product(&a, &b)?;
        let nt = params.machines();
        for &sch in &settings.schemes {
            for &rule in &settings.assignments {
                let asg = Assignment::build(rule, &nt, &params.speeds, c.l, c.s)?;
                let subsets = combinations(c.nt, c.s);
                let mut bad = 0usize;
                for subset in &subsets {
                    let slow: Vec<MachineId> = subset.iter().copied().map(MachineId).collect();
                    let label = format!(
                        "L={} S={} N_t={} scheme {sch} {rule} stragglers {:?}",
                        c.l, c.s, c.nt, subset
                    );
                    match scheme::run(sch, &a, &b, &params, &nt, &asg, &slow) {
                        Ok(out) if out.product == expected => {}
                        Ok(_) => {
                            bad += 1;
                            failures.push(format!("{label}: wrong product"));
                        }
                        Err(e) => {
                            bad += 1;
                            failures.push(format!("{label}: {e}"));
                        }
                    }
                }
                if inject_fault && ci == 0 && rows.is_empty() {
                    let label = format!("L={} S={} N_t={} scheme {sch} {rule}", c.l, c.s, c.nt);
                    match run_with_fault(sch, &a, &b, &params, &asg) {
                        Ok((out, layout, m)) => match first_mismatch(&out, &expected) {
                            Some((i, j)) => {
                                bad += 1;
                                let g = layout
                                    .group_of_entry(i, j)
                                    .map_or("unknown".to_string(), |g| g.to_string());
                                failures.push(format!(
                                    "{label}: corrupted result from {m}: mismatch at ({i}, {j}) in group {g}"
                                ));
                            }
                            None => failures.push(format!("{label}: corruption went undetected")),
                        },
                        Err(e) => {
                            bad += 1;
                            failures.push(format!("{label}: corrupted run failed: {e}"));
                        }
                    }
                }
                rows.push(vec![
                    c.l.to_string(),
                    c.s.to_string(),
                    c.nt.to_string(),
                    sch.to_string(),
                    rule.to_string(),
                    subsets.len().to_string(),
                    bad.to_string(),
                ]);
            }
        }
    }
    let extra = inject_fault.then(|| json!({ "inject_fault": true }));
    let mut csv = comment("verify", settings, extra);
    csv += &to_csv(
        &[
            "L",
            "S",
            "N_t",
            "scheme",
            "assignment",
            "straggler_sets",
            "failures",
        ],
        &rows,
    )?;
    Ok(VerifyOutcome { csv, failures })
}

/// All table rows at one parameter point.
pub fn cost(settings: &CostSettings) -> Result<String, CliError> {
    let dims = Dims::new(settings.q, settings.v, settings.r);
    let mut rows = Vec::new();
    for row in TableRow::ALL {
        let rep = cost_row(row, settings.l, settings.s, settings.nt, dims)?;
        let values = rep.values();
        let mut rec = vec![
            row.name().to_string(),
            settings.l.to_string(),
            settings.s.to_string(),
            settings.nt.to_string(),
            settings.q.to_string(),
            settings.v.to_string(),
            settings.r.to_string(),
        ];
        rec.extend(values.iter().map(display));
        rec.extend(f64s(&values));
        rows.push(rec);
    }
    let mut header = vec!["scheme", "L", "S", "N_t", "q", "v", "r"];
    header.extend(CostReport::COLUMNS);
    let decimals: Vec<String> = CostReport::COLUMNS
        .iter()
        .map(|c| format!("{c}_f64"))
        .collect();
    header.extend(decimals.iter().map(String::as_str));
    let mut csv = comment("cost", settings, None);
    csv += &to_csv(&header, &rows)?;
    Ok(csv)
}

/// Storage-sharing curves, one family per `S`.
pub fn sweep(settings: &SweepSettings) -> Result<String, CliError> {
    let cfg = SharingConfig::new(
        settings.scheme_i,
        settings.scheme_j,
        settings.l_prime,
        settings.lambda_grid.clone(),
    )?;
    let dims = Dims::new(settings.q, settings.v, settings.r);
    let mut rows = Vec::new();
    for &s in &settings.s_values {
        let sys = SharingSystem {
            nt: settings.nt,
            s,
            dims,
        };
        for row in sweep_curves(&cfg, &sys)? {
            let r = &row.report;
            let values = [
                r.storage_fraction,
                r.download,
                r.computing,
                r.upload,
                r.decoding,
            ];
            let mut rec = vec![
                format!("{}-{}", row.l_pair.0, row.l_pair.1),
                display(&row.lambda),
                row.s.to_string(),
            ];
            rec.extend(values.iter().map(display));
            rec.extend(f64s(&values));
            rows.push(rec);
        }
    }
    let header = [
        "L_pair",
        "lambda",
        "S",
        "storage_fraction",
        "download",
        "computing",
        "upload",
        "decoding",
        "storage_fraction_f64",
        "download_f64",
        "computing_f64",
        "upload_f64",
        "decoding_f64",
    ];
    let mut csv = comment("sweep", settings, None);
    csv += &to_csv(&header, &rows)?;
    Ok(csv)
}

/// Mean step time per `(P, assignment, S)`.
pub fn simulate(cfg: &SimConfig) -> Result<String, CliError> {
    let stats = run_sim(cfg)?;
    let rows: Vec<Vec<String>> = stats
        .rows
        .iter()
        .map(|r| {
            let hist: Vec<String> = r
                .histogram
                .iter()
                .map(|(k, v)| format!("{k}:{v}"))
                .collect();
            vec![
                r.p.to_string(),
                r.rule.to_string(),
                r.s.to_string(),
                r.mean_time.to_string(),
                r.gain_vs_cyclic.to_string(),
                cfg.iters.to_string(),
                r.pinned_iterations.to_string(),
                r.pinned_mismatches.to_string(),
                r.slower_than_cyclic.to_string(),
                hist.join(";"),
            ]
        })
        .collect();
    let header = [
        "P",
        "assignment",
        "S",
        "mean_time",
        "gain_vs_cyclic",
        "iterations",
        "pinned_iterations",
        "pinned_mismatches",
        "slower_than_cyclic",
        "n_t_histogram",
    ];
    let skipped: Vec<_> = stats
        .skipped
        .iter()
        .map(|(p, s)| json!({ "P": p, "S": s }))
        .collect();
    let mut csv = comment(
        "simulate",
        cfg,
        Some(json!({ "skipped_infeasible": skipped })),
    );
    csv += &to_csv(&header, &rows)?;
    Ok(csv)
}
