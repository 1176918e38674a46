//! Storage-sharing: `A` is split row-wise into `A_lambda` (top `lambda q`
//! rows) and `A_{1-lambda}`, and two (scheme, L) configurations run side by
//! side so the storage per machine can sit between the discrete `1/L` points.
//!
//! Cost aggregation: storage is the lambda-weighted mix of the two fractions.
//! Every other column is the sum of the two configurations evaluated at their
//! own row counts. Columns that scale with `q` therefore mix with weights
//! `lambda` and `1-lambda`, while the `q`-independent download term is paid
//! once per configuration.

use serde::Serialize;

use crate::assignment::{Assignment, MachineId};
use crate::cost::{cost_row, CostReport, TableRow};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::matrix::{Axis, FieldMatrix};
use crate::rational::{frac, int, Rational};
use crate::scheme::{self, Dims, Scheme, SystemParams};

pub const DEFAULT_GRID_POINTS: usize = 21;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SharingConfig {
    pub scheme_i: Scheme,
    pub scheme_j: Scheme,
    pub l_prime: usize,
    #[serde(with = "crate::rational::serde_vec")]
    pub lambda_grid: Vec<Rational>,
}

/// `points` values from 1 down to 0, evenly spaced.
pub fn uniform_grid(points: usize) -> Result<Vec<Rational>> {
    if points < 2 {
        return Err(Error::InvalidParameter(format!(
            "lambda grid needs at least 2 points, got {points}"
        )));
    }
    let steps = (points - 1) as i128;
    Ok((0..=steps).rev().map(|k| frac(k, steps)).collect())
}

impl SharingConfig {
    pub fn new(
        scheme_i: Scheme,
        scheme_j: Scheme,
        l_prime: usize,
        lambda_grid: Vec<Rational>,
    ) -> Result<Self> {
        for s in [scheme_i, scheme_j] {
            if s == Scheme::Lcc {
                return Err(Error::InvalidParameter(
                    "storage-sharing pairs scheme 1 and scheme 2 only".into(),
                ));
            }
        }
        if lambda_grid.is_empty() {
            return Err(Error::InvalidParameter("empty lambda grid".into()));
        }
        if let Some(bad) = lambda_grid.iter().find(|x| **x < int(0) || **x > int(1)) {
            return Err(Error::InvalidParameter(format!(
                "lambda {bad} outside [0, 1]"
            )));
        }
        let cfg = Self {
            scheme_i,
            scheme_j,
            l_prime,
            lambda_grid,
        };
        if cfg.l_pairs().is_empty() {
            return Err(Error::InvalidParameter(format!(
                "same-scheme sharing needs L' >= 3, got {l_prime}"
            )));
        }
        Ok(cfg)
    }

    /// Same scheme: `(L, L-1)` for `L = L'` down to 3. Otherwise `(L', L')`.
    pub fn l_pairs(&self) -> Vec<(usize, usize)> {
        if self.scheme_i == self.scheme_j {
            (3..=self.l_prime).rev().map(|l| (l, l - 1)).collect()
        } else if self.l_prime >= 1 {
            vec![(self.l_prime, self.l_prime)]
        } else {
            vec![]
        }
    }
}

/// The system the shared configurations run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SharingSystem {
    pub nt: usize,
    pub s: usize,
    pub dims: Dims,
}

fn row_of(s: Scheme) -> TableRow {
    match s {
        Scheme::Two => TableRow::Scheme2,
        _ => TableRow::Scheme1,
    }
}

/// One configuration's closed-form costs on `weight * q` rows.
fn weighted_row(
    scheme: Scheme,
    l: usize,
    weight: Rational,
    sys: &SharingSystem,
) -> Result<CostReport> {
    let full = cost_row(row_of(scheme), l, sys.s, sys.nt, sys.dims)?;
    let empty = cost_row(
        row_of(scheme),
        l,
        sys.s,
        sys.nt,
        Dims::new(0, sys.dims.v, sys.dims.r),
    )?;
    // Every column is affine in q.
    let at = |f: Rational, e: Rational| e + weight * (f - e);
    Ok(CostReport {
        storage_fraction: weight * full.storage_fraction,
        encoding: at(full.encoding, empty.encoding),
        download: at(full.download, empty.download),
        computing: at(full.computing, empty.computing),
        upload: at(full.upload, empty.upload),
        decoding: at(full.decoding, empty.decoding),
    })
}

fn add(a: &CostReport, b: &CostReport) -> CostReport {
    CostReport {
        storage_fraction: a.storage_fraction + b.storage_fraction,
        encoding: a.encoding + b.encoding,
        download: a.download + b.download,
        computing: a.computing + b.computing,
        upload: a.upload + b.upload,
        decoding: a.decoding + b.decoding,
    }
}

/// Closed-form costs of one grid point.
pub fn shared_row(
    cfg: &SharingConfig,
    lambda: Rational,
    l_pair: (usize, usize),
    sys: &SharingSystem,
) -> Result<CostReport> {
    let one = int(1);
    let mut total = CostReport::zero();
    if lambda > int(0) {
        total = add(&total, &weighted_row(cfg.scheme_i, l_pair.0, lambda, sys)?);
    }
    if lambda < one {
        total = add(
            &total,
            &weighted_row(cfg.scheme_j, l_pair.1, one - lambda, sys)?,
        );
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub l_pair: (usize, usize),
    #[serde(with = "crate::rational::serde_str")]
    pub lambda: Rational,
    pub s: usize,
    pub report: CostReport,
}

/// One row per `(L pair, lambda)` in configuration order.
pub fn sweep_curves(cfg: &SharingConfig, sys: &SharingSystem) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for l_pair in cfg.l_pairs() {
        for &lambda in &cfg.lambda_grid {
            rows.push(SweepRow {
                l_pair,
                lambda,
                s: sys.s,
                report: shared_row(cfg, lambda, l_pair, sys)?,
            });
        }
    }
    Ok(rows)
}

fn run_part(
    scheme: Scheme,
    l: usize,
    a: &FieldMatrix,
    b: &FieldMatrix,
    sys: &SharingSystem,
    field: PrimeField,
    stragglers: &[MachineId],
) -> Result<(FieldMatrix, CostReport)> {
    let dims = Dims::new(a.rows(), a.cols(), b.cols());
    let params = SystemParams::new(sys.nt, l, sys.s, 0, field, dims)?;
    let nt = params.machines();
    let asg = Assignment::cyclic(&nt, l, sys.s)?;
    let out = scheme::run(scheme, a, b, &params, &nt, &asg, stragglers)?;
    let report = CostReport::measured(&out.counters, dims, &nt);
    Ok((out.product, report))
}

/// Runs scheme `i` with `L = l_pair.0` on the top `lambda q` rows and scheme
/// `j` with `L = l_pair.1` on the rest, on `N_t` machines under cyclic
/// assignment. `q` is padded so `lambda q` is integral. Returns the stacked
/// product and the measured costs combined as in [`shared_row`].
pub fn run_shared(
    a: &FieldMatrix,
    b: &FieldMatrix,
    cfg: &SharingConfig,
    lambda: Rational,
    l_pair: (usize, usize),
    sys: &SharingSystem,
    stragglers: &[MachineId],
) -> Result<(FieldMatrix, CostReport)> {
    if lambda < int(0) || lambda > int(1) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    if a.shape() != (sys.dims.q, sys.dims.v) || b.shape() != (sys.dims.v, sys.dims.r) {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?} and B is {:?}, expected {:?}",
            a.shape(),
            b.shape(),
            sys.dims
        )));
    }
    let q = sys.dims.q;
    let den = *lambda.denom() as usize;
    let padded_q = q.div_ceil(den) * den;
    let a = a.pad_to(padded_q, a.cols())?;
    let top = (lambda * int(padded_q as i128)).to_integer() as usize;
    let total_rows = int(padded_q as i128);

    let mut blocks = Vec::new();
    let mut report = CostReport::zero();
    for (scheme, l, rows) in [
        (cfg.scheme_i, l_pair.0, 0..top),
        (cfg.scheme_j, l_pair.1, top..padded_q),
    ] {
        if rows.is_empty() {
            continue;
        }
        let weight = int(rows.len() as i128) / total_rows;
        let (product, mut part) = run_part(
            scheme,
            l,
            &a.slice_rows(rows)?,
            b,
            sys,
            a.field(),
            stragglers,
        )?;
        part.storage_fraction *= weight;
        report = add(&report, &part);
        blocks.push(product);
    }
    let product = FieldMatrix::concat(&blocks, Axis::Row)?.trim(q, sys.dims.r)?;
    Ok((product, report))
}
