//! One time step of coded matrix multiplication.
//!
//! Three variants share the same four phases (storage placement, download,
//! computing, decoding):
//!
//! - [`lcc`]: every machine stores `V(alpha_n)`, downloads `U(alpha_n)` and
//!   returns the full coded product.
//! - [`one`]: storage as above; the download is split column-wise by the
//!   assignment so machine `n` only receives `U_g(alpha_n)` for its groups.
//! - [`two`]: the download is `U(alpha_n)`; storage is split row-wise so
//!   machine `n` only stores `V_g(alpha_n)` for its groups.
//!
//! Dimensions that do not divide evenly are zero-padded by [`Layout`], which
//! keeps the original shape for trimming the decoded product.

pub mod lcc;
pub mod one;
pub mod two;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::assignment::{recovery_group_size, Assignment, MachineId};
use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};
use crate::lagrange::{self, EvalPoints};
use crate::matrix::{Axis, BlockPartition, FieldMatrix};
use crate::rational::{int, lcm_of_denominators, Rational};

/// Upper bound on any padded dimension.
pub const MAX_PADDED_DIM: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "lcc")]
    Lcc,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Lcc => "lcc",
            Scheme::One => "1",
            Scheme::Two => "2",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lcc" => Ok(Scheme::Lcc),
            "1" => Ok(Scheme::One),
            "2" => Ok(Scheme::Two),
            _ => Err(Error::InvalidParameter(format!("unknown scheme {s:?}"))),
        }
    }
}

/// Matrix shape: `A` is `q x v`, `B` is `v x r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub q: usize,
    pub v: usize,
    pub r: usize,
}

impl Dims {
    pub fn new(q: usize, v: usize, r: usize) -> Self {
        Self { q, v, r }
    }

    pub fn square(n: usize) -> Self {
        Self::new(n, n, n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemParams {
    pub n: usize,
    pub l: usize,
    pub s: usize,
    pub p: usize,
    pub field: PrimeField,
    pub dims: Dims,
    pub speeds: Vec<Rational>,
    pub points: EvalPoints,
}

impl SystemParams {
    /// Validates `2L+S-1 <= N-P` and builds the standard evaluation points.
    pub fn new(
        n: usize,
        l: usize,
        s: usize,
        p: usize,
        field: PrimeField,
        dims: Dims,
    ) -> Result<Self> {
        let points = EvalPoints::standard(field, l.max(1), n)?;
        Self::with_points(n, l, s, p, field, dims, vec![int(1); n], points)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_points(
        n: usize,
        l: usize,
        s: usize,
        p: usize,
        field: PrimeField,
        dims: Dims,
        speeds: Vec<Rational>,
        points: EvalPoints,
    ) -> Result<Self> {
        if l == 0 {
            return Err(Error::Infeasible("L must be at least 1".into()));
        }
        let k = recovery_group_size(l, s);
        if p > n || k > n - p {
            return Err(Error::Infeasible(format!(
                "2L+S-1 = {k} exceeds N-P = {}",
                n as i64 - p as i64
            )));
        }
        if points.l() != l || points.alphas().len() != n || points.field() != field {
            return Err(Error::InvalidPoints(format!(
                "need {l} betas and {n} alphas over {field}"
            )));
        }
        if speeds.len() != n || speeds.iter().any(|s| *s <= Rational::zero()) {
            return Err(Error::InvalidParameter(format!(
                "need {n} positive speeds, got {}",
                speeds.len()
            )));
        }
        Ok(Self {
            n,
            l,
            s,
            p,
            field,
            dims,
            speeds,
            points,
        })
    }

    pub fn with_speeds(mut self, speeds: Vec<Rational>) -> Result<Self> {
        if speeds.len() != self.n || speeds.iter().any(|s| *s <= Rational::zero()) {
            return Err(Error::InvalidParameter(format!(
                "need {} positive speeds",
                self.n
            )));
        }
        self.speeds = speeds;
        Ok(self)
    }

    /// Group size `2L+S-1`.
    pub fn group_size(&self) -> usize {
        recovery_group_size(self.l, self.s)
    }

    /// Results needed per group, `2L-1`.
    pub fn threshold(&self) -> usize {
        2 * self.l - 1
    }

    pub fn machines(&self) -> Vec<MachineId> {
        (0..self.n).map(MachineId).collect()
    }

    pub fn alpha(&self, m: MachineId) -> FieldElement {
        self.points.alpha(m.0)
    }

    /// Speeds of the listed machines.
    pub fn speeds_of(&self, nt: &[MachineId]) -> Vec<Rational> {
        nt.iter().map(|m| self.speeds[m.0]).collect()
    }

    fn check_a(&self, a: &FieldMatrix) -> Result<()> {
        let Dims { q, v, .. } = self.dims;
        if a.shape() != (q, v) || a.field() != self.field {
            return Err(Error::DimensionMismatch(format!(
                "A is {:?} over {}, expected {q}x{v} over {}",
                a.shape(),
                a.field(),
                self.field
            )));
        }
        Ok(())
    }

    fn check_b(&self, b: &FieldMatrix) -> Result<()> {
        let Dims { v, r, .. } = self.dims;
        if b.shape() != (v, r) || b.field() != self.field {
            return Err(Error::DimensionMismatch(format!(
                "B is {:?} over {}, expected {v}x{r} over {}",
                b.shape(),
                b.field(),
                self.field
            )));
        }
        Ok(())
    }
}

fn round_up(x: usize, multiple: u128) -> Result<usize> {
    let m = multiple.max(1);
    let padded = (x as u128).div_ceil(m) * m;
    if padded > MAX_PADDED_DIM as u128 {
        return Err(Error::PaddingTooLarge(padded));
    }
    Ok(padded as usize)
}

/// Padded shape and per-group block ranges for one scheme and assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub scheme: Scheme,
    pub l: usize,
    pub original: Dims,
    pub padded: Dims,
    /// Group `g` owns `group_ranges[g]` of the padded `r` axis (scheme 1)
    /// or `q` axis (scheme 2). A single full range for the baseline.
    pub group_ranges: Vec<Range<usize>>,
}

impl Layout {
    pub fn new(
        scheme: Scheme,
        dims: Dims,
        l: usize,
        assignment: Option<&Assignment>,
    ) -> Result<Self> {
        let multiple = match assignment {
            Some(a) => lcm_of_denominators(a.gammas()) as u128,
            None => 1,
        };
        Self::with_split_multiple(scheme, dims, l, assignment, multiple)
    }

    /// Pads the split axis to a multiple of `multiple`, which must make every
    /// `gamma_g` times the padded extent integral.
    pub fn with_split_multiple(
        scheme: Scheme,
        dims: Dims,
        l: usize,
        assignment: Option<&Assignment>,
        multiple: u128,
    ) -> Result<Self> {
        let v = round_up(dims.v, l as u128)?;
        let (q, r, extent) = match (scheme, assignment) {
            (Scheme::Lcc, _) => (dims.q, dims.r, None),
            (Scheme::One, Some(_)) => {
                let r = round_up(dims.r, multiple)?;
                (dims.q, r, Some(r))
            }
            (Scheme::Two, Some(_)) => {
                let q = round_up(dims.q, multiple)?;
                (q, dims.r, Some(q))
            }
            (_, None) => {
                return Err(Error::InvalidAssignment(format!(
                    "scheme {scheme} needs an assignment"
                )))
            }
        };
        let group_ranges = match (extent, assignment) {
            (Some(extent), Some(a)) => {
                let mut ranges = Vec::with_capacity(a.group_count());
                let mut acc = Rational::zero();
                let mut start = 0usize;
                for gamma in a.gammas() {
                    acc += gamma;
                    let end = acc * int(extent as i128);
                    if !end.is_integer() {
                        return Err(Error::InvalidPartition(format!(
                            "extent {extent} is not divisible by the fractions"
                        )));
                    }
                    let end = end.to_integer() as usize;
                    ranges.push(start..end);
                    start = end;
                }
                if start != extent {
                    return Err(Error::InvalidAssignment(
                        "fractions do not sum to one".into(),
                    ));
                }
                ranges
            }
            _ => std::iter::once(0..dims.r).collect(),
        };
        Ok(Self {
            scheme,
            l,
            original: dims,
            padded: Dims::new(q, v, r),
            group_ranges,
        })
    }

    pub fn block_width(&self) -> usize {
        self.padded.v / self.l
    }

    /// Group whose decoded block holds entry `(row, col)` of the product.
    pub fn group_of_entry(&self, row: usize, col: usize) -> Option<usize> {
        let x = match self.scheme {
            Scheme::Two => row,
            _ => col,
        };
        self.group_ranges.iter().position(|r| r.contains(&x))
    }
}

/// What part of a coded object a share holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Part {
    Whole,
    /// Group `g`, covering `range` of the split axis.
    Group {
        g: usize,
        range: Range<usize>,
    },
}

impl Part {
    pub fn group(&self) -> Option<usize> {
        match self {
            Part::Whole => None,
            Part::Group { g, .. } => Some(*g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredShare {
    pub machine: MachineId,
    /// Index of the availability realization the share was placed for,
    /// when it depends on one.
    pub realization: Option<usize>,
    pub part: Part,
    pub block: FieldMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownloadShare {
    pub machine: MachineId,
    pub part: Part,
    pub block: FieldMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskResult {
    pub machine: MachineId,
    pub group: usize,
    pub product: FieldMatrix,
}

/// Field elements and multiply-accumulates attributed to one machine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MachineCounters {
    pub stored: u64,
    pub downloaded: u64,
    pub uploaded: u64,
    pub compute_macs: u64,
    /// Master-side encoding work done on behalf of this machine.
    pub encode_macs: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub per_machine: BTreeMap<MachineId, MachineCounters>,
    pub decode_macs: u64,
}

impl Counters {
    pub fn machine(&mut self, m: MachineId) -> &mut MachineCounters {
        self.per_machine.entry(m).or_default()
    }

    /// Adds `other` into `self`.
    pub fn absorb(&mut self, other: &Counters) {
        for (m, c) in &other.per_machine {
            let e = self.machine(*m);
            e.stored += c.stored;
            e.downloaded += c.downloaded;
            e.uploaded += c.uploaded;
            e.compute_macs += c.compute_macs;
            e.encode_macs += c.encode_macs;
        }
        self.decode_macs += other.decode_macs;
    }

    /// Restricts storage accounting to the listed machines.
    pub fn retain(&mut self, machines: &[MachineId]) {
        let keep: BTreeSet<_> = machines.iter().collect();
        self.per_machine.retain(|m, _| keep.contains(m));
    }
}

/// Evaluates the block polynomial at `at`, charging `L` MACs per element.
fn encode_counted(
    blocks: &[FieldMatrix],
    points: &EvalPoints,
    at: FieldElement,
    macs: &mut u64,
) -> Result<FieldMatrix> {
    let out = lagrange::encode_blocks(blocks, points, at)?;
    *macs += (blocks.len() * out.len()) as u64;
    Ok(out)
}

fn product_counted(
    a: &FieldMatrix,
    b: &FieldMatrix,
    c: &mut MachineCounters,
) -> Result<FieldMatrix> {
    let out = a.matmul(b)?;
    c.compute_macs += (a.rows() * a.cols() * b.cols()) as u64;
    c.uploaded += out.len() as u64;
    Ok(out)
}

/// Recovers `sum_l f(beta_l)` for the degree-`2L-2` polynomial `f` sampled by
/// `results`, using the lexicographically smallest `2L-1` machines.
fn decode_group(
    group: usize,
    results: &BTreeMap<MachineId, &FieldMatrix>,
    params: &SystemParams,
    macs: &mut u64,
) -> Result<FieldMatrix> {
    let needed = params.threshold();
    if results.len() < needed {
        return Err(Error::DecodeFailure {
            group,
            survivors: results.len(),
            needed,
        });
    }
    let chosen: Vec<(FieldElement, &FieldMatrix)> = results
        .iter()
        .take(needed)
        .map(|(m, p)| (params.alpha(*m), *p))
        .collect();
    let shape = chosen[0].1.shape();
    let mut acc = FieldMatrix::zeros(params.field, shape.0, shape.1);
    for &beta in params.points.betas() {
        let term = lagrange::interpolate_eval(&chosen, needed - 1, beta)?;
        *macs += (needed * term.len()) as u64;
        acc.scale_add_assign(&term, 1)?;
    }
    Ok(acc)
}

/// Indexes results by group, dropping stragglers and results from machines
/// outside the group.
fn collect_survivors<'a>(
    results: &'a [TaskResult],
    assignment: &Assignment,
    stragglers: &[MachineId],
) -> Result<Vec<BTreeMap<MachineId, &'a FieldMatrix>>> {
    let slow: BTreeSet<_> = stragglers.iter().copied().collect();
    let mut by_group = vec![BTreeMap::new(); assignment.group_count()];
    for r in results {
        if slow.contains(&r.machine) {
            continue;
        }
        let Some(members) = assignment.groups().get(r.group) else {
            return Err(Error::InvalidAssignment(format!(
                "result for unknown group {}",
                r.group
            )));
        };
        if !members.contains(&r.machine) {
            continue;
        }
        if by_group[r.group].insert(r.machine, &r.product).is_some() {
            return Err(Error::DimensionMismatch(format!(
                "duplicate result from {} for group {}",
                r.machine, r.group
            )));
        }
    }
    Ok(by_group)
}

/// Pads and splits `m` into `parts` equal blocks along `axis`.
fn equal_blocks(m: &FieldMatrix, axis: Axis, parts: usize) -> Result<Vec<FieldMatrix>> {
    let extent = match axis {
        Axis::Row => m.rows(),
        Axis::Column => m.cols(),
    };
    m.split(&BlockPartition::equal(axis, extent, parts)?)
}

/// Output of a full step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub product: FieldMatrix,
    pub layout: Layout,
    pub counters: Counters,
}

/// Runs all four phases for the machines `nt`, ignoring `stragglers`.
pub fn run(
    scheme: Scheme,
    a: &FieldMatrix,
    b: &FieldMatrix,
    params: &SystemParams,
    nt: &[MachineId],
    assignment: &Assignment,
    stragglers: &[MachineId],
) -> Result<StepOutput> {
    let mut counters = Counters::default();
    let (product, layout) = match scheme {
        Scheme::Lcc => {
            let layout = Layout::new(Scheme::Lcc, params.dims, params.l, None)?;
            let slow: BTreeSet<_> = stragglers.iter().collect();
            let responding: Vec<_> = nt.iter().copied().filter(|m| !slow.contains(m)).collect();
            let storage = lcc::place_storage(a, params, nt, &mut counters)?;
            let downloads = lcc::download(b, params, nt, &mut counters)?;
            let results = lcc::compute(&storage, &downloads, &mut counters)?;
            let product = lcc::decode(&results, params, &responding, &mut counters)?;
            (product, layout)
        }
        Scheme::One => {
            let layout = Layout::new(Scheme::One, params.dims, params.l, Some(assignment))?;
            let storage = one::place_storage(a, params, nt, &mut counters)?;
            let downloads = one::downloads(b, assignment, params, &layout, &mut counters)?;
            let results = one::compute(&storage, &downloads, &mut counters)?;
            let product = one::decode(
                &results,
                assignment,
                params,
                &layout,
                stragglers,
                &mut counters,
            )?;
            (product, layout)
        }
        Scheme::Two => {
            let layout = Layout::new(Scheme::Two, params.dims, params.l, Some(assignment))?;
            let storage = two::place_storage(a, assignment, params, &layout, &mut counters)?;
            let downloads = two::download(b, params, nt, &mut counters)?;
            let results = two::compute(&storage, &downloads, &mut counters)?;
            let product = two::decode(
                &results,
                assignment,
                params,
                &layout,
                stragglers,
                &mut counters,
            )?;
            (product, layout)
        }
    };
    counters.retain(nt);
    Ok(StepOutput {
        product,
        layout,
        counters,
    })
}

/// Plain product, the reference every decode is checked against.
pub fn reference_product(a: &FieldMatrix, b: &FieldMatrix) -> Result<FieldMatrix> {
    a.matmul(b)
}
