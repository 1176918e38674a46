//! Elasticity across time steps: availability realizations, union storage
//! placement, and per-step execution on whichever machines are available.
//!
//! With up to `P` machines preempted, the available set at any step is one of
//! the realizations `{ N' ⊆ [N] : N - P <= |N'| <= N }`. Every machine stores
//! the union of what the scheme would place on it across all realizations,
//! so any realization can run without moving stored data.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::assignment::{Assignment, AssignmentRule, MachineId};
use crate::cost::CostReport;
use crate::error::{Error, Result};
use crate::matrix::FieldMatrix;
use crate::rational::{int, lcm_of_denominators, Rational};
use crate::scheme::{
    self, lcc, one, two, Counters, Layout, Part, Scheme, StoredShare, SystemParams,
};

pub const DEFAULT_ENUMERATION_CAP: usize = 100_000;

/// `C(n, k)` as an exact big integer.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `|N_P| = C(N,0) + C(N,1) + ... + C(N,P)`.
pub fn realization_count(n: usize, p: usize) -> BigUint {
    (0..=p.min(n)).map(|i| binomial(n, i)).sum()
}

/// All `k`-subsets of `0..n`, lexicographic.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AvailabilityRealization {
    available: Vec<MachineId>,
}

impl AvailabilityRealization {
    /// Checks `N - P <= |available| <= N` and that ids lie in `[N]`.
    pub fn new(available: impl IntoIterator<Item = MachineId>, n: usize, p: usize) -> Result<Self> {
        let set: BTreeSet<MachineId> = available.into_iter().collect();
        if let Some(m) = set.iter().find(|m| m.0 >= n) {
            return Err(Error::InvalidRealization(format!("{m} is not in [{n}]")));
        }
        if set.len() + p < n {
            return Err(Error::InvalidRealization(format!(
                "{} available machines, at least N-P = {} required",
                set.len(),
                n.saturating_sub(p)
            )));
        }
        Ok(Self {
            available: set.into_iter().collect(),
        })
    }

    pub fn full(n: usize) -> Self {
        Self {
            available: (0..n).map(MachineId).collect(),
        }
    }

    pub fn available(&self) -> &[MachineId] {
        &self.available
    }

    pub fn len(&self) -> usize {
        self.available.len()
    }

    pub fn is_empty(&self) -> bool {
        self.available.is_empty()
    }
}

/// Every realization, largest first, lexicographic within a size.
pub fn enumerate_realizations(
    n: usize,
    p: usize,
    cap: usize,
) -> Result<Vec<AvailabilityRealization>> {
    let count = realization_count(n, p);
    if count > BigUint::from(cap) {
        return Err(Error::RealizationSpaceTooLarge {
            count: count.to_string(),
            cap,
        });
    }
    let mut out = Vec::with_capacity(count.to_usize().unwrap_or(0));
    for missing in 0..=p.min(n) {
        for subset in combinations(n, n - missing) {
            out.push(AvailabilityRealization {
                available: subset.into_iter().map(MachineId).collect(),
            });
        }
    }
    Ok(out)
}

/// Storage of every machine after taking the union over all realizations.
#[derive(Debug, Clone)]
pub struct UnionStorage {
    pub scheme: Scheme,
    pub rule: AssignmentRule,
    /// Deduplicated shares per machine.
    pub per_machine: BTreeMap<MachineId, Vec<StoredShare>>,
    /// Elements placed before deduplication.
    pub raw_elements: BTreeMap<MachineId, u64>,
    pub realizations: usize,
    /// Padding multiple of the split axis shared by all realizations.
    pub split_multiple: u128,
    padded_size: u64,
}

impl UnionStorage {
    pub fn elements(&self, m: MachineId) -> u64 {
        self.per_machine
            .get(&m)
            .map_or(0, |v| v.iter().map(|s| s.block.len() as u64).sum())
    }

    /// Deduplicated storage of `m` as a fraction of the (padded) size of `A`.
    pub fn fraction(&self, m: MachineId) -> Rational {
        int(self.elements(m) as i128) / int(self.padded_size as i128)
    }

    /// Storage fraction counting every realization's placement separately.
    pub fn raw_fraction(&self, m: MachineId) -> Rational {
        int(*self.raw_elements.get(&m).unwrap_or(&0) as i128) / int(self.padded_size as i128)
    }

    fn whole_share(&self, m: MachineId) -> Result<&StoredShare> {
        self.per_machine
            .get(&m)
            .and_then(|v| v.iter().find(|s| s.part == Part::Whole))
            .ok_or_else(|| Error::InvalidRealization(format!("{m} has no stored share")))
    }

    fn group_share(&self, m: MachineId, range: &std::ops::Range<usize>) -> Result<&StoredShare> {
        self.per_machine
            .get(&m)
            .and_then(|v| {
                v.iter()
                    .find(|s| matches!(&s.part, Part::Group { range: r, .. } if r == range))
            })
            .ok_or_else(|| {
                Error::InvalidRealization(format!("{m} has no share for rows {range:?}"))
            })
    }
}

fn assignment_for(
    rule: AssignmentRule,
    params: &SystemParams,
    nt: &[MachineId],
) -> Result<Assignment> {
    Assignment::build(rule, nt, &params.speeds_of(nt), params.l, params.s)
}

pub fn build_union_storage(
    a: &FieldMatrix,
    params: &SystemParams,
    scheme: Scheme,
    rule: AssignmentRule,
    cap: usize,
) -> Result<UnionStorage> {
    let realizations = enumerate_realizations(params.n, params.p, cap)?;
    let all = params.machines();
    let mut per_machine: BTreeMap<MachineId, Vec<StoredShare>> = BTreeMap::new();
    let mut raw_elements = BTreeMap::new();
    let mut counters = Counters::default();

    let (split_multiple, padded_size) = match scheme {
        Scheme::Lcc | Scheme::One => {
            // Placement does not depend on the realization.
            let shares = lcc::place_storage(a, params, &all, &mut counters)?;
            let v = params.dims.v.div_ceil(params.l) * params.l;
            for s in shares {
                *raw_elements.entry(s.machine).or_insert(0) +=
                    s.block.len() as u64 * realizations.len() as u64;
                per_machine.entry(s.machine).or_default().push(s);
            }
            (1, (params.dims.q * v) as u64)
        }
        Scheme::Two => {
            let assignments: Vec<Assignment> = realizations
                .iter()
                .map(|r| assignment_for(rule, params, r.available()))
                .collect::<Result<_>>()?;
            let multiple = assignments.iter().fold(1i128, |acc, asg| {
                acc.lcm(&lcm_of_denominators(asg.gammas()))
            });
            let mut seen: BTreeSet<(MachineId, usize, usize)> = BTreeSet::new();
            let mut padded = None;
            for (idx, asg) in assignments.iter().enumerate() {
                let layout = Layout::with_split_multiple(
                    Scheme::Two,
                    params.dims,
                    params.l,
                    Some(asg),
                    multiple as u128,
                )?;
                padded = Some(layout.padded);
                let shares = two::place_storage(a, asg, params, &layout, &mut counters)?;
                for mut s in shares {
                    *raw_elements.entry(s.machine).or_insert(0) += s.block.len() as u64;
                    let Part::Group { range, .. } = &s.part else {
                        unreachable!("scheme 2 shares are per group")
                    };
                    if seen.insert((s.machine, range.start, range.end)) {
                        s.realization = Some(idx);
                        per_machine.entry(s.machine).or_default().push(s);
                    }
                }
            }
            let padded = padded.expect("at least the full realization exists");
            (multiple as u128, (padded.q * padded.v) as u64)
        }
    };
    Ok(UnionStorage {
        scheme,
        rule,
        per_machine,
        raw_elements,
        realizations: realizations.len(),
        split_multiple,
        padded_size,
    })
}

/// Download, compute and decode on `realization` using only stored shares.
/// The returned costs are per-machine averages over the available machines,
/// with storage taken from the union placement.
pub fn run_step(
    storage: &UnionStorage,
    b: &FieldMatrix,
    realization: &AvailabilityRealization,
    params: &SystemParams,
    stragglers: &[MachineId],
) -> Result<(FieldMatrix, CostReport)> {
    let realization =
        AvailabilityRealization::new(realization.available().iter().copied(), params.n, params.p)?;
    let nt = realization.available();
    let slow: Vec<MachineId> = stragglers
        .iter()
        .copied()
        .filter(|m| nt.contains(m))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if slow.len() > params.s {
        return Err(Error::InvalidParameter(format!(
            "{} stragglers among available machines, at most S = {}",
            slow.len(),
            params.s
        )));
    }
    let asg = assignment_for(storage.rule, params, nt)?;
    let mut counters = Counters::default();
    let product = match storage.scheme {
        Scheme::Lcc => {
            let shares: Vec<StoredShare> = nt
                .iter()
                .map(|&m| storage.whole_share(m).cloned())
                .collect::<Result<_>>()?;
            let downloads = lcc::download(b, params, nt, &mut counters)?;
            let results = lcc::compute(&shares, &downloads, &mut counters)?;
            let responding: Vec<_> = nt.iter().copied().filter(|m| !slow.contains(m)).collect();
            lcc::decode(&results, params, &responding, &mut counters)?
        }
        Scheme::One => {
            let layout = Layout::new(Scheme::One, params.dims, params.l, Some(&asg))?;
            let shares: Vec<StoredShare> = nt
                .iter()
                .map(|&m| storage.whole_share(m).cloned())
                .collect::<Result<_>>()?;
            let downloads = one::downloads(b, &asg, params, &layout, &mut counters)?;
            let results = one::compute(&shares, &downloads, &mut counters)?;
            one::decode(&results, &asg, params, &layout, &slow, &mut counters)?
        }
        Scheme::Two => {
            let layout = Layout::with_split_multiple(
                Scheme::Two,
                params.dims,
                params.l,
                Some(&asg),
                storage.split_multiple,
            )?;
            let mut shares = Vec::new();
            for (g, members) in asg.groups().iter().enumerate() {
                let range = layout.group_ranges[g].clone();
                for &m in members {
                    let stored = storage.group_share(m, &range)?;
                    shares.push(StoredShare {
                        machine: m,
                        realization: stored.realization,
                        part: Part::Group {
                            g,
                            range: range.clone(),
                        },
                        block: stored.block.clone(),
                    });
                }
            }
            let downloads = two::download(b, params, nt, &mut counters)?;
            let results = two::compute(&shares, &downloads, &mut counters)?;
            two::decode(&results, &asg, params, &layout, &slow, &mut counters)?
        }
    };
    for &m in nt {
        counters.machine(m).stored = storage.elements(m);
    }
    let mut report = CostReport::measured(&counters, params.dims, nt);
    let total: Rational = nt.iter().map(|&m| storage.fraction(m)).sum();
    report.storage_fraction = total / int(nt.len() as i128);
    Ok((product, report))
}

/// Convenience wrapper around [`scheme::reference_product`] for callers that
/// hold the union storage and the original `A`.
pub fn expected_product(a: &FieldMatrix, b: &FieldMatrix) -> Result<FieldMatrix> {
    scheme::reference_product(a, b)
}
