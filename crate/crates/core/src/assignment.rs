//! Computation assignments `(gamma, M)`.
//!
//! An assignment over the available machines splits the coded task into `G`
//! fractions `gamma_g` (summing to one) and gives each fraction to a group
//! `M_g` of exactly `2L + S - 1` distinct machines, so that any `2L - 1` of
//! them suffice to decode and up to `S` may straggle.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{int, Rational};

/// Index of a machine in `[N]`, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MachineId(pub usize);

impl fmt::Display for MachineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0 + 1)
    }
}

pub fn machines(ids: impl IntoIterator<Item = usize>) -> Vec<MachineId> {
    ids.into_iter().map(MachineId).collect()
}

/// Group size `2L + S - 1`.
pub fn recovery_group_size(l: usize, s: usize) -> usize {
    2 * l + s - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentRule {
    Cyclic,
    Heterogeneous,
}

impl fmt::Display for AssignmentRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssignmentRule::Cyclic => "cyclic",
            AssignmentRule::Heterogeneous => "heterogeneous",
        })
    }
}

impl std::str::FromStr for AssignmentRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cyclic" => Ok(Self::Cyclic),
            "heterogeneous" => Ok(Self::Heterogeneous),
            _ => Err(Error::InvalidParameter(format!("unknown assignment {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    gammas: Vec<Rational>,
    groups: Vec<Vec<MachineId>>,
    recovery_group_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineLoad {
    pub machine: MachineId,
    pub load: Rational,
}

/// First broken rule of an assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    GroupCountMismatch {
        gammas: usize,
        groups: usize,
    },
    FractionOutOfRange {
        group: usize,
        gamma: Rational,
    },
    FractionsDoNotSumToOne {
        sum: Rational,
    },
    WrongGroupSize {
        group: usize,
        size: usize,
        expected: usize,
    },
    RepeatedMachine {
        group: usize,
        machine: MachineId,
    },
    UnavailableMachine {
        group: usize,
        machine: MachineId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::GroupCountMismatch { gammas, groups } => {
                write!(f, "{gammas} fractions but {groups} groups")
            }
            Violation::FractionOutOfRange { group, gamma } => {
                write!(f, "gamma of group {group} is {gamma}, outside [0, 1]")
            }
            Violation::FractionsDoNotSumToOne { sum } => {
                write!(f, "fractions sum to {sum}, not 1")
            }
            Violation::WrongGroupSize {
                group,
                size,
                expected,
            } => write!(f, "group {group} has {size} machines, expected {expected}"),
            Violation::RepeatedMachine { group, machine } => {
                write!(f, "machine {machine} repeated in group {group}")
            }
            Violation::UnavailableMachine { group, machine } => {
                write!(f, "group {group} uses unavailable machine {machine}")
            }
        }
    }
}

fn check_feasible(nt: &[MachineId], l: usize, s: usize) -> Result<usize> {
    if l == 0 {
        return Err(Error::Infeasible("L must be at least 1".into()));
    }
    let k = recovery_group_size(l, s);
    if nt.len() < k {
        return Err(Error::Infeasible(format!(
            "{} available machines, 2L+S-1 = {k} required",
            nt.len()
        )));
    }
    let distinct: BTreeSet<_> = nt.iter().collect();
    if distinct.len() != nt.len() {
        return Err(Error::Infeasible("machine list has duplicates".into()));
    }
    Ok(k)
}

impl Assignment {
    /// Builds and validates an assignment from explicit parts.
    pub fn new(
        gammas: Vec<Rational>,
        groups: Vec<Vec<MachineId>>,
        nt: &[MachineId],
        l: usize,
        s: usize,
    ) -> Result<Self> {
        let a = Self {
            gammas,
            groups,
            recovery_group_size: recovery_group_size(l, s),
        };
        validate(&a, nt, l, s).map_err(|v| Error::InvalidAssignment(v.to_string()))?;
        Ok(a)
    }

    /// Builds without validation, for fault-injection tests.
    pub fn new_unchecked(
        gammas: Vec<Rational>,
        groups: Vec<Vec<MachineId>>,
        l: usize,
        s: usize,
    ) -> Self {
        Self {
            gammas,
            groups,
            recovery_group_size: recovery_group_size(l, s),
        }
    }

    /// Uniform fractions with sliding windows of width `2L+S-1` over `nt`.
    pub fn cyclic(nt: &[MachineId], l: usize, s: usize) -> Result<Self> {
        let k = check_feasible(nt, l, s)?;
        let g = nt.len();
        let groups = (0..g)
            .map(|start| (0..k).map(|j| nt[(start + j) % g]).collect())
            .collect();
        Ok(Self {
            gammas: vec![Rational::new(1, g as i128); g],
            groups,
            recovery_group_size: k,
        })
    }

    /// Speed-proportional loads capped at one, laid out as groups.
    ///
    /// The loads are stacked end to end along `2L+S-1` unit columns; every
    /// horizontal slice between consecutive load boundaries crosses each
    /// column in exactly one machine and becomes a group whose fraction is
    /// the slice height.
    pub fn heterogeneous(
        nt: &[MachineId],
        speeds: &[Rational],
        l: usize,
        s: usize,
    ) -> Result<Self> {
        let k = check_feasible(nt, l, s)?;
        if speeds.len() != nt.len() {
            return Err(Error::InvalidParameter(format!(
                "{} speeds for {} machines",
                speeds.len(),
                nt.len()
            )));
        }
        let loads = water_fill(speeds, k)?;

        let mut order: Vec<usize> = (0..nt.len()).collect();
        order.sort_by(|&a, &b| loads[b].cmp(&loads[a]).then(nt[a].cmp(&nt[b])));

        // Start offset of each machine's segment along [0, k).
        let mut starts = Vec::with_capacity(order.len());
        let mut pos = Rational::zero();
        for &i in &order {
            starts.push(pos);
            pos += loads[i];
        }
        debug_assert_eq!(pos, int(k as i128));

        let mut cuts: Vec<Rational> = starts.iter().map(|x| x.fract()).collect();
        cuts.push(Rational::one());
        cuts.sort();
        cuts.dedup();

        let mut gammas = Vec::new();
        let mut groups = Vec::new();
        for w in cuts.windows(2) {
            let height = w[1] - w[0];
            if height.is_zero() {
                continue;
            }
            let mid = (w[0] + w[1]) / int(2);
            let group = (0..k)
                .map(|col| {
                    let at = int(col as i128) + mid;
                    // Last segment starting at or before `at`.
                    let idx = starts.partition_point(|s| *s <= at) - 1;
                    nt[order[idx]]
                })
                .collect();
            gammas.push(height);
            groups.push(group);
        }
        Ok(Self {
            gammas,
            groups,
            recovery_group_size: k,
        })
    }

    pub fn build(
        rule: AssignmentRule,
        nt: &[MachineId],
        speeds: &[Rational],
        l: usize,
        s: usize,
    ) -> Result<Self> {
        match rule {
            AssignmentRule::Cyclic => Self::cyclic(nt, l, s),
            AssignmentRule::Heterogeneous => Self::heterogeneous(nt, speeds, l, s),
        }
    }

    pub fn gammas(&self) -> &[Rational] {
        &self.gammas
    }

    pub fn groups(&self) -> &[Vec<MachineId>] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn recovery_group_size(&self) -> usize {
        self.recovery_group_size
    }

    /// Groups containing `machine`, in group order.
    pub fn groups_of(&self, machine: MachineId) -> impl Iterator<Item = usize> + '_ {
        self.groups
            .iter()
            .enumerate()
            .filter(move |(_, m)| m.contains(&machine))
            .map(|(g, _)| g)
    }
}

/// Loads `min(1, tau * s_n)` with `tau` solving `sum_n min(1, tau * s_n) = k`.
///
/// Sorting speeds in descending order, if the fastest `j` machines saturate
/// then `tau = (k - j) / sum of the remaining speeds`; the first `j` whose
/// next machine stays unsaturated is the solution.
pub fn water_fill(speeds: &[Rational], k: usize) -> Result<Vec<Rational>> {
    if speeds.iter().any(|s| *s <= Rational::zero()) {
        return Err(Error::InvalidParameter("speeds must be positive".into()));
    }
    if speeds.len() < k {
        return Err(Error::Infeasible(format!(
            "{} machines cannot carry total load {k}",
            speeds.len()
        )));
    }
    let mut sorted = speeds.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    let mut rest: Rational = sorted.iter().copied().sum();
    let mut tau = None;
    for (j, &sj) in sorted.iter().enumerate() {
        let t = int((k - j) as i128) / rest;
        if t * sj <= Rational::one() {
            tau = Some(t);
            break;
        }
        rest -= sj;
    }
    // k <= len guarantees termination at j = k - 1 at the latest.
    let tau = tau.expect("water-filling level exists when k <= N_t");
    Ok(speeds
        .iter()
        .map(|&s| (tau * s).min(Rational::one()))
        .collect())
}

pub fn validate(a: &Assignment, nt: &[MachineId], l: usize, s: usize) -> Result<(), Violation> {
    if a.gammas.len() != a.groups.len() {
        return Err(Violation::GroupCountMismatch {
            gammas: a.gammas.len(),
            groups: a.groups.len(),
        });
    }
    for (g, gamma) in a.gammas.iter().enumerate() {
        if *gamma < Rational::zero() || *gamma > Rational::one() {
            return Err(Violation::FractionOutOfRange {
                group: g,
                gamma: *gamma,
            });
        }
    }
    let sum: Rational = a.gammas.iter().copied().sum();
    if sum != Rational::one() {
        return Err(Violation::FractionsDoNotSumToOne { sum });
    }
    let expected = recovery_group_size(l, s);
    let available: BTreeSet<_> = nt.iter().copied().collect();
    for (g, members) in a.groups.iter().enumerate() {
        if members.len() != expected {
            return Err(Violation::WrongGroupSize {
                group: g,
                size: members.len(),
                expected,
            });
        }
        let mut seen = BTreeSet::new();
        for &m in members {
            if !seen.insert(m) {
                return Err(Violation::RepeatedMachine {
                    group: g,
                    machine: m,
                });
            }
            if !available.contains(&m) {
                return Err(Violation::UnavailableMachine {
                    group: g,
                    machine: m,
                });
            }
        }
    }
    Ok(())
}

/// Per-machine load `sum of gamma_g over groups containing n`, in `nt` order.
pub fn loads(a: &Assignment, nt: &[MachineId]) -> Vec<MachineLoad> {
    nt.iter()
        .map(|&machine| MachineLoad {
            machine,
            load: a.groups_of(machine).map(|g| a.gammas[g]).sum(),
        })
        .collect()
}
