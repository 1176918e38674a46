//! Scheme 1: coded storage `V(alpha_n)`, download split column-wise.
//!
//! Each `B_l` is cut into column blocks `B_{l,g}` of width `r * gamma_g`; the
//! polynomial `U_g` interpolates `B_{1,g}, ..., B_{L,g}` and machine `n`
//! downloads `U_g(alpha_n)` for every group it belongs to. Group `g`'s block
//! of the product, `sum_l A_l B_{l,g}`, is `sum_l V(beta_l) U_g(beta_l)`.

use std::collections::BTreeMap;

use super::{
    collect_survivors, decode_group, encode_counted, equal_blocks, lcc, product_counted, Counters,
    DownloadShare, Layout, Part, Scheme, StoredShare, SystemParams, TaskResult,
};
use crate::assignment::{validate, Assignment, MachineId};
use crate::error::{Error, Result};
use crate::matrix::{Axis, FieldMatrix};

/// One share `V(alpha_n)` of shape `q x v/L` per listed machine.
pub fn place_storage(
    a: &FieldMatrix,
    params: &SystemParams,
    machines: &[MachineId],
    counters: &mut Counters,
) -> Result<Vec<StoredShare>> {
    lcc::place_storage(a, params, machines, counters)
}

/// `U_g(alpha_n)` for every membership `n in M_g`.
pub fn downloads(
    b: &FieldMatrix,
    assignment: &Assignment,
    params: &SystemParams,
    layout: &Layout,
    counters: &mut Counters,
) -> Result<Vec<DownloadShare>> {
    params.check_b(b)?;
    if layout.scheme != Scheme::One {
        return Err(Error::InvalidPartition("layout is not for scheme 1".into()));
    }
    let all: Vec<MachineId> = assignment.groups().iter().flatten().copied().collect();
    validate(assignment, &dedup(all), params.l, params.s)
        .map_err(|v| Error::InvalidAssignment(v.to_string()))?;
    let padded = b.pad_to(layout.padded.v, layout.padded.r)?;
    let rows = equal_blocks(&padded, Axis::Row, params.l)?;
    let mut out = Vec::new();
    for (g, members) in assignment.groups().iter().enumerate() {
        let range = layout.group_ranges[g].clone();
        let sub: Vec<FieldMatrix> = rows
            .iter()
            .map(|bl| bl.slice_cols(range.clone()))
            .collect::<Result<_>>()?;
        for &m in members {
            let c = counters.machine(m);
            let block = encode_counted(&sub, &params.points, params.alpha(m), &mut c.encode_macs)?;
            c.downloaded += block.len() as u64;
            out.push(DownloadShare {
                machine: m,
                part: Part::Group {
                    g,
                    range: range.clone(),
                },
                block,
            });
        }
    }
    Ok(out)
}

fn dedup(mut v: Vec<MachineId>) -> Vec<MachineId> {
    v.sort();
    v.dedup();
    v
}

/// `A~_n B~_{n,g}` for every downloaded share.
pub fn compute(
    storage: &[StoredShare],
    downloads: &[DownloadShare],
    counters: &mut Counters,
) -> Result<Vec<TaskResult>> {
    let stored: BTreeMap<_, _> = storage
        .iter()
        .filter(|s| s.part == Part::Whole)
        .map(|s| (s.machine, &s.block))
        .collect();
    downloads
        .iter()
        .map(|d| {
            let g = d.part.group().ok_or_else(|| {
                Error::DimensionMismatch("scheme 1 download without group".into())
            })?;
            let a = stored.get(&d.machine).ok_or_else(|| {
                Error::DimensionMismatch(format!("machine {} has no stored share", d.machine))
            })?;
            let product = product_counted(a, &d.block, counters.machine(d.machine))?;
            Ok(TaskResult {
                machine: d.machine,
                group: g,
                product,
            })
        })
        .collect()
}

/// Decodes every group from its non-straggling members and concatenates the
/// blocks column-wise.
pub fn decode(
    results: &[TaskResult],
    assignment: &Assignment,
    params: &SystemParams,
    layout: &Layout,
    stragglers: &[MachineId],
    counters: &mut Counters,
) -> Result<FieldMatrix> {
    let blocks = decode_blocks(results, assignment, params, layout, stragglers, counters)?;
    FieldMatrix::concat(&blocks, Axis::Column)?.trim(params.dims.q, params.dims.r)
}

/// Per-group decoded blocks `sum_l A_l B_{l,g}`, before concatenation.
pub fn decode_blocks(
    results: &[TaskResult],
    assignment: &Assignment,
    params: &SystemParams,
    layout: &Layout,
    stragglers: &[MachineId],
    counters: &mut Counters,
) -> Result<Vec<FieldMatrix>> {
    let by_group = collect_survivors(results, assignment, stragglers)?;
    by_group
        .iter()
        .enumerate()
        .map(|(g, survivors)| {
            let block = decode_group(g, survivors, params, &mut counters.decode_macs)?;
            let want = (layout.padded.q, layout.group_ranges[g].len());
            if block.shape() != want {
                return Err(Error::DimensionMismatch(format!(
                    "group {g} decoded to {:?}, expected {want:?}",
                    block.shape()
                )));
            }
            Ok(block)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::machines;
    use crate::field::PrimeField;
    use crate::rational::{frac, int, Rational};
    use crate::scheme::Dims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        p: SystemParams,
        a: FieldMatrix,
        b: FieldMatrix,
        nt: Vec<MachineId>,
        asg: Assignment,
        layout: Layout,
    }

    fn fixture(n: usize, l: usize, s: usize, dims: Dims, seed: u64) -> Fixture {
        let f = PrimeField::new(1993).unwrap();
        let p = SystemParams::new(n, l, s, 0, f, dims).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = FieldMatrix::random(f, dims.q, dims.v, &mut rng);
        let b = FieldMatrix::random(f, dims.v, dims.r, &mut rng);
        let nt = p.machines();
        let asg = Assignment::cyclic(&nt, l, s).unwrap();
        let layout = Layout::new(Scheme::One, dims, l, Some(&asg)).unwrap();
        Fixture {
            p,
            a,
            b,
            nt,
            asg,
            layout,
        }
    }

    fn run(fx: &Fixture, stragglers: &[MachineId], c: &mut Counters) -> Result<FieldMatrix> {
        let st = place_storage(&fx.a, &fx.p, &fx.nt, c)?;
        let dl = downloads(&fx.b, &fx.asg, &fx.p, &fx.layout, c)?;
        let res = compute(&st, &dl, c)?;
        decode(&res, &fx.asg, &fx.p, &fx.layout, stragglers, c)
    }

    #[test]
    fn storage_is_one_lth_of_a() {
        let fx = fixture(6, 3, 0, Dims::new(4, 9, 6), 1);
        let mut c = Counters::default();
        let st = place_storage(&fx.a, &fx.p, &fx.nt, &mut c).unwrap();
        assert_eq!(st.len(), 6);
        let total: usize = st.iter().map(|s| s.block.len()).sum();
        assert_eq!(Rational::new(total as i128, 36), frac(6, 3));
        assert!(st.iter().all(|s| s.block.shape() == (4, 3)));
    }

    #[test]
    fn download_shapes_and_sizes() {
        let fx = fixture(6, 2, 1, Dims::new(12, 12, 12), 4);
        let mut c = Counters::default();
        let dl = downloads(&fx.b, &fx.asg, &fx.p, &fx.layout, &mut c).unwrap();
        assert_eq!(dl.len(), 6 * 4);
        assert!(dl.iter().all(|d| d.block.shape() == (6, 2)));
        // vr(2L+S-1)/(L N_t) = 144 * 4 / 12
        for m in &fx.nt {
            assert_eq!(c.per_machine[m].downloaded, 48);
        }
    }

    #[test]
    fn decodes_without_stragglers() {
        let fx = fixture(5, 2, 0, Dims::new(3, 4, 5), 7);
        let mut c = Counters::default();
        assert_eq!(run(&fx, &[], &mut c).unwrap(), fx.a.matmul(&fx.b).unwrap());
    }

    #[test]
    fn decodes_under_every_straggler_pair() {
        let fx = fixture(7, 2, 2, Dims::new(4, 4, 7), 8);
        let expected = fx.a.matmul(&fx.b).unwrap();
        for i in 0..7 {
            for j in i + 1..7 {
                let mut c = Counters::default();
                assert_eq!(run(&fx, &machines([i, j]), &mut c).unwrap(), expected);
            }
        }
    }

    #[test]
    fn too_many_stragglers_in_a_group() {
        let fx = fixture(5, 2, 1, Dims::square(4), 3);
        let mut c = Counters::default();
        // Group 0 is {n1..n4}; losing two of them leaves two survivors.
        let err = run(&fx, &machines([0, 1]), &mut c).unwrap_err();
        assert!(matches!(
            err,
            Error::DecodeFailure {
                survivors: 2,
                needed: 3,
                ..
            }
        ));
    }

    #[test]
    fn zero_fraction_group_is_empty() {
        let f = PrimeField::new(1993).unwrap();
        let dims = Dims::new(2, 2, 4);
        let p = SystemParams::new(3, 1, 1, 0, f, dims).unwrap();
        let nt = p.machines();
        let asg = Assignment::new(
            vec![int(0), frac(1, 2), frac(1, 2)],
            vec![machines([0, 1]), machines([1, 2]), machines([2, 0])],
            &nt,
            1,
            1,
        )
        .unwrap();
        let layout = Layout::new(Scheme::One, dims, 1, Some(&asg)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = FieldMatrix::random(f, 2, 2, &mut rng);
        let b = FieldMatrix::random(f, 2, 4, &mut rng);
        let mut c = Counters::default();
        let dl = downloads(&b, &asg, &p, &layout, &mut c).unwrap();
        assert!(dl
            .iter()
            .filter(|d| d.part.group() == Some(0))
            .all(|d| d.block.is_empty()));
        let st = place_storage(&a, &p, &nt, &mut c).unwrap();
        let res = compute(&st, &dl, &mut c).unwrap();
        assert_eq!(
            decode(&res, &asg, &p, &layout, &[MachineId(1)], &mut c).unwrap(),
            a.matmul(&b).unwrap()
        );
    }

    #[test]
    fn machine_outside_every_group_has_no_results() {
        let f = PrimeField::new(1993).unwrap();
        let dims = Dims::square(2);
        let p = SystemParams::new(4, 1, 0, 0, f, dims).unwrap();
        let nt = p.machines();
        let asg = Assignment::new(vec![int(1)], vec![machines([1])], &nt, 1, 0).unwrap();
        let layout = Layout::new(Scheme::One, dims, 1, Some(&asg)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = FieldMatrix::random(f, 2, 2, &mut rng);
        let b = FieldMatrix::random(f, 2, 2, &mut rng);
        let mut c = Counters::default();
        let st = place_storage(&a, &p, &nt, &mut c).unwrap();
        let dl = downloads(&b, &asg, &p, &layout, &mut c).unwrap();
        let res = compute(&st, &dl, &mut c).unwrap();
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].machine, MachineId(1));
    }

    #[test]
    fn results_are_coded_products() {
        let fx = fixture(5, 2, 0, Dims::new(2, 4, 5), 12);
        let mut c = Counters::default();
        let st = place_storage(&fx.a, &fx.p, &fx.nt, &mut c).unwrap();
        let dl = downloads(&fx.b, &fx.asg, &fx.p, &fx.layout, &mut c).unwrap();
        let res = compute(&st, &dl, &mut c).unwrap();
        for (r, d) in res.iter().zip(&dl) {
            assert_eq!(r.product, st[r.machine.0].block.matmul(&d.block).unwrap());
            assert_eq!(r.product.shape(), (2, 1));
        }
        // Arrival order does not matter.
        let mut rev = res.clone();
        rev.reverse();
        assert_eq!(
            decode(&rev, &fx.asg, &fx.p, &fx.layout, &[], &mut c).unwrap(),
            decode(&res, &fx.asg, &fx.p, &fx.layout, &[], &mut c).unwrap()
        );
    }
}
