//! Scheme 2: storage split row-wise, coded download `U(alpha_n)`.
//!
//! Each `A_l` is cut into row blocks `A_{l,g}` of height `q * gamma_g`; the
//! polynomial `V_g` interpolates `A_{1,g}, ..., A_{L,g}` and machine `n`
//! stores `V_g(alpha_n)` for every group it belongs to. Group `g`'s block of
//! the product, `sum_l A_{l,g} B_l`, is `sum_l V_g(beta_l) U(beta_l)`.

use std::collections::BTreeMap;

use super::{
    collect_survivors, decode_group, encode_counted, equal_blocks, lcc, product_counted, Counters,
    DownloadShare, Layout, Part, Scheme, StoredShare, SystemParams, TaskResult,
};
use crate::assignment::{Assignment, MachineId};
use crate::error::{Error, Result};
use crate::matrix::{Axis, FieldMatrix};

/// Row blocks `A_{l,g}` of the padded `A`, indexed `[g][l]`.
pub fn split_a(a: &FieldMatrix, layout: &Layout, l: usize) -> Result<Vec<Vec<FieldMatrix>>> {
    let padded = a.pad_to(layout.padded.q, layout.padded.v)?;
    let cols = equal_blocks(&padded, Axis::Column, l)?;
    layout
        .group_ranges
        .iter()
        .map(|range| cols.iter().map(|al| al.slice_rows(range.clone())).collect())
        .collect()
}

/// `V_g(alpha_n)` for every membership `n in M_g`.
pub fn place_storage(
    a: &FieldMatrix,
    assignment: &Assignment,
    params: &SystemParams,
    layout: &Layout,
    counters: &mut Counters,
) -> Result<Vec<StoredShare>> {
    params.check_a(a)?;
    if layout.scheme != Scheme::Two || layout.group_ranges.len() != assignment.group_count() {
        return Err(Error::InvalidPartition(
            "layout does not match the scheme 2 assignment".into(),
        ));
    }
    let blocks = split_a(a, layout, params.l)?;
    let mut out = Vec::new();
    for (g, members) in assignment.groups().iter().enumerate() {
        for &m in members {
            let c = counters.machine(m);
            let block = encode_counted(
                &blocks[g],
                &params.points,
                params.alpha(m),
                &mut c.encode_macs,
            )?;
            c.stored += block.len() as u64;
            out.push(StoredShare {
                machine: m,
                realization: None,
                part: Part::Group {
                    g,
                    range: layout.group_ranges[g].clone(),
                },
                block,
            });
        }
    }
    Ok(out)
}

/// One share `U(alpha_n)` of shape `v/L x r` per listed machine.
pub fn download(
    b: &FieldMatrix,
    params: &SystemParams,
    machines: &[MachineId],
    counters: &mut Counters,
) -> Result<Vec<DownloadShare>> {
    lcc::download(b, params, machines, counters)
}

/// `A~_{n,g} B~_n` for every stored group share of a machine that downloaded.
pub fn compute(
    storage: &[StoredShare],
    downloads: &[DownloadShare],
    counters: &mut Counters,
) -> Result<Vec<TaskResult>> {
    let received: BTreeMap<_, _> = downloads.iter().map(|d| (d.machine, &d.block)).collect();
    storage
        .iter()
        .filter_map(|s| {
            let g = s.part.group()?;
            let b = received.get(&s.machine)?;
            Some((s, g, *b))
        })
        .map(|(s, g, b)| {
            let product = product_counted(&s.block, b, counters.machine(s.machine))?;
            Ok(TaskResult {
                machine: s.machine,
                group: g,
                product,
            })
        })
        .collect()
}

/// Decodes every group and stacks the blocks row-wise.
pub fn decode(
    results: &[TaskResult],
    assignment: &Assignment,
    params: &SystemParams,
    layout: &Layout,
    stragglers: &[MachineId],
    counters: &mut Counters,
) -> Result<FieldMatrix> {
    let blocks = decode_blocks(results, assignment, params, layout, stragglers, counters)?;
    FieldMatrix::concat(&blocks, Axis::Row)?.trim(params.dims.q, params.dims.r)
}

/// Per-group decoded blocks `sum_l A_{l,g} B_l`.
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
            let want = (layout.group_ranges[g].len(), layout.padded.r);
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
