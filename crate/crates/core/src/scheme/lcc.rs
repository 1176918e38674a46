//! Traditional Lagrange-coded computing: every responding machine returns the
//! full coded product `V(alpha_n) U(alpha_n)`, and any `2L-1` of them decode.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    decode_group, encode_counted, equal_blocks, product_counted, Counters, DownloadShare, Part,
    StoredShare, SystemParams, TaskResult,
};
use crate::assignment::MachineId;
use crate::error::{Error, Result};
use crate::matrix::{Axis, FieldMatrix};

/// `V(alpha_n)` for each listed machine. Shared with scheme 1.
pub fn place_storage(
    a: &FieldMatrix,
    params: &SystemParams,
    machines: &[MachineId],
    counters: &mut Counters,
) -> Result<Vec<StoredShare>> {
    params.check_a(a)?;
    let v = a.cols().div_ceil(params.l) * params.l;
    let blocks = equal_blocks(&a.pad_to(a.rows(), v)?, Axis::Column, params.l)?;
    machines
        .iter()
        .map(|&m| {
            let c = counters.machine(m);
            let block =
                encode_counted(&blocks, &params.points, params.alpha(m), &mut c.encode_macs)?;
            c.stored += block.len() as u64;
            Ok(StoredShare {
                machine: m,
                realization: None,
                part: Part::Whole,
                block,
            })
        })
        .collect()
}

/// `U(alpha_n)` for each listed machine. Shared with scheme 2.
pub fn download(
    b: &FieldMatrix,
    params: &SystemParams,
    machines: &[MachineId],
    counters: &mut Counters,
) -> Result<Vec<DownloadShare>> {
    params.check_b(b)?;
    let v = b.rows().div_ceil(params.l) * params.l;
    let blocks = equal_blocks(&b.pad_to(v, b.cols())?, Axis::Row, params.l)?;
    machines
        .iter()
        .map(|&m| {
            let c = counters.machine(m);
            let block =
                encode_counted(&blocks, &params.points, params.alpha(m), &mut c.encode_macs)?;
            c.downloaded += block.len() as u64;
            Ok(DownloadShare {
                machine: m,
                part: Part::Whole,
                block,
            })
        })
        .collect()
}

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
            let a = stored.get(&d.machine).ok_or_else(|| {
                Error::DimensionMismatch(format!("machine {} has no stored share", d.machine))
            })?;
            let product = product_counted(a, &d.block, counters.machine(d.machine))?;
            Ok(TaskResult {
                machine: d.machine,
                group: 0,
                product,
            })
        })
        .collect()
}

/// Decodes from the results of `responding` machines.
pub fn decode(
    results: &[TaskResult],
    params: &SystemParams,
    responding: &[MachineId],
    counters: &mut Counters,
) -> Result<FieldMatrix> {
    let ok: BTreeSet<_> = responding.iter().collect();
    let survivors: BTreeMap<_, _> = results
        .iter()
        .filter(|r| ok.contains(&r.machine))
        .map(|r| (r.machine, &r.product))
        .collect();
    let needed = params.threshold();
    if survivors.len() < needed {
        return Err(Error::InsufficientResults {
            needed,
            got: survivors.len(),
        });
    }
    let full = decode_group(0, &survivors, params, &mut counters.decode_macs)?;
    full.trim(params.dims.q, params.dims.r)
}

/// All four phases over `[N]`, decoding from `responding` only.
pub fn baseline(
    a: &FieldMatrix,
    b: &FieldMatrix,
    params: &SystemParams,
    responding: &[MachineId],
) -> Result<FieldMatrix> {
    let mut counters = Counters::default();
    let all = params.machines();
    let storage = place_storage(a, params, &all, &mut counters)?;
    let downloads = download(b, params, &all, &mut counters)?;
    let results = compute(&storage, &downloads, &mut counters)?;
    decode(&results, params, responding, &mut counters)
}
