//! Closed-form per-machine costs under cyclic assignment.
//!
//! Units: storage is a fraction of `|A| = qv`; download and upload are field
//! elements per machine; encoding and computing are multiply-accumulates per
//! machine; decoding is multiply-accumulates at the master.
//!
//! Besides the two LCSD schemes, four earlier elastic-computing designs are
//! available as fixed rows for comparison (`T = L + S` is their recovery
//! threshold plus straggler budget):
//!
//! | row                          | storage | download        | upload          |
//! |------------------------------|---------|-----------------|-----------------|
//! | `MdsStorageUncodedDownload`  | 1/L     | vr              | qrT/(L N_t)     |
//! | `UncodedStorageCodedDownload`| 1       | vrT/(L N_t)     | qrT/(L N_t)     |
//! | `PartialStorageCodedDownload`| T/N_t   | vr/L            | qrT/(L N_t)     |
//! | `MdsStorageCodedDownload`    | 1/L     | vr/N_t          | qrL             |

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::assignment::{recovery_group_size, MachineId};
use crate::error::{Error, Result};
use crate::rational::{int, Rational};
use crate::scheme::{Counters, Dims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableRow {
    Scheme1,
    Scheme2,
    /// MDS-coded storage, uncoded download (matrix-vector design).
    MdsStorageUncodedDownload,
    /// Uncoded full storage, Lagrange-coded download.
    UncodedStorageCodedDownload,
    /// Partial uncoded storage, Lagrange-coded download.
    PartialStorageCodedDownload,
    /// MDS-coded storage and download whose workers return full-size
    /// partial products.
    MdsStorageCodedDownload,
}

impl TableRow {
    pub const ALL: [TableRow; 6] = [
        TableRow::Scheme1,
        TableRow::Scheme2,
        TableRow::MdsStorageUncodedDownload,
        TableRow::UncodedStorageCodedDownload,
        TableRow::PartialStorageCodedDownload,
        TableRow::MdsStorageCodedDownload,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TableRow::Scheme1 => "scheme1",
            TableRow::Scheme2 => "scheme2",
            TableRow::MdsStorageUncodedDownload => "mds-storage-uncoded-download",
            TableRow::UncodedStorageCodedDownload => "uncoded-storage-coded-download",
            TableRow::PartialStorageCodedDownload => "partial-storage-coded-download",
            TableRow::MdsStorageCodedDownload => "mds-storage-coded-download",
        }
    }

    pub fn is_lcsd(&self) -> bool {
        matches!(self, TableRow::Scheme1 | TableRow::Scheme2)
    }
}

impl fmt::Display for TableRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    #[serde(with = "crate::rational::serde_str")]
    pub storage_fraction: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub encoding: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub download: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub computing: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub upload: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub decoding: Rational,
}

impl CostReport {
    pub const COLUMNS: [&'static str; 6] = [
        "storage",
        "encoding",
        "download",
        "computing",
        "upload",
        "decoding",
    ];

    pub fn zero() -> Self {
        let z = Rational::zero();
        Self {
            storage_fraction: z,
            encoding: z,
            download: z,
            computing: z,
            upload: z,
            decoding: z,
        }
    }

    /// Values in [`Self::COLUMNS`] order.
    pub fn values(&self) -> [Rational; 6] {
        [
            self.storage_fraction,
            self.encoding,
            self.download,
            self.computing,
            self.upload,
            self.decoding,
        ]
    }

    /// Per-machine averages over `machines` of the measured counters.
    /// Under cyclic assignment every machine carries the same load, so the
    /// average is the per-machine cost.
    pub fn measured(counters: &Counters, dims: Dims, machines: &[MachineId]) -> Self {
        let n = int(machines.len().max(1) as i128);
        let sum = |f: fn(&crate::scheme::MachineCounters) -> u64| -> Rational {
            let total: u64 = machines
                .iter()
                .filter_map(|m| counters.per_machine.get(m))
                .map(f)
                .sum();
            int(total as i128) / n
        };
        Self {
            storage_fraction: sum(|c| c.stored) / int((dims.q * dims.v) as i128),
            encoding: sum(|c| c.encode_macs),
            download: sum(|c| c.downloaded),
            computing: sum(|c| c.compute_macs),
            upload: sum(|c| c.uploaded),
            decoding: int(counters.decode_macs as i128),
        }
    }
}

/// Evaluates one row of the comparison table.
pub fn cost_row(row: TableRow, l: usize, s: usize, nt: usize, dims: Dims) -> Result<CostReport> {
    if l == 0 || nt == 0 {
        return Err(Error::Infeasible("L and N_t must be positive".into()));
    }
    let need = if row.is_lcsd() {
        recovery_group_size(l, s)
    } else {
        l + s
    };
    if need > nt {
        return Err(Error::Infeasible(format!(
            "{row} needs at least {need} machines, N_t = {nt}"
        )));
    }
    let (q, v, r) = (
        int(dims.q as i128),
        int(dims.v as i128),
        int(dims.r as i128),
    );
    let (li, n) = (int(l as i128), int(nt as i128));
    let k = int(recovery_group_size(l, s) as i128);
    let t = int((l + s) as i128);
    let lcsd_decode = q * r * li * (int(2) * li - int(1));
    let report = match row {
        TableRow::Scheme1 => CostReport {
            storage_fraction: int(1) / li,
            encoding: q * v + v * r * k / n,
            download: v * r * k / (li * n),
            computing: q * v * r * k / (li * n),
            upload: q * r * k / n,
            decoding: lcsd_decode,
        },
        TableRow::Scheme2 => CostReport {
            storage_fraction: k / (li * n),
            encoding: q * v * k / n + v * r,
            download: v * r / li,
            computing: q * v * r * k / (li * n),
            upload: q * r * k / n,
            decoding: lcsd_decode,
        },
        TableRow::MdsStorageUncodedDownload => CostReport {
            storage_fraction: int(1) / li,
            encoding: q * v,
            download: v * r,
            computing: q * v * r * t / (li * n),
            upload: q * r * t / (li * n),
            decoding: q * r * li,
        },
        TableRow::UncodedStorageCodedDownload => CostReport {
            storage_fraction: int(1),
            encoding: v * r * t / n,
            download: v * r * t / (li * n),
            computing: q * v * r * t / (li * n),
            upload: q * r * t / (li * n),
            decoding: q * r * li,
        },
        TableRow::PartialStorageCodedDownload => CostReport {
            storage_fraction: t / n,
            encoding: v * r,
            download: v * r / li,
            computing: q * v * r * t / (li * n),
            upload: q * r * t / (li * n),
            decoding: q * r * li,
        },
        // Decoding is listed only as constant order; 1 stands in for it.
        TableRow::MdsStorageCodedDownload => CostReport {
            storage_fraction: int(1) / li,
            encoding: q * v + v * r * li / n,
            download: v * r / n,
            computing: q * v * r / n,
            upload: q * r * li,
            decoding: int(1),
        },
    };
    Ok(report)
}

/// A column where measurement and formula disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discrepancy {
    pub column: &'static str,
    pub expected: Rational,
    pub measured: Rational,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: expected {}, measured {}",
            self.column, self.expected, self.measured
        )
    }
}

/// Exact comparison, column by column.
pub fn check_measured(expected: &CostReport, measured: &CostReport) -> Result<(), Discrepancy> {
    for ((column, e), m) in CostReport::COLUMNS
        .iter()
        .zip(expected.values())
        .zip(measured.values())
    {
        if e != m {
            return Err(Discrepancy {
                column,
                expected: e,
                measured: m,
            });
        }
    }
    Ok(())
}

/// `download(a) / download(b)` at the same parameters.
pub fn download_ratio(
    a: TableRow,
    b: TableRow,
    l: usize,
    s: usize,
    nt: usize,
    dims: Dims,
) -> Result<Rational> {
    Ok(cost_row(a, l, s, nt, dims)?.download / cost_row(b, l, s, nt, dims)?.download)
}
