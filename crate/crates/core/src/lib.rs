//! Lagrange-coded storage and download (LCSD) for elastic, straggler-tolerant
//! distributed matrix multiplication over a prime field.
//!
//! The crate is organised bottom-up:
//!
//! - [`field`], [`matrix`]: exact arithmetic and dense block matrices.
//! - [`lagrange`]: matrix-valued Lagrange encoding and interpolation.
//! - [`assignment`]: cyclic and speed-aware computation assignments.
//! - [`scheme`]: one time step of the baseline coded computation and of the
//!   two LCSD schemes, with instrumented cost counters.
//! - [`elastic`]: availability realizations and union storage placement.
//! - [`sharing`]: storage-sharing between two scheme configurations.
//! - [`cost`]: closed-form per-machine cost rows.
//! - [`sim`]: Monte-Carlo timing of cyclic vs heterogeneous assignments.

pub mod assignment;
pub mod cost;
pub mod elastic;
pub mod error;
pub mod field;
pub mod lagrange;
pub mod matrix;
pub mod rational;
pub mod scheme;
pub mod sharing;
pub mod sim;

pub use assignment::{Assignment, MachineId, MachineLoad};
pub use cost::{CostReport, TableRow};
pub use error::{Error, Result};
pub use field::{FieldElement, PrimeField};
pub use lagrange::EvalPoints;
pub use matrix::{Axis, BlockPartition, FieldMatrix};
pub use rational::Rational;
pub use scheme::{Scheme, SystemParams};
