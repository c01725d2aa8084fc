//! Robust trim fitting with partial incremental sorting and accumulation.
//!
//! The library is organised bottom-up:
//!
//! - [`trimsort`]: partial quickselect around a fixed percentile boundary that
//!   reports which samples crossed it.
//! - [`accum`]: sums over the retained set patched from those crossings.
//! - [`geom`]: camera model, EPnP control points, quaternion monomials, metrics.
//! - [`solvers`]: EPnP, REPPnP, UPnP and their trimmed variants, plus a
//!   P3P RANSAC baseline.
//! - [`synthbench`]: synthetic scenes, sweeps and the sorting microbenchmark.
//! - [`cli`]: the `trimfit` command line front end.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accum;
pub mod cli;
pub mod error;
pub mod geom;
pub mod solvers;
pub mod synthbench;
pub mod trimsort;

pub use error::{Error, Result};
pub use geom::{CameraModel, Correspondence, Pose};
pub use solvers::{SolverConfig, SolverKind, SolverResult};
