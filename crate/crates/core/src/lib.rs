//! Information gain, critical information gain and eluder dimension for
//! RKHS-ball function classes over finite action sets.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod casestudy;
pub mod eluder;
pub mod error;
pub mod gram;
pub mod infogain;
pub mod kernel;
pub mod linalg;
pub mod sandwich;

pub use error::{Error, Result};
pub use kernel::{GramMatrix, Kernel, KernelOnPoints, KernelSource, KernelSpec, Point, PointSet};
