//! Numerical laboratory for Müntz systems `{t^λ_n}` in L²(0,1).
// NaN-aware comparisons are written as `!(x < tol)` on purpose; dense
// matrix kernels index by position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod biorthogonal;
pub mod cli;
pub mod completeness;
pub mod error;
pub mod exponents;
pub mod gram;
pub mod hardy;
pub mod linalg;
pub mod muntz_space;
pub mod numeric;
pub mod operators;
pub mod quadrature;

pub use error::{MuntzError, Result};
