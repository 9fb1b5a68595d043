//! Positive harmonic and subharmonic solutions of `u'' + a(t) g(u) = 0` with a
//! sign-changing periodic weight `a` and a superlinear `g`.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod flow;
pub mod harmonic;
pub mod hill;
pub mod newton;
pub mod nonlinearity;
pub mod quad;
pub mod samples;
pub mod subharmonic;
pub mod weights;

pub use error::{Error, Result};
