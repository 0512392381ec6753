//! Design and simulation of integrated single-ion addressing optics: ion
//! crystal geometry, Gaussian beam optics, a PIC out-coupling model, scalar
//! wave propagation and lens-stack synthesis.

// Negated comparisons are used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod design;
pub mod error;
pub mod gauss;
pub mod ion_crystal;
pub mod pic;
pub mod wave;

pub use error::{Error, Result};
