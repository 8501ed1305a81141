//! Wavelet regression for random or fixed designs whose density vanishes at a point.
//!
//! The estimator splits the function into a part whose basis elements avoid the
//! zero of the design density (estimated by hard thresholding of inverse-density
//! weighted coefficients) and a part touching the zero (recovered from a small
//! linear system). A Lepski-type rule picks the resolution level that separates
//! the two parts.

pub mod adapt;
pub mod bench;
pub mod cli;
pub mod coeffs;
pub mod design;
pub mod error;
pub mod func;
pub mod quad;
pub mod wavelet;
pub mod zero_affected;

pub use error::{Error, Result};
pub use func::RealFn;
