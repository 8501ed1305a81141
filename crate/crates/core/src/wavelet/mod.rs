//! Daubechies families, their dyadic tabulation, and the periodized basis on `[0, 1]`.

mod basis;
mod family;
mod table;

pub use basis::{CoefficientTree, Expansion, Generator, PeriodizedBasis};
pub use family::WaveletFamily;
pub use table::DyadicTable;
