//! Modular index theory for quantum SU(2) at desk scale.

pub mod error;
pub mod parallel;
pub mod podles_triple;
pub mod qalgebra;
pub mod qscalar;

pub use error::{Error, Result};
pub mod checks;
pub mod chern_index;
pub mod corep;
pub mod derived_lp;
pub mod kernel;
pub mod sparse;
pub mod suq2_triple;
pub mod sample;
pub mod twisted_cyclic;
