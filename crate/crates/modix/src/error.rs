use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cutoff L2={have} too small, need at least {need}")]
    InsufficientCutoff { need: i32, have: i32 },
    #[error("operator is not selfadjoint (residual {0:e})")]
    NotSelfAdjoint(f64),
    #[error("no clean singular-value gap at threshold {threshold:e} (largest zero {zero:e}, smallest nonzero {nonzero:e}); raise cutoff/precision")]
    NoGap { threshold: f64, zero: f64, nonzero: f64 },
    #[error("input is not unitary (residual {0:e})")]
    NotUnitary(f64),
    #[error("unitary is not right-modular: entry ({row},{col}) of g_z is {detail}")]
    NotModular { row: usize, col: usize, detail: String },
    #[error("rank-deficient intertwiner solve (nullity {0}); raise precision")]
    RankDeficient(usize),
    #[error("parity mismatch: module is {module}, chain degree {degree}")]
    Parity { module: &'static str, degree: usize },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("boundary of a degree-0 chain")]
    DegreeZero,
    #[error("precision overflow: {0}")]
    Precision(String),
    #[error("series does not decay: {0}")]
    NotDecaying(String),
    #[error("element outside the subalgebra: {0}")]
    OutsideSubalgebra(String),
    #[error("two forms disagree: {0}")]
    Disagreement(String),
}

pub type Result<T> = std::result::Result<T, Error>;
