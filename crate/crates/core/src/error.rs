//! Error type shared by the core modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("window plateau [{lo}, {hi}] must satisfy 1/2 < lo < hi < 2")]
    InvalidPlateau { lo: f64, hi: f64 },

    #[error("spectral band contains no lattice frequencies")]
    EmptyBand,

    #[error("band reaches {requested} but the lattice resolves only |f| < {nyquist}")]
    NyquistUncovered { requested: f64, nyquist: f64 },

    #[error("invalid symbol descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("operator family mismatch: {0}")]
    KindMismatch(String),

    #[error("double sum needs {needed} coefficient pairs, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("quadrature rule: {0}")]
    InvalidRule(String),

    #[error("subordination truncation leaks: breakpoint {breakpoint} above upper limit {limit}")]
    TruncationLeak { breakpoint: f64, limit: f64 },

    #[error("quadrature under-resolved: refinement moved the result by {difference}, declared tolerance {tolerance}")]
    QuadratureUnderresolved { difference: f64, tolerance: f64 },

    #[error("weighted norm hits a singular lattice node (use an offset grid)")]
    SingularNode,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("field container: {0}")]
    BadContainer(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
