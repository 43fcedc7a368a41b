//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The chain has more than one closed communicating class, so the
    /// stationary distribution is not unique. Carries all closed classes.
    #[error("chain is not irreducible: {} closed classes {:?}", closed_classes.len(), closed_classes)]
    NotIrreducible { closed_classes: Vec<Vec<usize>> },

    /// A dense linear solve failed even though the preconditions should
    /// rule that out.
    #[error("singular linear system while {0}")]
    SingularSystem(&'static str),

    /// Acceptance vector is identically zero.
    #[error("acceptance vector rejects every state")]
    AllRejecting,

    /// Normalizer <eta, alpha> vanished in the stationary transform.
    #[error("stationary transform normalizer <eta, alpha> is zero")]
    ZeroNormalizer,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Row of a stochastic matrix does not sum to one.
    #[error("row {row} sums to {sum}, expected 1 within {tol}")]
    RowSum { row: usize, sum: f64, tol: f64 },

    /// A matrix entry is outside its admissible range.
    #[error("entry ({row},{col}) = {value} outside [{lo}, {hi}]")]
    EntryRange {
        row: usize,
        col: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("node {node} is not ergodic: traffic rate {eta} >= tail service rate {tail}")]
    NotErgodic { node: usize, eta: f64, tail: f64 },

    #[error("traffic equations are singular")]
    SingularTraffic,

    /// Reflection-mode hypothesis (detailed balance of the routing matrix)
    /// fails.
    #[error("routing matrix is not reversible: detailed-balance violation {max_violation}")]
    NotReversible { max_violation: f64 },

    /// Reduced environment matrix fails the generator property.
    #[error("reduced matrix is not a generator: row {row} defect {defect}")]
    NotAGenerator { row: usize, defect: f64 },

    #[error("frozen law sums to {total}, expected 1")]
    InvalidFrozenLaw { total: f64 },

    /// A theorem hypothesis required by the requested check does not hold.
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    /// Regenerative estimation requires strictly positive acceptance.
    #[error("acceptance probability of state {state} is zero")]
    ZeroAcceptance { state: usize },

    /// Spec-file schema violation with a path to the offending field.
    #[error("spec error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Machine-readable error kind, stable across display changes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotIrreducible { .. } => "not_irreducible",
            Error::SingularSystem(_) => "singular_system",
            Error::AllRejecting => "all_rejecting",
            Error::ZeroNormalizer => "zero_normalizer",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::RowSum { .. } => "row_sum",
            Error::EntryRange { .. } => "entry_range",
            Error::NotErgodic { .. } => "not_ergodic",
            Error::SingularTraffic => "singular_traffic",
            Error::NotReversible { .. } => "not_reversible",
            Error::NotAGenerator { .. } => "not_a_generator",
            Error::InvalidFrozenLaw { .. } => "invalid_frozen_law",
            Error::HypothesisViolated(_) => "hypothesis_violated",
            Error::ZeroAcceptance { .. } => "zero_acceptance",
            Error::Schema { .. } => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
