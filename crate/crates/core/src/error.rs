use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Validation failures of atoms and gates are *not* errors: they come back as
/// reports. Errors are reserved for inputs that cannot be evaluated at all.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite integrand value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    #[error("{what} diverges (partial sum {partial:.6e} after {octaves} octaves)")]
    Divergent { what: String, partial: f64, octaves: usize },

    #[error("singular matrix A(y) at y = {y:?}")]
    SingularMatrix { y: Vec<f64> },

    #[error("support octaves [{support_lo}, {support_hi}] exceed the requested range [{range_lo}, {range_hi}]; widen the k range")]
    TruncatedSupport {
        support_lo: i32,
        support_hi: i32,
        range_lo: i32,
        range_hi: i32,
    },

    #[error("atom rejected: condition {condition} failed (residual {residual:.3e})")]
    AtomRejected { condition: String, residual: f64 },

    #[error("moment projection annihilated the profile; try another shape or seed")]
    DegenerateProjection,

    #[error("shell partition of ||A^-1(y)|| unstable under refinement (relative change {change:.3e}); declare octave bounds on the field")]
    UnstablePartition { change: f64 },

    #[error("pieces come from different decompositions")]
    ProvenanceMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
