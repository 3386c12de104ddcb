use thiserror::Error;

use crate::fir::FirTransferMatrix;
use crate::report::QiReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    /// `I - GK` (or the resolvent at a homotopy point) failed the invertibility cutoff.
    #[error("I - GK is numerically singular (relative smallest singular value {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("inertness violated: spectral radius of (GK)(0) is {radius:.6} (must be < 1)")]
    Inertness { radius: f64 },

    #[error("subspace is not quadratically invariant under G (witness residual {:.3e})", .0.witness_residual)]
    NotQuadraticallyInvariant(Box<QiReport<FirTransferMatrix>>),

    #[error("sampling ranges are empty or do not match the subspace dimension")]
    EmptyRanges,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }
}
