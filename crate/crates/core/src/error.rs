//! Error types shared by the whole crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Point or vector dimensions do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A kernel matrix could not be factorized even at the maximum jitter.
    /// `detail` names the closest pair of design rows.
    #[error("singular kernel matrix: {detail}")]
    SingularMatrix { detail: String },

    /// The submodel covariance `K_M(x)` stayed singular beyond the ridge
    /// escalation policy; the most redundant submodel pair is reported.
    #[error(
        "singular submodel covariance at prediction point: submodels {first} and {second} \
         are nearly redundant (|correlation| = {correlation:.6})"
    )]
    SingularAggregation {
        first: usize,
        second: usize,
        correlation: f64,
    },

    /// The denominator of a variance-based weight rule vanished or went
    /// non-positive.
    #[error("degenerate aggregation weights: {0}")]
    DegenerateWeights(String),

    /// A sample covariance matrix could not be factorized.
    #[error("sampling failed: {0}")]
    SamplingFailure(String),

    /// An operation that requires every design row to be covered by some
    /// group was called on a non-covering partition.
    #[error("partition does not cover the design: {0}")]
    NotCovering(String),

    /// An operation restricted to disjoint partitions received overlapping
    /// groups.
    #[error("partition groups overlap: {0}")]
    Overlapping(String),
}

impl Error {
    /// True for failures of the numerics (singularity beyond policy),
    /// as opposed to invalid inputs. The CLI maps these to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::SingularAggregation { .. }
                | Error::DegenerateWeights(_)
                | Error::SamplingFailure(_)
        )
    }
}
