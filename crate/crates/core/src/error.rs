use thiserror::Error;

use crate::gs::SampledGS;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value during {context} (substep {substep})")]
    NonFinite { context: String, substep: usize },

    #[error("step failed at trajectory index {index}: {source}")]
    TrajectoryStep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("inverse round trip error {error:e} exceeds tolerance {tolerance:e}")]
    RoundTripFailure { error: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("state outside the map's domain: {0}")]
    DomainViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state map is not a contraction on the region (L_Fx = {l_fx})")]
    NotAContraction { l_fx: f64 },

    #[error("region '{region}' is not forward invariant (margin {margin:e})")]
    NotInvariant { region: String, margin: f64 },

    #[error("recorded state left region '{region}' at trajectory index {index}")]
    RegionEscape { region: String, index: usize },

    #[error("Psi iteration stopped after {iterations} sweeps with sup-change {last_change:e} > {tol:e}")]
    NoConvergence {
        iterations: usize,
        last_change: f64,
        tol: f64,
        partial: Box<SampledGS>,
    },

    #[error("synchronizations do not share recorded indices on a common base trajectory")]
    DisjointRanges,

    #[error("window lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("only {found} pairs in the finest distance bin, need {needed}")]
    InsufficientPairs { found: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
