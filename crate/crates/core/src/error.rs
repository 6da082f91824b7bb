use thiserror::Error;

/// Errors raised while building or analyzing spaces, devices and Born matrices.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot construct space: {0}")]
    Construction(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("effects do not sum to the unit effect (residual {residual:e})")]
    NotAMeasurement { residual: f64 },

    #[error("measurement is not informationally complete: rank {rank}, need {required}")]
    NotInformationallyComplete { rank: usize, required: usize },

    #[error("effect {index} lies outside the effect space")]
    InvalidEffect { index: usize },

    #[error("state {index} lies outside the state cone")]
    InvalidState { index: usize },

    #[error("outcome {index} has zero bias")]
    ZeroBias { index: usize },

    #[error("no valid reference states on the negative branch")]
    NoNegativeBranch,

    #[error("no feasible depolarizing scale found (|alpha| searched up to {limit:e})")]
    NoFeasibleScale { limit: f64 },

    #[error("nullspace corrector does not annihilate the traceless block (residual {residual:e})")]
    InvalidNullspace { residual: f64 },

    #[error("device is not depolarizing (fit residual {residual:e})")]
    NotDepolarizing { residual: f64 },

    #[error("measurement is not minimal: {n} outcomes in dimension {r}")]
    NotMic { n: usize, r: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("closed form requires an unbiased measurement (max bias deviation {deviation:e})")]
    UnsupportedBias { deviation: f64 },

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("measurement is not weight-morphophoric (Gram residual {residual:e})")]
    NotWeightMorphophoric { residual: f64 },

    #[error("state {index} is not pure (purity {purity})")]
    Purity { index: usize, purity: f64 },

    #[error("fiducial does not generate a SIC (max overlap deviation {deviation:e})")]
    NotASic { deviation: f64 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("{0}")]
    Precondition(String),

    #[error("invalid device file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
