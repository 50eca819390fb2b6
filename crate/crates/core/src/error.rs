use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fiber point has norm {norm} >= 1")]
    OutsideFiberBall { norm: f64 },

    #[error("point lies outside the region")]
    OutsideRegion,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("evaluation too close to a nonsmooth locus of the defining function: {0}")]
    NonSmooth(String),

    #[error("|1 - <w, eta>| = {0:e} is below the branch floor")]
    BranchFloor(f64),

    #[error("quadrature did not converge: estimate {value:e}, error {error:e} after {intervals} intervals")]
    QuadratureNonConvergence {
        value: f64,
        error: f64,
        intervals: usize,
    },

    #[error("unsupported derivative order {requested} (model supports up to {supported})")]
    UnsupportedOrder { requested: usize, supported: usize },

    #[error("rejection sampler acceptance rate {rate:e} is below the floor {floor:e}")]
    DegenerateRegion { rate: f64, floor: f64 },

    #[error("norm underflow for test function {0}")]
    NormUnderflow(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("report merge error: {0}")]
    Merge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
