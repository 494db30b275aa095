use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} out of range (3 <= n <= 7)")]
    DimensionOutOfRange(usize),

    #[error("unsupported angular grid: n={n}, l_max={l_max} (only l_max = 0 is available for n > 3)")]
    UnsupportedGrid { n: usize, l_max: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("radius {r} outside sampled range [{lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("grid mismatch: expected {expected} values, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("invalid boundary data: {0}")]
    InvalidBoundaryData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} below positivity floor {floor}")]
    PositivityFloor { value: f64, floor: f64 },

    #[error("infeasible constraints: C^p |Sigma| = {capacity_area} < A = {area}")]
    Infeasible { area: f64, capacity_area: f64 },

    #[error("cap half-angle {0} contains no grid node")]
    CapTooSmall(f64),

    #[error("ambiguous outermost enclosure: merged area {merged} exceeds minimum {minimum}")]
    AmbiguousEnclosure { merged: f64, minimum: f64 },

    #[error("mean curvature undefined: {0}")]
    CurvatureUndefined(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
