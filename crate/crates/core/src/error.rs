use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("cylinders must share one radius (found {0} and {1})")]
    UnequalRadii(f64, f64),
    #[error("dilation factor must be positive, got {0}")]
    NonpositiveFactor(f64),
    #[error("radius must be positive and finite, got {0}")]
    NonpositiveRadius(f64),
    #[error("coordinates must be finite")]
    NonfiniteCoordinate,

    #[error("alpha must lie in (0, 1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("level {level} is too shallow for delta {delta}: its intervals have length {length}")]
    LevelTooShallow { level: u32, delta: f64, length: f64 },

    #[error("delta {0} is below the resolvable scale")]
    DeltaBelowResolution(f64),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("delta must be positive and finite, got {0}")]
    NonpositiveDelta(f64),
    #[error("fitting window holds {found} samples, at least 3 are needed")]
    WindowTooSmall { found: usize },
    #[error("alpha must be positive, got {0}")]
    NonpositiveAlpha(f64),
    #[error("covering elements must have positive diameter, got {0}")]
    NonpositiveDiameter(f64),
    #[error("invalid cover curve: {0}")]
    InvalidCurve(String),
    #[error("metric {metric} is not defined for {dim}-dimensional clouds")]
    MetricMismatch { metric: &'static str, dim: usize },

    #[error("format error: {0}")]
    Format(String),
    #[error("incomplete data: expected {expected} bytes of array data, found {found}")]
    IncompleteData { expected: usize, found: usize },
    #[error("field is singular at x = {x:?}, t = {t}")]
    SingularSample { x: [f64; 3], t: f64 },
    #[error("rescale factor must be positive, got {0}")]
    NonpositiveLambda(f64),
    #[error("grid too coarse: axis {axis} has {nodes} nodes, at least 3 are needed")]
    GridTooCoarse { axis: usize, nodes: usize },
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("generator `{generator}` has no parameter `{param}`")]
    UnknownParameter { generator: String, param: String },

    #[error("region lies outside the field domain: {0}")]
    OutOfDomain(String),
    #[error("exponents must be >= 1, got p = {p}, q = {q}")]
    BadExponent { p: f64, q: f64 },
    #[error("center must lie on the boundary plane x3 = 0, got x3 = {0}")]
    NotOnBoundary(f64),
    #[error("invalid quadrature config: {0}")]
    BadQuadrature(String),

    #[error("rho = {0} is not in (0, 2^-12)")]
    RhoTooLarge(f64),
    #[error("cutoff violates derivative bound: {value} > {bound}")]
    BadCutoff { value: f64, bound: f64 },
    #[error("invalid constants: {0}")]
    BadConstants(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
