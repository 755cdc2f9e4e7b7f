use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("division by zero")]
    DivisionByZero,

    #[error("expression evaluated to a non-finite value")]
    NonFinite,

    #[error("variable x{index} is not defined in dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid spacing {h} does not divide half-width {l}")]
    IndivisibleSpacing { h: f64, l: f64 },

    #[error("grid spacing {h} exceeds half-width {l}")]
    SpacingTooLarge { h: f64, l: f64 },

    #[error("point {0:?} lies outside the half-box")]
    OutOfDomain(Vec<f64>),

    #[error("point {0:?} is closer than one grid spacing to the Dirichlet boundary")]
    TooCloseToBoundary(Vec<f64>),

    #[error("field does not match the grid of the configuration")]
    GridMismatch,

    #[error("method `{method}` is not valid for p = {p}")]
    InvalidMethod { method: &'static str, p: f64 },

    #[error("H(r) vanishes at radius {radius}")]
    DegenerateDenominator { radius: f64 },

    #[error("radius {radius} is not admissible around center {center:?}")]
    RadiusTooLarge { radius: f64, center: Vec<f64> },

    #[error("center {0:?} does not lie on the flat boundary")]
    NotOnGamma(Vec<f64>),

    #[error("frequency estimate {estimate} is not within 0.25 of an integer")]
    AmbiguousFrequency { estimate: f64 },

    #[error("radius set not usable for the frequency fit: {0}")]
    InsufficientRadii(String),

    #[error("dimension {0} is not supported by this operation")]
    UnsupportedDimension(usize),

    #[error("rescaling normalization vanishes at radius {radius}")]
    DegenerateNormalization { radius: f64 },

    #[error("degenerate normal matrix in blow-up fit")]
    DegenerateNormalMatrix,

    #[error("offset {offset} is below the grid resolution {min}")]
    Resolution { offset: f64, min: f64 },

    #[error("point at {0} is not a regular free-boundary point")]
    NotRegular(f64),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
