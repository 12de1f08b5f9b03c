use thiserror::Error;

/// Errors raised by grid construction, inner-function certification and the
/// model-space / MTTO machinery.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid inner-function spec: {0}")]
    Spec(String),

    #[error("not inner: unitarity residual {residual:.3e} is not below {tol:.0e}")]
    NotInner { residual: f64, tol: f64 },

    #[error("grid too coarse: spectral tail energy {tail:.3e} still above tolerance at the cap M = {cap}")]
    GridTooCoarse { cap: usize, tail: f64 },

    #[error("function lies outside H^2(E): negative-frequency norm {negative:.3e} vs total norm {total:.3e}")]
    Domain { negative: f64, total: f64 },

    #[error("model-space basis has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("symbol band {band} exceeds the anti-aliasing limit M/4 = {limit}")]
    Alias { band: usize, limit: usize },

    #[error("shift-invariance test domain is only identified for pure inner functions")]
    UnsupportedDomain,
}

impl Error {
    /// Stable name of the error class, used in campaign reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Grid(_) => "GridError",
            Error::Shape(_) => "ShapeError",
            Error::Spec(_) => "SpecError",
            Error::NotInner { .. } => "NotInner",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::Domain { .. } => "DomainError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Alias { .. } => "AliasError",
            Error::UnsupportedDomain => "UnsupportedDomain",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
