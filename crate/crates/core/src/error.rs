use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix pencil is singular")]
    SingularPencil,

    /// A rank decision could not be made with confidence: the smallest
    /// retained singular value is within a factor 10 of the largest
    /// discarded one.
    #[error("ill-conditioned rank decision: retained {retained:e}, discarded {discarded:e}")]
    IllConditioned { retained: f64, discarded: f64 },

    #[error("derivative of order {requested} requested, only {available} declared")]
    Differentiability { requested: usize, available: usize },

    #[error("history function is not admissible (residual {residual:e})")]
    InadmissibleHistory { residual: f64 },

    #[error("initial state is inconsistent (algebraic residual {residual:e})")]
    InconsistentInitialState { residual: f64 },

    #[error("Newton iteration diverged at t = {t} (residual {residual:e})")]
    NewtonDivergence {
        t: f64,
        residual: f64,
        iterate: Vec<f64>,
    },

    #[error("consistent projection did not converge (residual {residual:e})")]
    ProjectionFailed { residual: f64 },

    #[error("t = {t} outside covered range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("segment {index}: {source}")]
    Segment {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips any `Segment` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Segment { source, .. } => source.root(),
            e => e,
        }
    }
}
