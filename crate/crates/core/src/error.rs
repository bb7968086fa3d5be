use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between reading an integral file and writing a spectrum.
#[derive(Debug, Error)]
pub enum Error {
    #[error("FCIDUMP parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("integral validation failed: {0}")]
    Validation(String),

    #[error("invalid sector: {0}")]
    Sector(String),

    #[error("invalid excitation operator: {0}")]
    Operator(String),

    #[error("excitation annihilates the state (norm^2 = {norm2:e})")]
    ZeroPerturbation { norm2: f64 },

    #[error("determinants belong to different sectors")]
    SectorMismatch,

    #[error("duplicate determinant {0} in basis")]
    DuplicateDeterminant(String),

    #[error("Lanczos did not converge after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Krylov step size underflow at t = {t} (remaining {remaining})")]
    StepUnderflow { t: f64, remaining: f64 },

    #[error("dimension {dim} exceeds cap {cap} for {what}")]
    SizeCap { what: &'static str, dim: usize, cap: usize },

    #[error("sampled configuration {0} has vanishing amplitude")]
    DegenerateSample(String),

    #[error("vanishing transition amplitude between {x} and {y}")]
    VanishingTransition { x: usize, y: usize },

    #[error("no local estimator for sampled configuration {0}")]
    MissingEstimator(String),

    #[error("time grid is not symmetric about zero")]
    AsymmetricGrid,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 configuration,
    /// 3 numerical failure, 4 size-cap abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::SizeCap { .. } => 4,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Sector(_)
            | Error::Operator(_)
            | Error::Config(_)
            | Error::AsymmetricGrid
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
