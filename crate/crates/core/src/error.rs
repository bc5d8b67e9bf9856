use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("singular gram matrix; pass a ridge > 0")]
    SingularGram,

    #[error("ill-conditioned system: smallest singular value {0:e}")]
    IllConditioned(f64),

    #[error("behavior policy has zero probability on logged pair (s={s}, a={a})")]
    CoverageViolation { s: usize, a: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("value {value} outside [0, {v_max}]")]
    OutOfRange { value: f64, v_max: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable code used in result tables.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidModel(_) => "invalid_model",
            Error::SingularGram => "singular_gram",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::CoverageViolation { .. } => "coverage_violation",
            Error::Parse { .. } => "parse",
            Error::UnknownScenario(_) => "unknown_scenario",
            Error::UnknownIdentifier(_) => "unknown_identifier",
            Error::InvalidParams(_) => "invalid_params",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Unsupported(_) => "unsupported",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
