use thiserror::Error;

/// Errors raised by models, samplers, estimators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("sampler initialization failed: {0}")]
    Initialization(String),

    #[error("variance undefined: {0}")]
    UndefinedVariance(String),

    #[error("provenance error: {0}")]
    Provenance(String),

    #[error("singular model (condition number {condition:e}): {detail}")]
    SingularModel { condition: f64, detail: String },

    #[error("quadrature did not converge: estimate {estimate:e} with error bound {error:e}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("outside validated regime: {0}")]
    OutOfRegime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by bad user input (configs, data files).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownKey(_)
                | Error::Precondition(_)
                | Error::Domain(_)
                | Error::Data(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Toml(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
