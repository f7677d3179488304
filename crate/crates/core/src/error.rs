use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown map `{name}`; valid names are: {}", valid.join(", "))]
    UnknownMap { name: String, valid: Vec<String> },

    #[error("unknown coordinate system `{0}`; valid identifiers are: full, avg, err-log, err-gamma, gesc-model, gesc-full, gesc-avg")]
    UnknownCoordinates(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("averaged gradient does not change sign on [{lo}, {hi}]: G({lo}) = {g_lo}, G({hi}) = {g_hi}")]
    Bracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("state left the domain Gamma > 0 (Gamma = {gamma})")]
    Domain { gamma: f64 },

    #[error("numerical blow-up at t = {t}")]
    Blowup { t: f64 },

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
