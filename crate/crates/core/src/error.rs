use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric quantity over- or underflowed, or a search left its bracket.
    #[error("range error: {0}")]
    Range(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A user-supplied map produced a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A minorant or profile could not be built; carries the offending sample.
    #[error("construction error at (s = {s}, u = {u}): {msg}")]
    Construction { s: f64, u: f64, msg: String },

    #[error("solver error: {0}")]
    Solver(String),

    /// The state blew up during time stepping.
    #[error("runtime error at t = {t}: {msg}")]
    Runtime { t: f64, msg: String },

    #[error("config error at {pointer}: {msg}")]
    Config { pointer: String, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
