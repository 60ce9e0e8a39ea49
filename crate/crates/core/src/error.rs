use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The ground-truth trajectory left the admissible state set.
    #[error("state left its bounds at t = {t:.4} s: {what}")]
    OutOfBounds { t: f64, what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("non-uniform sample spacing at index {index}")]
    NonUniformSpacing { index: usize },

    #[error("interval [{t0}, {t1}] is not inside the series span [{lo}, {hi}]")]
    IntervalOutOfRange { t0: f64, t1: f64, lo: f64, hi: f64 },

    #[error("metrics window [{t0}, {t1}] contains no samples")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("malformed history stack: {0}")]
    MalformedStack(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("missing required column `{column}` in {}", path.display())]
    MissingColumn { path: PathBuf, column: String },

    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),

    #[error("run `{name}` failed: {source}")]
    Run {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config file: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialization: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Wraps a fault with the name of the run it happened in.
    pub fn in_run(self, name: &str) -> Error {
        Error::Run { name: name.to_string(), source: Box::new(self) }
    }

    /// True for faults caused by bad user input rather than a failing run.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::UnknownKey(_)
            | Error::TomlDe(_)
            | Error::TomlSer(_)
            | Error::UnknownFigure(_)
            | Error::Parse { .. }
            | Error::MissingColumn { .. } => true,
            Error::Run { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
