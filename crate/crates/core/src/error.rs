use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("concept {concept} has no {class} vector")]
    Coverage { class: String, concept: usize },

    #[error("no concept is covered by every semantic class ({})", format_coverage(.coverage))]
    EmptyCoverage { coverage: Vec<(String, usize)> },

    #[error("degenerate retrofitting weights for key {key}: alpha + sum(beta) = 0")]
    DegenerateWeights { key: String },

    #[error("every corruption of ({head}, {rel}, {tail}) is a known triple")]
    Exhausted { head: usize, rel: usize, tail: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("serialization failure: {0}")]
    Serde(String),
}

fn format_coverage(coverage: &[(String, usize)]) -> String {
    coverage
        .iter()
        .map(|(class, n)| format!("{class}: {n}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for the error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 3,
            Error::Parse { .. } | Error::Serde(_) => 4,
            Error::EmptyInput(_)
            | Error::EmptyCoverage { .. }
            | Error::Coverage { .. }
            | Error::Exhausted { .. } => 5,
            Error::Domain(_) | Error::Dimension { .. } | Error::DegenerateWeights { .. } => 6,
            Error::Numerical(_) => 7,
            Error::Incompatible(_) => 8,
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "io",
            4 => "parse",
            5 => "data",
            6 => "domain",
            7 => "numerical",
            _ => "incompatible",
        }
    }
}
