use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("boards {a} and {b} overlap: center distance {dist:.4} m < {min:.4} m")]
    BoardOverlap { a: u32, b: u32, dist: f64, min: f64 },

    #[error("receivers at identical positions are not allowed")]
    CoincidentReceivers,

    #[error("no feasible design in the search space")]
    EmptyFeasibleSet,

    #[error("duplicate rf_address `{0}` in traces")]
    DuplicateAddress(String),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
