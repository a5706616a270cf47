use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("structural error: {0}")]
    Structure(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("unknown party `{0}`")]
    UnknownParty(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("set is not orthogonal: <{0}|{1}> = {2}")]
    NotOrthogonal(String, String, String),
    #[error("measurement on {acting} does not preserve orthogonality of ({0}, {1})", .pair.0, .pair.1)]
    NotOrthogonalityPreserving { acting: String, pair: (String, String) },
    #[error("measurement on {party}: {reason}")]
    Completeness { party: String, reason: String },
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
}

impl Error {
    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
