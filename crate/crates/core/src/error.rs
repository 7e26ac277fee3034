use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A corpus, knowledge or lexicon record violates an invariant.
    Invalid(String),
    /// An unrecognised label or relation name.
    UnknownLabel { kind: &'static str, value: String },
    /// Knowledge store lacks an entry needed for a conversation.
    MissingKnowledge { utterance: String, relation: &'static str },
    /// Tensor shapes do not fit an operation.
    Shape { op: &'static str, lhs: alloc::vec::Vec<usize>, rhs: alloc::vec::Vec<usize> },
    /// Component sizes disagree.
    Dimension { expected: usize, found: usize },
    /// Embedding lookup outside the provider's coverage.
    Uncovered(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid(msg) => write!(f, "invalid data: {msg}"),
            Error::UnknownLabel { kind, value } => write!(f, "unknown {kind} `{value}`"),
            Error::MissingKnowledge { utterance, relation } => {
                write!(f, "no knowledge for utterance `{utterance}` relation {relation}")
            }
            Error::Shape { op, lhs, rhs } => {
                write!(f, "shape mismatch in {op}: {lhs:?} vs {rhs:?}")
            }
            Error::Dimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Uncovered(key) => write!(f, "no embedding for `{key}`"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
