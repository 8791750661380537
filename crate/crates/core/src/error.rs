use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("symbol `{symbol}` expects {expected} arguments, found {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },

    #[error("signature error: {0}")]
    Signature(String),

    #[error("malformed formula: {0}")]
    Malformed(String),

    #[error("signature mismatch between structure and sentence")]
    SignatureMismatch,

    #[error("element {0} outside the domain")]
    OutOfDomain(usize),

    #[error("function symbols of arity > 1 are not supported here: {0}")]
    NotUnary(String),

    #[error("symbol clash: {0}")]
    SymbolClash(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid model dump at line {line}: {message}")]
    Dump { line: usize, message: String },

    #[error("unary predicates do not partition the domain: {0}")]
    NotAPartition(String),
}
