use std::fmt;

use thiserror::Error;

/// Position of a token in program or fact text (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

fn at(span: &Option<SourceSpan>) -> String {
    span.map(|s| format!("{s}: ")).unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{span}: syntax error: {message}")]
    Syntax { span: SourceSpan, message: String },

    #[error("unsafe rule {rule}: variable {variable} does not occur in the positive body")]
    Unsafe { variable: String, rule: String },

    #[error("{}predicate {predicate} used with arity {found}, expected {expected}", at(.span))]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
        span: Option<SourceSpan>,
    },

    #[error("{}fact {atom} is not ground", at(.span))]
    NonGroundFact {
        atom: String,
        span: Option<SourceSpan>,
    },

    #[error("substitution does not bind variable {variable}")]
    MissingVariable { variable: String },

    #[error("instance bound exceeded: more than {limit} ground rules")]
    InstanceBound { limit: usize },

    #[error("atom bound exceeded: {atoms} atoms, limit {limit}")]
    AtomBound { atoms: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
