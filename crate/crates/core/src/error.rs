//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),

    #[error("only undifferentiated fields may be inverted: {0}")]
    InvalidInverse(String),

    #[error("pole collision: substitution makes denominator `{denominator}` vanish")]
    PoleCollision { denominator: String },

    #[error("rule set not prolonged to cover jet `{jet}`")]
    NotProlonged { jet: String },

    #[error("reduction budget exhausted after {steps} steps (last jet `{jet}`)")]
    ReduceBudget { jet: String, steps: usize },

    #[error("duplicate rewrite rule for jet `{0}`")]
    DuplicateRule(String),

    #[error("rewrite rule right-hand side contains its own left-hand side `{0}`")]
    SelfReferentialRule(String),

    #[error("not a total derivative; residual: {residual}")]
    NotTotalDerivative { residual: String },

    #[error("ill-conditioned numeric evaluation: {what}")]
    IllConditioned { what: String },

    #[error("numeric assignment missing symbol `{0}`")]
    MissingSymbol(String),

    #[error("ad(Q0) is singular on the off-diagonal: {0}")]
    AdSingular(String),

    #[error("truncation order exceeded: {0}")]
    TruncationExceeded(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
