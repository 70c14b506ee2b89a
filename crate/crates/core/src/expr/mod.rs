//! Arithmetic expressions over named state variables with exact
//! forward-mode first derivatives.
//!
//! Hamiltonians, Lagrangians, force coefficients and flux laws are all
//! supplied as strings in this language, for example
//! `p^2/2 + q^2/2 + T0*S`. Supported syntax:
//!
//! * numbers (`2`, `0.5`, `1e-3`), identifiers from the vocabulary;
//! * binary `+ - * / ^`, prefix `-`, parentheses;
//! * functions `exp log sin cos sqrt tanh`.
//!
//! `^` binds tightest and is right associative, then unary minus, then
//! `* /`, then `+ -`. So `-a^2` is `-(a^2)` and `a^b^c` is `a^(b^c)`.

mod ast;
mod bound;
mod dual;
mod parser;

pub use ast::{BinaryOp, Expr, UnaryOp};
pub use bound::{eval_with_grad, BoundExpr, Vocabulary};
pub use dual::Dual;
pub use parser::parse;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: found {found}, expected one of [{}]", expected.join(", "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error("invalid vocabulary entry `{name}`: {reason}")]
    InvalidVocabulary { name: String, reason: String },
    #[error("domain error: {message} in `{subexpression}`")]
    Domain {
        message: String,
        subexpression: String,
    },
    #[error("expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Checks that `name` can be used as a variable: an ASCII identifier that
/// does not shadow a function name.
pub fn check_identifier(name: &str) -> Result<(), ExprError> {
    let invalid = |reason: &str| {
        Err(ExprError::InvalidVocabulary {
            name: name.to_string(),
            reason: reason.to_string(),
        })
    };
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return invalid("must start with a letter or underscore"),
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return invalid("must contain only letters, digits and underscores");
    }
    if UnaryOp::from_function_name(name).is_some() {
        return invalid("shadows a built-in function");
    }
    Ok(())
}
