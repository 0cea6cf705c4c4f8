use std::fmt;

use thiserror::Error;

/// A parse failure located in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub source_text: String,
    /// Byte offset of the offending token; equal to `source_text.len()` at end of input.
    pub position: usize,
    pub expected: String,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    BadExponent,
    Overflow,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::BadExponent => "invalid exponent",
            ParseErrorKind::Overflow => "overflow",
        };
        if self.position >= self.source_text.len() {
            write!(f, "{what} at end of input: expected {}", self.expected)
        } else {
            write!(
                f,
                "{what} at position {}: expected {}\n  {}\n  {}^",
                self.position,
                self.expected,
                self.source_text,
                " ".repeat(self.position)
            )
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("arity mismatch: expected {expected} coordinates, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("mode {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("value {value} is not representable as a finite float")]
    FloatOverflow { value: String },

    #[error("invalid configuration `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("coherent amplitude for mode {mode} is zero")]
    ZeroCoherentAmplitude { mode: usize },

    #[error("coherent state has a dominant component: max occupation probability {max_weight} exceeds 1/2")]
    DominantComponent { max_weight: f64 },

    #[error("cutoff too small: truncation discards weight {discarded:e} (tolerance {tolerance:e})")]
    TruncationWeight { discarded: f64, tolerance: f64 },

    #[error("reduced time {0} outside [0, 1]")]
    ReducedTimeOutOfRange(f64),

    #[error("norm drift {drift:e} exceeds tolerance {tolerance:e}")]
    NormDrift { drift: f64, tolerance: f64 },

    #[error("instantaneous degeneracy at t = {t}: level spacing {spacing:e}")]
    Degeneracy { t: f64, spacing: f64 },

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    }
}
