use thiserror::Error;

/// Errors produced while evaluating an [`crate::expr::Expression`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("ln of a non-positive value")]
    LnNonPositive,
    #[error("square root of a negative value")]
    SqrtNegative,
    #[error("zero raised to a negative power")]
    ZeroToNegative,
    #[error("power with a negative base and non-integer exponent")]
    PowDomain,
    #[error("unbound variable `{0}`")]
    UnboundVariable(char),
    #[error("evaluation produced a non-finite value")]
    NonFinite,
}

/// Syntax errors from the expression parser, with a byte position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at position {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

/// Errors raised while building or normalizing a time scale.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("segments overlap: [{0}, {1}] and [{2}, {3}]")]
    Overlap(f64, f64, f64, f64),
    #[error("parametric segment is not strictly monotone at index {0}")]
    NonMonotone(i64),
    #[error("time scale is empty")]
    Empty,
    #[error("invalid scale spec: {0}")]
    BadSpec(String),
}

/// Unified error for scale, shift, and calculus operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An operation stepped outside the materialized enumeration window.
    #[error("window exhausted: the operation stepped outside the enumerated window")]
    WindowExhausted,
    /// A shift was evaluated outside its domain.
    #[error("argument pair is outside the shift domain")]
    OutsideDomain,
    /// A real value is not a member of the scale (within tolerance).
    #[error("value {0} is not a point of the time scale")]
    NotInScale(f64),
    /// A shift family cannot be attached to the given scale.
    #[error("shift family `{family}` is incompatible with this scale: {reason}")]
    IncompatibleFamily { family: String, reason: String },
    #[error("period discovery is not supported for this shift family: {0}")]
    UnsupportedDiscovery(String),
    /// The substitution map failed a monotonicity probe.
    #[error("substitution map is not strictly increasing near t = {0}")]
    NotMonotone(f64),
    #[error("inverse lookup failed for value {0}")]
    InverseLookup(f64),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
