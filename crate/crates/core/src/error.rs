use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`]),
/// which the CLI prints alongside the message.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadratic surd has a perfect-square radicand D = {0}")]
    PerfectSquareD(String),

    #[error("zero denominator")]
    ZeroDenominator,

    #[error("invalid alpha specification: {0}")]
    InvalidAlpha(String),

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("continued-fraction digit stream exhausted: needed {needed}, available {available}")]
    DigitStreamExhausted { needed: usize, available: usize },

    #[error("partial quotient does not fit in 64 bits")]
    DigitOverflow,

    #[error("lacunary term needs {bits} bits, budget is {budget}")]
    BitBudgetExceeded { bits: u64, budget: u64 },

    #[error("bad generator spec: {0}")]
    BadSpec(String),

    #[error("duplicate value on line {0}")]
    DuplicateValue(usize),

    #[error("parse error on line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("column {column} is incomplete")]
    IncompleteColumn { column: usize },

    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),

    #[error("internal mismatch: {0}")]
    InternalMismatch(String),

    #[error("grid too large: {0}")]
    GridTooLarge(String),

    #[error("bracketing failed for value {value}: {reason}")]
    BracketingFailed { value: f64, reason: String },

    #[error("a verified quasi-arithmetic certificate is required")]
    CertificateRequired,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable short code for machine consumption.
    pub fn code(&self) -> &'static str {
        match self {
            Error::PerfectSquareD(_) => "perfect_square_d",
            Error::ZeroDenominator => "zero_denominator",
            Error::InvalidAlpha(_) => "invalid_alpha",
            Error::PrecisionExhausted(_) => "precision_exhausted",
            Error::DigitStreamExhausted { .. } => "digit_stream_exhausted",
            Error::DigitOverflow => "digit_overflow",
            Error::BitBudgetExceeded { .. } => "bit_budget_exceeded",
            Error::BadSpec(_) => "bad_spec",
            Error::DuplicateValue(_) => "duplicate_value",
            Error::ParseError { .. } => "parse_error",
            Error::Io(_) => "io",
            Error::InvariantViolation(_) => "invariant_violation",
            Error::IncompleteColumn { .. } => "incomplete_column",
            Error::PreconditionUnmet(_) => "precondition_unmet",
            Error::InternalMismatch(_) => "internal_mismatch",
            Error::GridTooLarge(_) => "grid_too_large",
            Error::BracketingFailed { .. } => "bracketing_failed",
            Error::CertificateRequired => "certificate_required",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
