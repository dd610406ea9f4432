use thiserror::Error;

use crate::calculus::{Carrier, Metric};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // schema and data
    #[error("column names must be non-empty")]
    EmptyColumnName,
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {column:?} has kind {actual}, expected {expected}")]
    ColumnKind { column: String, expected: String, actual: String },
    #[error("record does not conform to schema: {0}")]
    RecordSchemaMismatch(String),
    #[error("data does not match schema: {0}")]
    DataSchemaMismatch(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("json error: {0}")]
    Json(String),

    // calculus
    #[error("metric {metric:?} does not apply to {carrier:?} values")]
    IncompatibleMetric { metric: Metric, carrier: Carrier },
    #[error("invalid stability map: {0}")]
    InvalidStabilityMap(String),
    #[error("invalid privacy map: {0}")]
    InvalidPrivacyMap(String),
    #[error("invalid privacy loss: {0}")]
    InvalidLoss(String),
    #[error("distance must be nonnegative, got {0}")]
    NegativeDistance(f64),
    #[error("value is not a member of the domain: {0}")]
    NotInDomain(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("record function failed: {0}")]
    RecordFunction(String),

    // transformations
    #[error("bounds inverted: lower {lower} > upper {upper}")]
    BoundsInverted { lower: f64, upper: f64 },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("input domain has no clamping bounds for column {0:?}")]
    UnclampedDomain(String),
    #[error("a record matches more than one partition piece")]
    OverlappingPieces,
    #[error("a record matches no partition piece")]
    NoMatchingPiece,
    #[error("invalid arity: {0}")]
    InvalidArity(String),

    // mechanisms
    #[error("noise scale must be positive and finite, got {0}")]
    NonpositiveScale(f64),
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("epsilon must be positive and finite, got {0}")]
    NonpositiveEpsilon(f64),

    // combinators
    #[error("measurements use different privacy measures")]
    HeterogeneousMeasures,
    #[error("expected {expected} measurements, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },

    // interactive
    #[error("budget must be nonnegative")]
    NegativeBudget,
    #[error("budget exceeded: requested {requested}, remaining {remaining}")]
    BudgetExceeded { requested: String, remaining: String },
    #[error("unknown queryable {0}")]
    UnknownQueryable(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),

    // sample and aggregate
    #[error("sample and aggregate needs at least 2 blocks, got {0}")]
    TooFewBlocks(usize),

    // accuracy
    #[error("beta must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("alpha must be positive, got {0}")]
    NonpositiveAlpha(f64),
    #[error("sensitivity must be nonnegative and finite, got {0}")]
    InvalidSensitivity(f64),

    // tester
    #[error("mechanism does not expose exact output probabilities")]
    NotEnumerable,
    #[error("input space has {0} elements, at most 6 are enumerable")]
    InputSpaceTooLarge(usize),
    #[error("at least {min} samples are required, got {actual}")]
    InsufficientSamples { min: usize, actual: usize },
    #[error("significance must lie in (0, 0.1], got {0}")]
    InvalidSignificance(f64),

    // plans and predicates
    #[error("predicate parse error at byte {position}: {message}")]
    PredicateParse { position: usize, message: String },
    #[error("invalid plan: {0}")]
    PlanInvalid(String),
    #[error("plan loss {loss} exceeds declared budget {budget}")]
    BudgetViolation { loss: String, budget: String },
    #[error("bad command: {0}")]
    BadCommand(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
