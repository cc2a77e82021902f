use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("row {row}, column `{column}`: {reason}")]
    Cell { row: usize, column: String, reason: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not numeric")]
    NotNumeric(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("non-finite log-probability for feature {feature}")]
    NonFinite { feature: usize },
    #[error("accepted pool holds {available} rows but {required} synthetic rows are required (short by {})", required - available)]
    Shortfall { required: usize, available: usize },
    #[error("step {index}: {source}")]
    Step { index: usize, source: Box<Error> },
}
