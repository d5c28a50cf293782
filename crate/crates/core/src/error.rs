use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    Dimension {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error: field {field} has id {value} outside vocabulary of size {vocab}")]
    OutOfVocabulary { field: usize, value: u32, vocab: u32 },

    #[error("label error: {0}")]
    Label(String),

    #[error("non-deterministic loss: evaluations differ ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },

    #[error("degenerate representation: row {row} has zero norm")]
    DegenerateRepresentation { row: usize },

    #[error("set construction error: anchor {anchor} has no positive inside its denominator set")]
    EmptyPositiveSet { anchor: usize },

    #[error("training diverged at step {step}: {term} is not finite")]
    Divergence { step: usize, term: &'static str },

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }
}
