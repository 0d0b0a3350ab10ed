use thiserror::Error;

/// Errors raised by parsing, validation and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("arm {0} has zero rows")]
    EmptyArm(u8),

    #[error("both full-form and reduced-form columns are partially present")]
    MixedForm,

    #[error("operation requires the dataset in {expected} form")]
    WrongForm { expected: &'static str },

    #[error("at-risk count is zero at t = {0}")]
    ZeroRisk(f64),

    #[error("event at t = {0} with empty risk set (corrupted counting process)")]
    RiskSetEmptyAtEvent(f64),

    #[error("principal stratum denominator {denom:.3e} <= {eps:.1e} in arm {arm}")]
    DegenerateStratum { arm: u8, denom: f64, eps: f64 },

    #[error("no events contribute to the {0} log-rank statistic")]
    NoEvents(&'static str),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
