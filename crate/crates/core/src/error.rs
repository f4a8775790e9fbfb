use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: treatment must be 0 or 1")]
    NonBinaryTreatment { row: usize },
    #[error("row {row}: instrument must be 0 or 1")]
    NonBinaryInstrument { row: usize },
    #[error("row {row}: outcome is missing or not finite")]
    NonFiniteOutcome { row: usize },
    #[error("instrument arm z={0} has no observations")]
    EmptyInstrumentArm(u8),
    #[error("cell (d={d}, z={z}) has no observations")]
    EmptyCell { d: u8, z: u8 },
    #[error("quantile level {0} outside (0, 1]")]
    QuantileOutOfRange(f64),
    #[error("bin edges must be strictly increasing and cover the outcome range")]
    BadBinEdges,
    #[error("invalid step function: {0}")]
    InvalidCdf(&'static str),
    #[error("step function does not reach 1 (final value {0})")]
    NotAFullCdf(f64),
    #[error("defier share {0} is not an interior point of its identified set")]
    PdfNotInterior(f64),
    #[error("identified set is empty")]
    EmptyIdentifiedSet,
    #[error("outcome is not binary")]
    NotBinaryOutcome,
    #[error("construction does not apply: {0}")]
    Inapplicable(&'static str),
    #[error("first stage is zero")]
    DegenerateFirstStage,
    #[error("first stage is not positive")]
    NonPositiveFirstStage,
    #[error("trimmed sub-cell {0} has fewer than 2 observations")]
    EmptyTrimmedCell(&'static str),
    #[error("confidence level {0} outside (0, 1)")]
    BadLevel(f64),
    #[error("negative standard error")]
    NegativeSe,
    #[error("covariance matrix is not positive semi-definite (rho = {0})")]
    NonPsdCovariance(f64),
    #[error("closed-form shares require rho = 0")]
    NotAnalytic,
    #[error("no simulated draws of type {0}")]
    EmptyType(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
