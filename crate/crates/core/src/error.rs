use thiserror::Error;

/// Errors raised by ingestion, estimation and simulation.
#[derive(Debug, Error)]
pub enum FdidError {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-binary baseline factor: row {row} has g = `{value}`")]
    NonBinaryG { row: usize, value: String },

    #[error("non-numeric value `{value}` in column `{column}` at row {row}")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("missing value in column `{column}` at row {row}")]
    MissingValue { column: String, row: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("empty group G={0}")]
    EmptyGroup(u8),

    #[error("dataset needs at least 2 units, got {0}")]
    TooFewUnits(usize),

    #[error("unit `{id}` has {got} covariates, expected {expected}")]
    CovariateLength {
        id: String,
        got: usize,
        expected: usize,
    },

    #[error("unbalanced unit `{id}`: no row for period `{label}`")]
    UnbalancedUnit { id: String, label: String },

    #[error("unit `{id}` has more than one row for period `{label}`")]
    DuplicatePeriod { id: String, label: String },

    #[error("inconsistent static column `{column}` within unit `{id}`")]
    InconsistentStatic { id: String, column: String },

    #[error("no overlap in stratum `{stratum}` (n1 = {n1}, n0 = {n0})")]
    NoOverlap { stratum: String, n1: usize, n0: usize },

    #[error("rank-deficient design; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("too few rows: {rows} rows for {cols} columns")]
    TooFewRows { rows: usize, cols: usize },

    #[error("perfect separation in propensity model; stratify on the separating covariate instead")]
    Separation,

    #[error("logistic fit did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("propensity score {score} at unit {index} is outside (0, 1)")]
    ScoreOutOfRange { index: usize, score: f64 },

    #[error("{failed} of {total} replicates failed (limit 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("reference period reuse: `{0}` is both the reference and a post period")]
    ReferencePeriodReuse(String),

    #[error("placebo window overlaps the event window at `{0}`")]
    WindowOverlap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = FdidError> = std::result::Result<T, E>;
