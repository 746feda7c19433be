use thiserror::Error;

/// Errors raised across ingestion, estimation, model fitting and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(String),

    #[error("JSON error: {0}")]
    Json(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("header does not match schema: {0}")]
    HeaderMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("cannot parse {value:?} as a number at row {row}, column {column:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("non-finite value at row {row}, coordinate {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate points in {sample} sample: rows {first} and {second}")]
    Duplicate {
        sample: &'static str,
        first: usize,
        second: usize,
    },

    #[error("x row {x_row} coincides with y row {y_row}")]
    Coincident { x_row: usize, y_row: usize },

    #[error("zero nearest-neighbour distance for x row {0}")]
    ZeroDistance(usize),

    #[error("tied neighbour distances at x row {row}: k = {k}, l = {l}")]
    TiedDistances { row: usize, k: usize, l: usize },

    #[error("k = {k} exceeds the {available} eligible points")]
    NotEnoughPoints { k: usize, available: usize },

    #[error("divergence is infinite: {0}")]
    InfiniteDivergence(String),

    #[error("stratum {stratum} too small: {n} rows in x, {m} rows in y")]
    StratumTooSmall { stratum: String, n: usize, m: usize },

    #[error("{failures} of {total} subsampling replicates failed (limit {limit})")]
    TooManyFailures {
        failures: usize,
        total: usize,
        limit: usize,
    },

    #[error("degenerate spread: {0}")]
    DegenerateSpread(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("missing values not allowed: {0}")]
    MissingValues(String),
}

impl Error {
    /// True for errors caused by bad configuration or input files rather than
    /// by the numerics of an estimation run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Schema(_)
                | Error::HeaderMismatch(_)
                | Error::Empty(_)
                | Error::Parse { .. }
                | Error::UnknownColumn(_)
                | Error::InvalidArgument(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
