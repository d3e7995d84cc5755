use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset has 0 rows")]
    EmptyDataset,

    #[error("design error: {0}")]
    Design(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("positivity violation at row {row}: estimated propensity {propensity:e} below floor {floor:e}")]
    Positivity {
        row: usize,
        propensity: f64,
        floor: f64,
    },

    #[error("bootstrap unstable: {failed} of {total} replicates failed (limit 20%)")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("sandwich error: {0}")]
    Sandwich(String),

    #[error("singular bread matrix (1-norm condition estimate {condition:e})")]
    SingularBread { condition: f64 },

    #[error("rule parse error at line {line}, column {column}: {message}")]
    RuleParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
