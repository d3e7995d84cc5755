//! Confidence intervals for value and utility estimates: nonparametric
//! bootstrap (percentile) and stacked M-estimation (sandwich) Wald
//! intervals.

mod bootstrap;
mod sandwich;

pub use bootstrap::{bootstrap_ci, BootstrapConfig, BootstrapOutcome};
pub use sandwich::{sandwich_utility, sandwich_value, SandwichEstimator, SandwichResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an interval was produced, with its method-specific metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum CiMethod {
    BootstrapPercentile {
        /// Successful replicates behind the interval.
        replicates: usize,
        failed: usize,
    },
    SandwichWald {
        bread_condition: f64,
        meat_condition: f64,
    },
}

impl std::fmt::Display for CiMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CiMethod::BootstrapPercentile { .. } => f.write_str("bootstrap-percentile"),
            CiMethod::SandwichWald { .. } => f.write_str("sandwich-wald"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Standard error when the method provides one (sandwich always,
    /// bootstrap as the replicate standard deviation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(flatten)]
    pub method: CiMethod,
}

impl ConfidenceInterval {
    pub fn new(
        lower: f64,
        upper: f64,
        level: f64,
        se: Option<f64>,
        method: CiMethod,
    ) -> Result<Self> {
        if !(0.0 < level && level < 1.0) {
            return Err(Error::Estimator(format!(
                "interval level {level} outside (0,1)"
            )));
        }
        if !(lower <= upper) {
            return Err(Error::Estimator(format!(
                "interval bounds out of order: [{lower}, {upper}]"
            )));
        }
        Ok(ConfidenceInterval {
            lower,
            upper,
            level,
            se,
            method,
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}
