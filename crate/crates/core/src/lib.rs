//! Estimation of the clinical utility of deterministic single-time-point
//! treatment regimes from tabular data.
//!
//! The crate provides the tabular data model and design builder ([`data`]),
//! the regression models behind the estimators ([`glm`]), treatment regimes
//! and a rule DSL plus a random-Fourier-feature regime learner ([`regimes`]),
//! the value and utility estimators ([`estimators`]), bootstrap and
//! M-estimation confidence intervals ([`inference`]), and a Monte Carlo
//! simulation lab with an exact enumeration oracle ([`simulation`]).

pub mod data;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod inference;
pub mod linalg;
pub mod numeric;
pub mod pipeline;
pub mod regimes;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
