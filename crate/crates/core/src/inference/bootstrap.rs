//! Nonparametric bootstrap with percentile intervals.
//!
//! The resampling unit is the whole row, drawn with replacement at the
//! original total count. Resamples are represented as frequency-weight
//! vectors handed to the pipeline, which is equivalent to materializing the
//! resampled rows and lets pipelines reuse prebuilt design matrices. Each
//! replicate derives its RNG stream from (seed, replicate index), so results
//! do not depend on worker count or scheduling.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{percentile_sorted, sample_sd};
use crate::rng::derive_rng;

use super::{CiMethod, ConfidenceInterval};

const BOOT_TAG: u64 = 0x626f_6f74;

#[derive(Debug, Clone, Copy)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
    /// Run replicates on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 500,
            seed: 0,
            level: 0.95,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapOutcome {
    /// One interval per pipeline statistic.
    pub intervals: Vec<ConfidenceInterval>,
    /// Replicate standard deviation per statistic.
    pub se: Vec<f64>,
    pub effective: usize,
    pub failed: usize,
}

/// Draws one resample as frequency weights over `n_rows`, proportional to
/// `base` (uniform over rows when `base` is `None`), with the same total.
fn draw_weights(n_rows: usize, base: Option<&[f64]>, rng: &mut impl Rng) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(n_rows);
    let mut acc = 0.0;
    for i in 0..n_rows {
        acc += base.map_or(1.0, |b| b[i]);
        cumulative.push(acc);
    }
    let total = acc;
    let draws = total.round() as usize;
    let mut w = vec![0.0; n_rows];
    for _ in 0..draws {
        let u = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= u).min(n_rows - 1);
        w[idx] += 1.0;
    }
    w
}

/// Runs `pipeline` on `replicates` row resamples and returns percentile
/// intervals per statistic. The pipeline re-runs everything data-dependent;
/// replicates where it fails (or returns non-finite statistics) are dropped
/// and counted, and more than 20% failures is an error.
pub fn bootstrap_ci<F>(
    n_rows: usize,
    base_weights: Option<&[f64]>,
    n_stats: usize,
    pipeline: F,
    config: &BootstrapConfig,
) -> Result<BootstrapOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if n_rows == 0 || config.replicates == 0 {
        return Err(Error::Estimator(
            "bootstrap requires rows and replicates".into(),
        ));
    }
    if !(0.0 < config.level && config.level < 1.0) {
        return Err(Error::Estimator(format!(
            "interval level {} outside (0,1)",
            config.level
        )));
    }
    if let Some(b) = base_weights {
        if b.len() != n_rows {
            return Err(Error::Estimator("base weight length mismatch".into()));
        }
    }

    let run_one = |b: usize| -> Option<Vec<f64>> {
        let mut rng = derive_rng(config.seed, &[BOOT_TAG, b as u64]);
        let w = draw_weights(n_rows, base_weights, &mut rng);
        match pipeline(&w) {
            Ok(stats) if stats.len() == n_stats && stats.iter().all(|v| v.is_finite()) => {
                Some(stats)
            }
            _ => None,
        }
    };

    let results: Vec<Option<Vec<f64>>> = if config.parallel {
        (0..config.replicates)
            .into_par_iter()
            .map(run_one)
            .collect()
    } else {
        (0..config.replicates).map(run_one).collect()
    };

    let successes: Vec<&Vec<f64>> = results.iter().flatten().collect();
    let failed = config.replicates - successes.len();
    if failed * 5 > config.replicates {
        return Err(Error::BootstrapUnstable {
            failed,
            total: config.replicates,
        });
    }

    let alpha = 1.0 - config.level;
    let mut intervals = Vec::with_capacity(n_stats);
    let mut ses = Vec::with_capacity(n_stats);
    for s in 0..n_stats {
        let mut column: Vec<f64> = successes.iter().map(|r| r[s]).collect();
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lower = percentile_sorted(&column, alpha / 2.0);
        let upper = percentile_sorted(&column, 1.0 - alpha / 2.0);
        let se = sample_sd(&column);
        intervals.push(ConfidenceInterval::new(
            lower,
            upper,
            config.level,
            Some(se),
            CiMethod::BootstrapPercentile {
                replicates: successes.len(),
                failed,
            },
        )?);
        ses.push(se);
    }
    Ok(BootstrapOutcome {
        intervals,
        se: ses,
        effective: successes.len(),
        failed,
    })
}
