//! The Monte Carlo study: repeated sampling, estimation, interval
//! construction, and bias/SE/coverage aggregation against the oracle.
//!
//! Replications are embarrassingly parallel; each derives its RNG stream
//! from (master seed, setting, replication index) and the aggregation runs
//! in replication order with compensated sums, so the report is bit-identical
//! for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorId, IpwOptions};
use crate::inference::{bootstrap_ci, sandwich_utility, BootstrapConfig, SandwichEstimator};
use crate::numeric::{mean, sample_sd};
use crate::pipeline::{prepare, Comparator, PipelinePlan, PreparedPipeline, Side};
use crate::rng::mix_seed;

use super::{
    compress_to_patterns, pattern_dataset, sample_population, setting, SettingId,
    SimulationSetting, PATTERN_COUNT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethodKind {
    Bootstrap,
    Sandwich,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub setting: SettingId,
    pub n: usize,
    pub iterations: usize,
    pub bootstrap_replicates: usize,
    pub estimators: Vec<EstimatorId>,
    pub ci_methods: Vec<CiMethodKind>,
    pub level: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. The report is identical
    /// either way.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl MonteCarloConfig {
    pub fn new(setting: SettingId, n: usize, iterations: usize, seed: u64) -> MonteCarloConfig {
        MonteCarloConfig {
            setting,
            n,
            iterations,
            bootstrap_replicates: 500,
            estimators: EstimatorId::REGIME_ESTIMATORS.to_vec(),
            ci_methods: vec![CiMethodKind::Bootstrap],
            level: 0.95,
            seed,
            workers: None,
        }
    }
}

/// Per-estimator aggregate metrics on the utility scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorMetrics {
    pub estimator: EstimatorId,
    /// Replications that produced a point estimate.
    pub replications: usize,
    pub point_failures: usize,
    pub mean_estimate: f64,
    pub mean_value: f64,
    pub bias: f64,
    pub empirical_se: f64,
    pub mcse_bias: f64,
    pub mcse_se: f64,
    pub coverage_bootstrap: Option<f64>,
    pub mcse_coverage_bootstrap: Option<f64>,
    pub ci_failures_bootstrap: usize,
    pub coverage_sandwich: Option<f64>,
    pub mcse_coverage_sandwich: Option<f64>,
    pub ci_failures_sandwich: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub setting: SettingId,
    pub n: usize,
    pub iterations: usize,
    pub bootstrap_replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub oracle_utility: f64,
    pub oracle_regime_value: f64,
    pub oracle_soc: f64,
    pub metrics: Vec<EstimatorMetrics>,
}

struct RepOutcome {
    /// Utility and regime-value estimates per estimator; `None` = failed.
    point: Option<(Vec<f64>, Vec<f64>)>,
    boot: Option<Vec<(f64, f64)>>,
    sand: Vec<Option<(f64, f64)>>,
}

fn replicate(
    s: &SimulationSetting,
    prepared: &PreparedPipeline<'_>,
    config: &MonteCarloConfig,
    rep: usize,
) -> RepOutcome {
    let n_est = config.estimators.len();
    let failed = RepOutcome {
        point: None,
        boot: None,
        sand: vec![None; n_est],
    };
    let seed_rep = mix_seed(config.seed, &[s.id.tag(), rep as u64]);

    let Ok(ds) = sample_population(s, config.n, seed_rep) else {
        return failed;
    };
    let Ok(counts) = compress_to_patterns(&ds) else {
        return failed;
    };
    let Ok(run) = prepared.run(Some(&counts)) else {
        return failed;
    };
    let utilities = run.stats();
    let values: Vec<f64> = run
        .values
        .iter()
        .map(|per_regime| per_regime[0].value)
        .collect();

    let boot = if config.ci_methods.contains(&CiMethodKind::Bootstrap) {
        bootstrap_ci(
            PATTERN_COUNT,
            Some(&counts),
            utilities.len(),
            |w| prepared.run(Some(w)).map(|r| r.stats()),
            &BootstrapConfig {
                replicates: config.bootstrap_replicates,
                seed: mix_seed(seed_rep, &[0x6263]),
                level: config.level,
                parallel: false,
            },
        )
        .ok()
        .map(|out| {
            out.intervals
                .iter()
                .map(|ci| (ci.lower, ci.upper))
                .collect()
        })
    } else {
        None
    };

    let mut sand = vec![None; n_est];
    if config.ci_methods.contains(&CiMethodKind::Sandwich) {
        let opts = IpwOptions::default();
        for (e, &est) in config.estimators.iter().enumerate() {
            let side = match est {
                EstimatorId::IpwNb => {
                    run.models
                        .propensity_nb
                        .as_ref()
                        .map(|m| SandwichEstimator::IpwNb {
                            regime: &s.regime,
                            propensity: m,
                            opts,
                        })
                }
                EstimatorId::IpwB => {
                    run.models.propensity_b[0]
                        .as_ref()
                        .map(|m| SandwichEstimator::IpwB {
                            regime: &s.regime,
                            propensity: m,
                            opts,
                        })
                }
                EstimatorId::GcB => {
                    run.models.outcome_b[0]
                        .as_ref()
                        .map(|m| SandwichEstimator::GcB {
                            regime: &s.regime,
                            outcome: m,
                        })
                }
                EstimatorId::GcNb => {
                    run.models
                        .outcome_nb
                        .as_ref()
                        .map(|m| SandwichEstimator::GcNb {
                            regime: &s.regime,
                            outcome: m,
                        })
                }
                EstimatorId::SocMean => None,
            };
            if let Some(side) = side {
                sand[e] = sandwich_utility(
                    prepared.ds,
                    Some(&counts),
                    &side,
                    &SandwichEstimator::SocMean,
                    config.level,
                )
                .ok()
                .map(|r| (r.interval.lower, r.interval.upper));
            }
        }
    }

    RepOutcome {
        point: Some((utilities, values)),
        boot,
        sand,
    }
}

/// Runs the full study for one (setting, n) and aggregates the metrics.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloReport> {
    if config.iterations == 0 {
        return Err(Error::Simulation(
            "at least one replication required".into(),
        ));
    }
    for est in &config.estimators {
        if *est == EstimatorId::SocMean {
            return Err(Error::Simulation(
                "soc_mean is the comparison baseline, not a study estimator".into(),
            ));
        }
    }
    let s = setting(config.setting);
    let patterns = pattern_dataset();
    let plan = PipelinePlan {
        regimes: vec![s.regime.clone()],
        estimators: config.estimators.clone(),
        comparators: vec![Comparator {
            a: Side::Regime(0),
            b: Side::Soc,
        }],
        models: s.models.clone(),
        ipw: IpwOptions::default(),
    };
    let prepared = prepare(&patterns, &plan)?;

    let body = || -> Vec<RepOutcome> {
        (0..config.iterations)
            .into_par_iter()
            .map(|rep| replicate(&s, &prepared, config, rep))
            .collect()
    };
    let outcomes = match config.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Simulation(format!("worker pool: {e}")))?
            .install(body),
        None => body(),
    };

    let oracle_utility = s.oracle.utility_f64();
    let n_est = config.estimators.len();
    let mut metrics = Vec::with_capacity(n_est);
    for (e, &est) in config.estimators.iter().enumerate() {
        let mut estimates = Vec::new();
        let mut values = Vec::new();
        let mut boot_hits = 0usize;
        let mut boot_total = 0usize;
        let mut sand_hits = 0usize;
        let mut sand_total = 0usize;
        let mut point_failures = 0usize;
        for out in &outcomes {
            match &out.point {
                Some((utilities, vals)) => {
                    estimates.push(utilities[e]);
                    values.push(vals[e]);
                    if let Some(boot) = &out.boot {
                        boot_total += 1;
                        let (lo, hi) = boot[e];
                        if lo <= oracle_utility && oracle_utility <= hi {
                            boot_hits += 1;
                        }
                    }
                    if let Some((lo, hi)) = out.sand[e] {
                        sand_total += 1;
                        if lo <= oracle_utility && oracle_utility <= hi {
                            sand_hits += 1;
                        }
                    }
                }
                None => point_failures += 1,
            }
        }
        let r = estimates.len();
        let mean_estimate = if r > 0 { mean(&estimates) } else { f64::NAN };
        let empirical_se = if r > 1 {
            sample_sd(&estimates)
        } else {
            f64::NAN
        };
        let want_boot = config.ci_methods.contains(&CiMethodKind::Bootstrap);
        let want_sand = config.ci_methods.contains(&CiMethodKind::Sandwich);
        let coverage = |hits: usize, total: usize| -> (Option<f64>, Option<f64>) {
            if total == 0 {
                return (None, None);
            }
            let c = hits as f64 / total as f64;
            (Some(c), Some((c * (1.0 - c) / total as f64).sqrt()))
        };
        let (coverage_bootstrap, mcse_coverage_bootstrap) = coverage(boot_hits, boot_total);
        let (coverage_sandwich, mcse_coverage_sandwich) = coverage(sand_hits, sand_total);
        metrics.push(EstimatorMetrics {
            estimator: est,
            replications: r,
            point_failures,
            mean_estimate,
            mean_value: if r > 0 { mean(&values) } else { f64::NAN },
            bias: mean_estimate - oracle_utility,
            empirical_se,
            mcse_bias: if r > 0 {
                empirical_se / (r as f64).sqrt()
            } else {
                f64::NAN
            },
            mcse_se: if r > 1 {
                empirical_se / (2.0 * (r as f64 - 1.0)).sqrt()
            } else {
                f64::NAN
            },
            coverage_bootstrap,
            mcse_coverage_bootstrap,
            ci_failures_bootstrap: if want_boot { r - boot_total } else { 0 },
            coverage_sandwich,
            mcse_coverage_sandwich,
            ci_failures_sandwich: if want_sand { r - sand_total } else { 0 },
        });
    }

    Ok(MonteCarloReport {
        setting: config.setting,
        n: config.n,
        iterations: config.iterations,
        bootstrap_replicates: config.bootstrap_replicates,
        level: config.level,
        seed: config.seed,
        oracle_utility,
        oracle_regime_value: s.oracle.regime_f64(),
        oracle_soc: s.oracle.soc_f64(),
        metrics,
    })
}

impl MonteCarloReport {
    /// Flat CSV mirroring the usual simulation-table layout (bias ×10²,
    /// SE ×10¹, coverage) plus Monte Carlo standard errors and failure
    /// counts.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "setting,n,estimator,bias,bias_x100,empirical_se,se_x10,coverage_bootstrap,\
             coverage_sandwich,mcse_bias,mcse_se,mcse_coverage_bootstrap,mcse_coverage_sandwich,\
             point_failures,ci_failures_bootstrap,ci_failures_sandwich,replications,\
             mean_estimate,oracle_utility\n",
        );
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        for m in &self.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.setting,
                self.n,
                m.estimator,
                m.bias,
                m.bias * 100.0,
                m.empirical_se,
                m.empirical_se * 10.0,
                opt(m.coverage_bootstrap),
                opt(m.coverage_sandwich),
                m.mcse_bias,
                m.mcse_se,
                opt(m.mcse_coverage_bootstrap),
                opt(m.mcse_coverage_sandwich),
                m.point_failures,
                m.ci_failures_bootstrap,
                m.ci_failures_sandwich,
                m.replications,
                m.mean_estimate,
                self.oracle_utility,
            ));
        }
        out
    }

    pub fn metric(&self, est: EstimatorId) -> Option<&EstimatorMetrics> {
        self.metrics.iter().find(|m| m.estimator == est)
    }
}
