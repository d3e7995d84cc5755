//! Learned regimes via random Fourier features.
//!
//! Covariates are numerically encoded and standardized with training-set
//! statistics, mapped through a seeded random cosine feature bank, and each
//! treatment arm gets a ridge regression of the (arm-mean-centered) outcome
//! on the features. The learned regime assigns the arm with the best
//! predicted outcome; predictions collapse to the arm means as the ridge
//! penalty grows. A learned regime is frozen: everything needed to evaluate
//! it is serialized, and evaluation never refits.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, CovariateKind, Dataset};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::derive_rng;

/// How one encoded input column is produced from a covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnEncoding {
    /// Numeric column or numeric view of a categorical column.
    Numeric { column: String },
    /// Indicator of one level of a categorical column without numeric view.
    Indicator { column: String, level: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub encoding: ColumnEncoding,
    pub mean: f64,
    pub sd: f64,
}

/// Frozen random-Fourier-feature scorer: feature bank, standardization, and
/// per-arm ridge coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffScorer {
    pub feature_count: usize,
    pub bandwidth: f64,
    pub ridge: f64,
    pub seed: u64,
    pub columns: Vec<EncodedColumn>,
    /// feature_count × d frequency matrix, row-major.
    pub frequencies: Vec<Vec<f64>>,
    pub phases: Vec<f64>,
    /// Treatment labels in tie-break order (declared order at training).
    pub arms: Vec<String>,
    pub arm_means: Vec<f64>,
    pub arm_coefs: Vec<Vec<f64>>,
    /// When true the regime minimizes the predicted outcome.
    pub smaller_is_better: bool,
}

impl RffScorer {
    /// Featurize one encoded+standardized input vector. Every entry lies in
    /// [-sqrt(2/D), sqrt(2/D)].
    pub fn featurize(&self, x: &[f64]) -> Vec<f64> {
        let scale = (2.0 / self.feature_count as f64).sqrt();
        self.frequencies
            .iter()
            .zip(&self.phases)
            .map(|(w, &b)| {
                let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                scale * (dot + b).cos()
            })
            .collect()
    }

    /// Predicted outcome per arm for one input vector.
    pub fn predict_arms(&self, x: &[f64]) -> Vec<f64> {
        let phi = self.featurize(x);
        self.arm_means
            .iter()
            .zip(&self.arm_coefs)
            .map(|(&m, coefs)| m + coefs.iter().zip(&phi).map(|(c, f)| c * f).sum::<f64>())
            .collect()
    }

    fn encode_row(&self, ds: &Dataset, row: usize) -> Result<Vec<f64>> {
        self.columns
            .iter()
            .map(|col| {
                let raw = match &col.encoding {
                    ColumnEncoding::Numeric { column } => {
                        let value = ds.record(row).get(column).ok_or_else(|| {
                            Error::Regime(format!(
                                "learned regime references unknown column {column:?}"
                            ))
                        })?;
                        value.as_numeric().ok_or_else(|| {
                            Error::Regime(format!("column {column:?} has no numeric view"))
                        })?
                    }
                    ColumnEncoding::Indicator { column, level } => {
                        let value = ds.record(row).get(column).ok_or_else(|| {
                            Error::Regime(format!(
                                "learned regime references unknown column {column:?}"
                            ))
                        })?;
                        match value {
                            crate::data::Value::Categorical { label, .. } => {
                                f64::from(label == level)
                            }
                            crate::data::Value::Numeric(_) => {
                                return Err(Error::Regime(format!(
                                    "column {column:?} is numeric but the regime expects levels"
                                )))
                            }
                        }
                    }
                };
                Ok((raw - col.mean) / col.sd)
            })
            .collect()
    }

    /// Predicted outcome per arm for every row of `ds` (n × arms, columns
    /// in the scorer's arm order).
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
        (0..ds.n())
            .map(|row| {
                let x = self.encode_row(ds, row)?;
                Ok(self.predict_arms(&x))
            })
            .collect()
    }

    /// Arm assignment (treatment level indices) for every row of `ds`.
    pub fn assign(&self, ds: &Dataset) -> Result<Vec<u32>> {
        let levels = ds.treatment_levels();
        let arm_idx: Vec<u32> = self
            .arms
            .iter()
            .map(|a| {
                levels
                    .iter()
                    .position(|l| l == a)
                    .map(|i| i as u32)
                    .ok_or_else(|| {
                        Error::Regime(format!(
                            "learned regime arm {a:?} is not a declared treatment level"
                        ))
                    })
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(ds.n());
        for row in 0..ds.n() {
            let x = self.encode_row(ds, row)?;
            let preds = self.predict_arms(&x);
            let mut best = 0usize;
            for (a, &p) in preds.iter().enumerate() {
                let better = if self.smaller_is_better {
                    p < preds[best]
                } else {
                    p > preds[best]
                };
                if better {
                    best = a;
                }
            }
            out.push(arm_idx[best]);
        }
        Ok(out)
    }
}

/// Hyperparameters for [`learn_rff_regime`]. `bandwidth: None` selects the
/// median heuristic: the median pairwise Euclidean distance between
/// standardized training points (an exact median up to 4096 rows, a seeded
/// subsample beyond).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RffConfig {
    pub feature_count: usize,
    pub bandwidth: Option<f64>,
    pub ridge: f64,
    pub seed: u64,
    pub smaller_is_better: bool,
}

impl Default for RffConfig {
    fn default() -> Self {
        RffConfig {
            feature_count: 200,
            bandwidth: None,
            ridge: 1.0,
            seed: 0,
            smaller_is_better: true,
        }
    }
}

const MEDIAN_SUBSAMPLE: usize = 4096;

/// Learns a regime from `train` by per-arm ridge regression on random
/// Fourier features. Requires at least `max(2, D/10)` rows per arm.
pub fn learn_rff_regime(train: &Dataset, config: &RffConfig) -> Result<crate::regimes::Regime> {
    let d_features = config.feature_count;
    if d_features == 0 {
        return Err(Error::Regime("feature count must be positive".into()));
    }
    let arms = train.treatment_levels().to_vec();
    let k = arms.len();
    let n = train.n();

    let min_rows = std::cmp::max(2, d_features.div_ceil(10));
    let mut arm_rows: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &t) in train.t_idx().iter().enumerate() {
        arm_rows[t as usize].push(i);
    }
    for (a, rows) in arm_rows.iter().enumerate() {
        if rows.len() < min_rows {
            return Err(Error::Regime(format!(
                "arm {:?} has {} training rows; at least {min_rows} required",
                arms[a],
                rows.len()
            )));
        }
    }

    // numeric encoding + train standardization
    let mut raw_columns: Vec<(ColumnEncoding, Vec<f64>)> = Vec::new();
    for decl in &train.schema().covariates {
        match &decl.kind {
            CovariateKind::Numeric => {
                raw_columns.push((
                    ColumnEncoding::Numeric {
                        column: decl.name.clone(),
                    },
                    train.numeric_view(&decl.name)?,
                ));
            }
            CovariateKind::Categorical {
                levels,
                numeric_view,
            } => {
                if *numeric_view {
                    raw_columns.push((
                        ColumnEncoding::Numeric {
                            column: decl.name.clone(),
                        },
                        train.numeric_view(&decl.name)?,
                    ));
                } else {
                    let data = match train.column(&decl.name) {
                        Some(ColumnData::Categorical(v)) => v,
                        _ => unreachable!(),
                    };
                    for (li, level) in levels.iter().enumerate() {
                        let col: Vec<f64> =
                            data.iter().map(|&v| f64::from(v as usize == li)).collect();
                        raw_columns.push((
                            ColumnEncoding::Indicator {
                                column: decl.name.clone(),
                                level: level.clone(),
                            },
                            col,
                        ));
                    }
                }
            }
        }
    }
    if raw_columns.is_empty() {
        return Err(Error::Regime("no covariates to learn from".into()));
    }

    let mut columns = Vec::with_capacity(raw_columns.len());
    let dim = raw_columns.len();
    let mut z = Array2::<f64>::zeros((n, dim));
    for (j, (encoding, col)) in raw_columns.into_iter().enumerate() {
        let mean = crate::numeric::mean(&col);
        let mut sd = crate::numeric::sample_sd(&col);
        if sd == 0.0 {
            sd = 1.0;
        }
        for i in 0..n {
            z[(i, j)] = (col[i] - mean) / sd;
        }
        columns.push(EncodedColumn { encoding, mean, sd });
    }

    let bandwidth = match config.bandwidth {
        Some(b) if b > 0.0 => b,
        Some(b) => {
            return Err(Error::Regime(format!(
                "bandwidth must be positive, got {b}"
            )))
        }
        None => median_pairwise_distance(&z, config.seed),
    };

    // feature bank: frequencies N(0, 1/sigma^2), phases U[0, 2*pi)
    let mut rng = derive_rng(config.seed, &[0x7266_6662]);
    let normal = Normal::new(0.0, 1.0 / bandwidth).expect("positive sd");
    let frequencies: Vec<Vec<f64>> = (0..d_features)
        .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let phases: Vec<f64> = (0..d_features)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();

    let scorer_shell = RffScorer {
        feature_count: d_features,
        bandwidth,
        ridge: config.ridge,
        seed: config.seed,
        columns,
        frequencies,
        phases,
        arms: arms.clone(),
        arm_means: vec![0.0; k],
        arm_coefs: vec![vec![0.0; d_features]; k],
        smaller_is_better: config.smaller_is_better,
    };

    // per-arm ridge on centered outcomes
    let y = train.y();
    let mut arm_means = Vec::with_capacity(k);
    let mut arm_coefs = Vec::with_capacity(k);
    for rows in &arm_rows {
        let m = rows.len();
        let mut phi = Array2::<f64>::zeros((m, d_features));
        for (r, &row) in rows.iter().enumerate() {
            let x: Vec<f64> = (0..dim).map(|j| z[(row, j)]).collect();
            let f = scorer_shell.featurize(&x);
            for (c, &v) in f.iter().enumerate() {
                phi[(r, c)] = v;
            }
        }
        let ybar = rows.iter().map(|&r| y[r]).sum::<f64>() / m as f64;
        let mut rhs = Array1::<f64>::zeros(d_features);
        for (r, &row) in rows.iter().enumerate() {
            let resid = y[row] - ybar;
            for c in 0..d_features {
                rhs[c] += phi[(r, c)] * resid;
            }
        }
        let mut gram = phi.t().dot(&phi);
        for c in 0..d_features {
            gram[(c, c)] += config.ridge;
        }
        let beta = linalg::cholesky_solve(&gram, &rhs)
            .ok_or_else(|| Error::Regime("ridge system not positive definite".into()))?;
        arm_means.push(ybar);
        arm_coefs.push(beta.to_vec());
    }

    let scorer = RffScorer {
        arm_means,
        arm_coefs,
        ..scorer_shell
    };
    Ok(crate::regimes::Regime {
        id: "rff".into(),
        kind: crate::regimes::RegimeKind::Learned(scorer),
    })
}

fn median_pairwise_distance(z: &Array2<f64>, seed: u64) -> f64 {
    let n = z.nrows();
    let rows: Vec<usize> = if n <= MEDIAN_SUBSAMPLE {
        (0..n).collect()
    } else {
        let mut rng = derive_rng(seed, &[0x6d65_6469, 0x616e]);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        idx.truncate(MEDIAN_SUBSAMPLE);
        idx
    };
    let m = rows.len();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for b in (a + 1)..m {
            let mut s = 0.0;
            for j in 0..z.ncols() {
                let d = z[(rows[a], j)] - z[(rows[b], j)];
                s += d * d;
            }
            dists.push(s.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = crate::numeric::percentile_sorted(&dists, 0.5);
    if med > 0.0 {
        med
    } else {
        1.0
    }
}
