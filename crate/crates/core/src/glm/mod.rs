//! Regression models used by the value estimators: linear least squares,
//! binary logistic, and multinomial logistic.
//!
//! Linear models solve via Householder QR. The likelihood models run Newton
//! with step-halving on the log-likelihood, stopping when the gradient
//! max-norm falls below 1e-8 or after 100 iterations; once converged, one
//! polishing step sharpens saturated fits to near machine precision.
//! Exactly collinear design columns (including all-zero columns from empty
//! cells) are dropped with a warning recorded in the convergence report;
//! their coefficients are zero so predictions use the full design width.
//! Complete separation (a coefficient beyond ±15 while the gradient has not
//! vanished) flags the model non-converged but leaves predictions usable.

mod likelihood;

pub use likelihood::{
    linear_loglik, linear_score, logistic_loglik, logistic_score, multinomial_loglik,
    multinomial_score,
};

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{build_design, Dataset, Design, DesignSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::regimes::Regime;

pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
pub const SEPARATION_COEF: f64 = 15.0;
const COLLINEARITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Linear,
    Logistic,
    /// Softmax regression; the first declared level is the reference.
    Multinomial {
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub separation: bool,
    /// Every accepted Newton step kept the log-likelihood non-decreasing.
    pub monotone_ascent: bool,
    pub dropped_columns: Vec<String>,
    #[serde(default)]
    pub dropped_indices: Vec<usize>,
}

impl ConvergenceReport {
    fn exact() -> ConvergenceReport {
        ConvergenceReport {
            iterations: 0,
            grad_norm: 0.0,
            converged: true,
            separation: false,
            monotone_ascent: true,
            dropped_columns: Vec::new(),
            dropped_indices: Vec::new(),
        }
    }
}

/// A fitted regression model. `coefficients` has one row for linear and
/// logistic models and `k - 1` rows (non-reference levels, declared order)
/// for multinomial models; columns match the design width, with zeros at
/// dropped columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    #[serde(flatten)]
    pub family: Family,
    #[serde(with = "matrix_serde")]
    pub coefficients: Array2<f64>,
    pub term_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSpec>,
    pub convergence: ConvergenceReport,
}

mod matrix_serde {
    use ndarray::Array2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged coefficient matrix"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec((nrows, ncols), flat).map_err(serde::de::Error::custom)
    }
}

/// Model predictions: real values (linear), event probabilities (logistic),
/// or per-level probabilities (multinomial, columns in declared level order).
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Values(Vec<f64>),
    Probabilities(Vec<f64>),
    LevelProbabilities(Array2<f64>),
}

impl Predictions {
    pub fn into_values(self) -> Vec<f64> {
        match self {
            Predictions::Values(v) | Predictions::Probabilities(v) => v,
            Predictions::LevelProbabilities(_) => {
                panic!("multinomial predictions are per level")
            }
        }
    }
}

impl FittedModel {
    /// Builds a model from known parameters, e.g. a true propensity supplied
    /// directly rather than fitted.
    pub fn from_parts(
        family: Family,
        coefficients: Array2<f64>,
        term_names: Vec<String>,
    ) -> FittedModel {
        FittedModel {
            family,
            coefficients,
            term_names,
            design: None,
            convergence: ConvergenceReport::exact(),
        }
    }

    pub fn width(&self) -> usize {
        self.coefficients.ncols()
    }

    /// Column indices that survived collinearity pruning; coefficients at
    /// dropped indices are identically zero.
    pub fn retained_indices(&self) -> Vec<usize> {
        (0..self.width())
            .filter(|j| !self.convergence.dropped_indices.contains(j))
            .collect()
    }

    /// Whether the parameters were estimated on data (as opposed to injected
    /// via [`FittedModel::from_parts`]). Fitted models contribute score
    /// equations to the sandwich variance; injected ones are treated as
    /// known.
    pub fn is_fitted(&self) -> bool {
        self.convergence.iterations > 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<FittedModel> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Per-row softmax probabilities for a coefficient matrix with implicit
/// reference level 0. Output is n × k; each row sums to 1 within 1e-12.
pub fn softmax_probabilities(coefficients: &Array2<f64>, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let k = coefficients.nrows() + 1;
    let mut out = Array2::<f64>::zeros((n, k));
    let eta = x.dot(&coefficients.t()); // n × (k-1)
    for i in 0..n {
        let mut max = 0.0f64;
        for l in 0..k - 1 {
            max = max.max(eta[(i, l)]);
        }
        let mut denom = (-max).exp();
        out[(i, 0)] = denom;
        for l in 0..k - 1 {
            let e = (eta[(i, l)] - max).exp();
            out[(i, l + 1)] = e;
            denom += e;
        }
        for l in 0..k {
            out[(i, l)] /= denom;
        }
    }
    out
}

/// Model predictions for a design matrix with matching width.
pub fn predict(model: &FittedModel, x: ArrayView2<'_, f64>) -> Result<Predictions> {
    if x.ncols() != model.width() {
        return Err(Error::Fit(format!(
            "design width {} does not match model width {}",
            x.ncols(),
            model.width()
        )));
    }
    match &model.family {
        Family::Linear => {
            let beta = model.coefficients.row(0).to_owned();
            Ok(Predictions::Values(x.dot(&beta).to_vec()))
        }
        Family::Logistic => {
            let beta = model.coefficients.row(0).to_owned();
            Ok(Predictions::Probabilities(
                x.dot(&beta).iter().map(|&e| sigmoid(e)).collect(),
            ))
        }
        Family::Multinomial { .. } => Ok(Predictions::LevelProbabilities(softmax_probabilities(
            &model.coefficients,
            x,
        ))),
    }
}

fn validate_weights(n: usize, w: Option<&[f64]>) -> Result<()> {
    if let Some(w) = w {
        if w.len() != n {
            return Err(Error::Fit("weight vector length mismatch".into()));
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Fit("weights must be finite and non-negative".into()));
        }
    }
    Ok(())
}

fn weight_at(w: Option<&[f64]>, i: usize) -> f64 {
    w.map_or(1.0, |w| w[i])
}

struct PrunedDesign {
    xr: Array2<f64>,
    retained: Vec<usize>,
    dropped: Vec<usize>,
    dropped_names: Vec<String>,
}

fn prune(x: ArrayView2<'_, f64>, w: Option<&[f64]>, names: Option<&[String]>) -> PrunedDesign {
    let (n, p) = x.dim();
    let mut xw = x.to_owned();
    if let Some(w) = w {
        for i in 0..n {
            let s = w[i].sqrt();
            for j in 0..p {
                xw[(i, j)] *= s;
            }
        }
    }
    let (retained, dropped) = linalg::prune_collinear(xw.view(), COLLINEARITY_TOLERANCE);
    let mut xr = Array2::<f64>::zeros((n, retained.len()));
    for (jj, &j) in retained.iter().enumerate() {
        for i in 0..n {
            xr[(i, jj)] = x[(i, j)];
        }
    }
    let dropped_names = dropped
        .iter()
        .map(|&j| names.map_or_else(|| format!("x{j}"), |ns| ns[j].clone()))
        .collect();
    PrunedDesign {
        xr,
        retained,
        dropped,
        dropped_names,
    }
}

fn embed(full_width: usize, retained: &[usize], rows: &[Array1<f64>]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), full_width));
    for (r, row) in rows.iter().enumerate() {
        for (jj, &j) in retained.iter().enumerate() {
            out[(r, j)] = row[jj];
        }
    }
    out
}

fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

/// Ordinary least squares.
pub fn fit_linear(x: &Array2<f64>, y: &[f64]) -> Result<FittedModel> {
    fit_linear_named(x, y, None, None)
}

/// Least squares with frequency weights.
pub fn fit_linear_weighted(x: &Array2<f64>, y: &[f64], w: &[f64]) -> Result<FittedModel> {
    fit_linear_named(x, y, Some(w), None)
}

pub fn fit_linear_named(
    x: &Array2<f64>,
    y: &[f64],
    w: Option<&[f64]>,
    names: Option<&[String]>,
) -> Result<FittedModel> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::Fit("response length mismatch".into()));
    }
    validate_weights(n, w)?;
    let pruned = prune(x.view(), w, names);
    let r = pruned.retained.len();
    if r == 0 {
        return Err(Error::Fit(format!(
            "design has no usable columns; dropped: {}",
            pruned.dropped_names.join(", ")
        )));
    }
    let effective_n = w.map_or(n, |w| w.iter().filter(|&&v| v > 0.0).count());
    if effective_n < r {
        return Err(Error::Fit(format!(
            "{} rows for {} retained columns after dropping [{}]",
            effective_n,
            r,
            pruned.dropped_names.join(", ")
        )));
    }
    let mut xw = pruned.xr.clone();
    let mut yw = Array1::from_vec(y.to_vec());
    if let Some(w) = w {
        for i in 0..n {
            let s = w[i].sqrt();
            for j in 0..r {
                xw[(i, j)] *= s;
            }
            yw[i] *= s;
        }
    }
    let beta = linalg::lstsq(xw.view(), yw.view())
        .ok_or_else(|| Error::Fit("rank-deficient design after pruning".into()))?;
    let coefficients = embed(p, &pruned.retained, &[beta]);
    Ok(FittedModel {
        family: Family::Linear,
        coefficients,
        term_names: names.map_or_else(|| default_names(p), |ns| ns.to_vec()),
        design: None,
        convergence: ConvergenceReport {
            iterations: 1,
            grad_norm: 0.0,
            converged: true,
            separation: false,
            monotone_ascent: true,
            dropped_columns: pruned.dropped_names,
            dropped_indices: pruned.dropped,
        },
    })
}

// ---------------------------------------------------------------------------
// logistic
// ---------------------------------------------------------------------------

/// Binary logistic regression by Newton's method with step-halving.
pub fn fit_logistic(x: &Array2<f64>, y: &[f64]) -> Result<FittedModel> {
    fit_logistic_named(x, y, None, None)
}

pub fn fit_logistic_weighted(x: &Array2<f64>, y: &[f64], w: &[f64]) -> Result<FittedModel> {
    fit_logistic_named(x, y, Some(w), None)
}

pub fn fit_logistic_named(
    x: &Array2<f64>,
    y: &[f64],
    w: Option<&[f64]>,
    names: Option<&[String]>,
) -> Result<FittedModel> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::Fit("response length mismatch".into()));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Fit("logistic response must be 0/1".into()));
    }
    validate_weights(n, w)?;
    let pruned = prune(x.view(), w, names);
    let r = pruned.retained.len();
    if r == 0 {
        return Err(Error::Fit(format!(
            "design has no usable columns; dropped: {}",
            pruned.dropped_names.join(", ")
        )));
    }
    let xr = &pruned.xr;

    let loglik = |beta: &Array1<f64>| likelihood::logistic_loglik_internal(xr, y, w, beta);
    let gradient = |beta: &Array1<f64>| -> (Array1<f64>, f64) {
        let g = likelihood::logistic_score_internal(xr, y, w, beta);
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (g, gnorm)
    };
    let hessian = |beta: &Array1<f64>| -> Array2<f64> {
        let eta = xr.dot(beta);
        let mut h = Array2::<f64>::zeros((r, r));
        for i in 0..n {
            let wi = weight_at(w, i);
            if wi == 0.0 {
                continue;
            }
            let pi = sigmoid(eta[i]);
            let s = wi * pi * (1.0 - pi);
            for a in 0..r {
                let xa = xr[(i, a)] * s;
                for b in a..r {
                    h[(a, b)] += xa * xr[(i, b)];
                }
            }
        }
        for a in 0..r {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h
    };

    let newton = run_newton(r, loglik, gradient, hessian)?;
    let coefficients = embed(p, &pruned.retained, &[newton.beta]);
    Ok(FittedModel {
        family: Family::Logistic,
        coefficients,
        term_names: names.map_or_else(|| default_names(p), |ns| ns.to_vec()),
        design: None,
        convergence: ConvergenceReport {
            iterations: newton.iterations,
            grad_norm: newton.grad_norm,
            converged: newton.converged,
            separation: newton.separation,
            monotone_ascent: newton.monotone,
            dropped_columns: pruned.dropped_names,
            dropped_indices: pruned.dropped,
        },
    })
}

// ---------------------------------------------------------------------------
// multinomial
// ---------------------------------------------------------------------------

/// Multinomial (softmax) regression over `levels`, reference = first level.
pub fn fit_multinomial(x: &Array2<f64>, t_idx: &[u32], levels: &[String]) -> Result<FittedModel> {
    fit_multinomial_named(x, t_idx, levels, None, None)
}

pub fn fit_multinomial_weighted(
    x: &Array2<f64>,
    t_idx: &[u32],
    levels: &[String],
    w: &[f64],
) -> Result<FittedModel> {
    fit_multinomial_named(x, t_idx, levels, Some(w), None)
}

pub fn fit_multinomial_named(
    x: &Array2<f64>,
    t_idx: &[u32],
    levels: &[String],
    w: Option<&[f64]>,
    names: Option<&[String]>,
) -> Result<FittedModel> {
    let (n, p) = x.dim();
    let k = levels.len();
    if k < 2 {
        return Err(Error::Fit("multinomial requires at least 2 levels".into()));
    }
    if t_idx.len() != n {
        return Err(Error::Fit("response length mismatch".into()));
    }
    if t_idx.iter().any(|&t| t as usize >= k) {
        return Err(Error::Fit("treatment index out of range".into()));
    }
    validate_weights(n, w)?;
    let mut counts = vec![0.0f64; k];
    for (i, &t) in t_idx.iter().enumerate() {
        counts[t as usize] += weight_at(w, i);
    }
    if let Some(absent) = counts.iter().position(|&c| c == 0.0) {
        return Err(Error::Fit(format!(
            "treatment level {:?} absent from data",
            levels[absent]
        )));
    }

    let pruned = prune(x.view(), w, names);
    let r = pruned.retained.len();
    if r == 0 {
        return Err(Error::Fit(format!(
            "design has no usable columns; dropped: {}",
            pruned.dropped_names.join(", ")
        )));
    }
    let xr = &pruned.xr;
    let q = (k - 1) * r;

    // flat parameter layout: level-major, [level 1..k-1] × [column 0..r-1]
    let probs = |beta: &Array1<f64>| -> Array2<f64> {
        let bm = Array2::from_shape_fn((k - 1, r), |(l, j)| beta[l * r + j]);
        softmax_probabilities(&bm, xr.view())
    };
    let loglik =
        move |beta: &Array1<f64>| likelihood::multinomial_loglik_internal(xr, t_idx, k, w, beta);
    let gradient = |beta: &Array1<f64>| -> (Array1<f64>, f64) {
        let g = likelihood::multinomial_score_internal(xr, t_idx, k, w, beta);
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (g, gnorm)
    };
    let hessian = |beta: &Array1<f64>| -> Array2<f64> {
        let pr = probs(beta);
        let mut h = Array2::<f64>::zeros((q, q));
        for i in 0..n {
            let wi = weight_at(w, i);
            if wi == 0.0 {
                continue;
            }
            for l in 1..k {
                for m in l..k {
                    let wlm = if l == m {
                        wi * pr[(i, l)] * (1.0 - pr[(i, l)])
                    } else {
                        -wi * pr[(i, l)] * pr[(i, m)]
                    };
                    if wlm == 0.0 {
                        continue;
                    }
                    let bl = (l - 1) * r;
                    let bm = (m - 1) * r;
                    for a in 0..r {
                        let xa = xr[(i, a)] * wlm;
                        for b in 0..r {
                            h[(bl + a, bm + b)] += xa * xr[(i, b)];
                        }
                    }
                }
            }
        }
        // mirror the upper block triangle
        for l in 1..k {
            for m in (l + 1)..k {
                let bl = (l - 1) * r;
                let bm = (m - 1) * r;
                for a in 0..r {
                    for b in 0..r {
                        h[(bm + b, bl + a)] = h[(bl + a, bm + b)];
                    }
                }
            }
        }
        h
    };

    let newton = run_newton(q, loglik, gradient, hessian)?;
    let rows: Vec<Array1<f64>> = (0..k - 1)
        .map(|l| Array1::from_iter((0..r).map(|j| newton.beta[l * r + j])))
        .collect();
    let coefficients = embed(p, &pruned.retained, &rows);
    Ok(FittedModel {
        family: Family::Multinomial {
            levels: levels.to_vec(),
        },
        coefficients,
        term_names: names.map_or_else(|| default_names(p), |ns| ns.to_vec()),
        design: None,
        convergence: ConvergenceReport {
            iterations: newton.iterations,
            grad_norm: newton.grad_norm,
            converged: newton.converged,
            separation: newton.separation,
            monotone_ascent: newton.monotone,
            dropped_columns: pruned.dropped_names,
            dropped_indices: pruned.dropped,
        },
    })
}

// ---------------------------------------------------------------------------
// Newton core
// ---------------------------------------------------------------------------

struct NewtonOutcome {
    beta: Array1<f64>,
    iterations: usize,
    grad_norm: f64,
    converged: bool,
    separation: bool,
    monotone: bool,
}

fn run_newton(
    dim: usize,
    loglik: impl Fn(&Array1<f64>) -> f64,
    gradient: impl Fn(&Array1<f64>) -> (Array1<f64>, f64),
    hessian: impl Fn(&Array1<f64>) -> Array2<f64>,
) -> Result<NewtonOutcome> {
    let mut beta = Array1::<f64>::zeros(dim);
    let mut ll = loglik(&beta);
    if !ll.is_finite() {
        return Err(Error::Fit("non-finite log-likelihood at start".into()));
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut separation = false;
    let mut monotone = true;
    let mut polish_done = false;

    loop {
        let (g, gnorm) = gradient(&beta);
        if gnorm < GRADIENT_TOLERANCE {
            converged = true;
            if polish_done || iterations >= MAX_ITERATIONS {
                break;
            }
            polish_done = true;
        } else if beta.iter().any(|b| b.abs() > SEPARATION_COEF) {
            separation = true;
            break;
        }
        if iterations >= MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let mut h = hessian(&beta);
        let mut delta = None;
        // ridge fallback keeps Newton moving when the curvature degenerates
        // near a boundary (probabilities collapsing to 0 or 1)
        let mut ridge = 0.0;
        for _ in 0..16 {
            if ridge > 0.0 {
                for j in 0..dim {
                    h[(j, j)] += ridge;
                }
            }
            if let Some(d) = linalg::cholesky_solve(&h, &g) {
                delta = Some(d);
                break;
            }
            let trace: f64 = (0..dim).map(|j| h[(j, j)]).sum();
            ridge = if ridge == 0.0 {
                (trace / dim as f64).max(1e-300) * 1e-10
            } else {
                ridge * 100.0
            };
        }
        let delta = match delta {
            Some(d) => d,
            None => break, // hopeless curvature; report non-converged state
        };

        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &(&delta * lam);
            let ll_new = loglik(&candidate);
            if ll_new.is_finite() && ll_new >= ll - 1e-10 * (1.0 + ll.abs()) {
                if ll_new < ll {
                    monotone = false;
                }
                beta = candidate;
                ll = ll_new;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if !accepted {
            break; // no ascent direction left at this point
        }
    }

    let (_, grad_norm) = gradient(&beta);
    if grad_norm < GRADIENT_TOLERANCE {
        converged = true;
    }
    Ok(NewtonOutcome {
        beta,
        iterations,
        grad_norm,
        converged,
        separation,
        monotone,
    })
}

// ---------------------------------------------------------------------------
// design-level fitting
// ---------------------------------------------------------------------------

/// What a design-level fit models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTarget {
    /// Outcome regression, linear link.
    OutcomeLinear,
    /// Outcome regression, logistic link (binary y required).
    OutcomeLogistic,
    /// Multinomial propensity of the observed treatment.
    TreatmentMultinomial,
    /// Logistic propensity of the regime-concordance indicator.
    ConcordanceLogistic,
}

/// Builds the design for `spec` and fits the requested model, recording the
/// spec and term names in the result.
pub fn fit_model(
    ds: &Dataset,
    spec: &DesignSpec,
    regime: Option<&Regime>,
    target: ModelTarget,
    weights: Option<&[f64]>,
) -> Result<FittedModel> {
    let design = build_design(ds, spec, regime)?;
    fit_model_on(ds, &design, spec, regime, target, weights)
}

/// [`fit_model`] with a prebuilt design (the design must correspond to
/// `spec`; reusing it avoids rebuilding in resampling loops).
pub fn fit_model_on(
    ds: &Dataset,
    design: &Design,
    spec: &DesignSpec,
    regime: Option<&Regime>,
    target: ModelTarget,
    weights: Option<&[f64]>,
) -> Result<FittedModel> {
    let names = Some(design.names.as_slice());
    let mut model = match target {
        ModelTarget::OutcomeLinear => fit_linear_named(&design.x, ds.y(), weights, names)?,
        ModelTarget::OutcomeLogistic => {
            if !ds.y_is_binary() {
                return Err(Error::Fit(
                    "logistic outcome model requires binary y".into(),
                ));
            }
            fit_logistic_named(&design.x, ds.y(), weights, names)?
        }
        ModelTarget::TreatmentMultinomial => {
            fit_multinomial_named(&design.x, ds.t_idx(), ds.treatment_levels(), weights, names)?
        }
        ModelTarget::ConcordanceLogistic => {
            let regime = regime
                .ok_or_else(|| Error::Fit("concordance propensity requires a regime".into()))?;
            let labels = regime.evaluate(ds)?;
            let c: Vec<f64> = labels
                .iter()
                .zip(ds.t_idx())
                .map(|(&f, &t)| f64::from(f == t))
                .collect();
            fit_logistic_named(&design.x, &c, weights, names)?
        }
    };
    model.design = Some(spec.clone());
    Ok(model)
}

#[cfg(test)]
mod tests;
