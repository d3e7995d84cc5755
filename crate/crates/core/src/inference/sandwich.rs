//! Stacked M-estimation (sandwich) variance.
//!
//! For a value estimate the per-row estimating functions are the fitted
//! nuisance model's score contributions stacked with `m_i(γ) − ν`, where
//! `m_i` is the estimator's row contribution (inverse-propensity-weighted
//! outcome or outcome-model prediction). For a utility both value equations
//! are stacked — sharing a nuisance block when both sides use the same
//! fitted model — plus the difference equation `ν_a − ν_b − Δ`. The variance
//! is `A⁻¹ B A⁻ᵀ` with `A = Σ w_i (−∂ψ_i/∂θ)` and `B = Σ w_i ψ_i ψ_iᵀ`,
//! evaluated at the fitted parameters; intervals are Wald.
//!
//! Nuisance blocks are restricted to design columns that survived
//! collinearity pruning. Models injected with known parameters (never
//! fitted on this data) contribute no nuisance uncertainty: their score
//! equations do not hold on the sample, so stacking them would be wrong.

use ndarray::{Array1, Array2};

use crate::data::{build_design, build_design_with, Dataset, DesignOverrides};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorId, IpwOptions};
use crate::glm::{predict, Family, FittedModel, Predictions};
use crate::linalg;
use crate::numeric::normal_quantile;
use crate::regimes::Regime;

use super::{CiMethod, ConfidenceInterval};

/// One side of a sandwich computation: an estimator with its nuisance model.
#[derive(Clone, Copy)]
pub enum SandwichEstimator<'a> {
    SocMean,
    IpwNb {
        regime: &'a Regime,
        propensity: &'a FittedModel,
        opts: IpwOptions,
    },
    IpwB {
        regime: &'a Regime,
        propensity: &'a FittedModel,
        opts: IpwOptions,
    },
    GcB {
        regime: &'a Regime,
        outcome: &'a FittedModel,
    },
    GcNb {
        regime: &'a Regime,
        outcome: &'a FittedModel,
    },
}

impl SandwichEstimator<'_> {
    pub fn id(&self) -> EstimatorId {
        match self {
            SandwichEstimator::SocMean => EstimatorId::SocMean,
            SandwichEstimator::IpwNb { .. } => EstimatorId::IpwNb,
            SandwichEstimator::IpwB { .. } => EstimatorId::IpwB,
            SandwichEstimator::GcB { .. } => EstimatorId::GcB,
            SandwichEstimator::GcNb { .. } => EstimatorId::GcNb,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SandwichResult {
    pub point: f64,
    pub se: f64,
    pub interval: ConfidenceInterval,
    pub bread_condition: f64,
    pub meat_condition: f64,
}

/// Sandwich Wald interval for one value estimate.
pub fn sandwich_value(
    ds: &Dataset,
    w: Option<&[f64]>,
    estimator: &SandwichEstimator<'_>,
    level: f64,
) -> Result<SandwichResult> {
    solve(ds, w, &[estimator], level)
}

/// Sandwich Wald interval for the utility `value(a) − value(b)`.
pub fn sandwich_utility(
    ds: &Dataset,
    w: Option<&[f64]>,
    a: &SandwichEstimator<'_>,
    b: &SandwichEstimator<'_>,
    level: f64,
) -> Result<SandwichResult> {
    solve(ds, w, &[a, b], level)
}

// ---------------------------------------------------------------------------
// per-side preparation
// ---------------------------------------------------------------------------

struct Block {
    /// Dedup key: address of the fitted model.
    key: usize,
    /// Per-row unweighted score contributions, n × q.
    scores: Array2<f64>,
    /// Weighted information `Σ w_i (−∂s_i/∂γᵀ)`, q × q.
    info: Array2<f64>,
}

struct Side {
    /// Row contributions m_i with `ν = weighted mean(m)`.
    m: Vec<f64>,
    /// `∂m_i/∂γ` into this side's block coordinates, n × q.
    dm: Option<Array2<f64>>,
    block: Option<Block>,
}

fn weight_at(w: Option<&[f64]>, i: usize) -> f64 {
    w.map_or(1.0, |w| w[i])
}

fn restrict(x: &Array2<f64>, retained: &[usize]) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::<f64>::zeros((n, retained.len()));
    for (jj, &j) in retained.iter().enumerate() {
        for i in 0..n {
            out[(i, jj)] = x[(i, j)];
        }
    }
    out
}

fn require_design(model: &FittedModel, what: &str) -> Result<crate::data::DesignSpec> {
    model
        .design
        .clone()
        .ok_or_else(|| Error::Sandwich(format!("{what} carries no design spec")))
}

fn logistic_block(
    xr: &Array2<f64>,
    response: &[f64],
    probs: &[f64],
    w: Option<&[f64]>,
    key: usize,
) -> Block {
    let (n, q) = xr.dim();
    let mut scores = Array2::<f64>::zeros((n, q));
    let mut info = Array2::<f64>::zeros((q, q));
    for i in 0..n {
        let resid = response[i] - probs[i];
        let wi = weight_at(w, i);
        let s = wi * probs[i] * (1.0 - probs[i]);
        for a in 0..q {
            scores[(i, a)] = resid * xr[(i, a)];
            if s != 0.0 {
                let xa = xr[(i, a)] * s;
                for b in a..q {
                    info[(a, b)] += xa * xr[(i, b)];
                }
            }
        }
    }
    mirror(&mut info);
    Block { key, scores, info }
}

fn linear_block(
    xr: &Array2<f64>,
    response: &[f64],
    fitted: &[f64],
    w: Option<&[f64]>,
    key: usize,
) -> Block {
    let (n, q) = xr.dim();
    let mut scores = Array2::<f64>::zeros((n, q));
    let mut info = Array2::<f64>::zeros((q, q));
    for i in 0..n {
        let resid = response[i] - fitted[i];
        let wi = weight_at(w, i);
        for a in 0..q {
            scores[(i, a)] = resid * xr[(i, a)];
            let xa = xr[(i, a)] * wi;
            for b in a..q {
                info[(a, b)] += xa * xr[(i, b)];
            }
        }
    }
    mirror(&mut info);
    Block { key, scores, info }
}

fn multinomial_block(
    xr: &Array2<f64>,
    t_idx: &[u32],
    probs: &Array2<f64>, // n × k
    w: Option<&[f64]>,
    key: usize,
) -> Block {
    let (n, r) = xr.dim();
    let k = probs.ncols();
    let q = (k - 1) * r;
    let mut scores = Array2::<f64>::zeros((n, q));
    let mut info = Array2::<f64>::zeros((q, q));
    for i in 0..n {
        let wi = weight_at(w, i);
        for l in 1..k {
            let resid = f64::from(t_idx[i] as usize == l) - probs[(i, l)];
            let base = (l - 1) * r;
            for j in 0..r {
                scores[(i, base + j)] = resid * xr[(i, j)];
            }
            for m in l..k {
                let wlm = if l == m {
                    wi * probs[(i, l)] * (1.0 - probs[(i, l)])
                } else {
                    -wi * probs[(i, l)] * probs[(i, m)]
                };
                if wlm == 0.0 {
                    continue;
                }
                let bm = (m - 1) * r;
                for a in 0..r {
                    let xa = xr[(i, a)] * wlm;
                    for b in 0..r {
                        info[(base + a, bm + b)] += xa * xr[(i, b)];
                    }
                }
            }
        }
    }
    // mirror the off-diagonal level blocks
    for l in 1..k {
        for m in (l + 1)..k {
            let bl = (l - 1) * r;
            let bm = (m - 1) * r;
            for a in 0..r {
                for b in 0..r {
                    info[(bm + b, bl + a)] = info[(bl + a, bm + b)];
                }
            }
        }
    }
    Block { key, scores, info }
}

fn mirror(m: &mut Array2<f64>) {
    for a in 0..m.nrows() {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
}

fn prepare_side(ds: &Dataset, w: Option<&[f64]>, est: &SandwichEstimator<'_>) -> Result<Side> {
    let n = ds.n();
    match est {
        SandwichEstimator::SocMean => Ok(Side {
            m: ds.y().to_vec(),
            dm: None,
            block: None,
        }),
        SandwichEstimator::IpwNb {
            regime,
            propensity,
            opts,
        } => {
            let levels = match &propensity.family {
                Family::Multinomial { levels } => levels.clone(),
                _ => {
                    return Err(Error::Sandwich(
                        "ipw_nb requires a multinomial propensity".into(),
                    ))
                }
            };
            let k = levels.len();
            let spec = require_design(propensity, "propensity model")?;
            let design = build_design(ds, &spec, Some(regime))?;
            let probs = match predict(propensity, design.x.view())? {
                Predictions::LevelProbabilities(p) => p,
                _ => unreachable!(),
            };
            let f = regime.evaluate(ds)?;
            let retained = propensity.retained_indices();
            let xr = restrict(&design.x, &retained);
            let r = retained.len();
            let mut m = vec![0.0; n];
            let mut dm = Array2::<f64>::zeros((n, (k - 1) * r));
            for i in 0..n {
                let ti = ds.t_idx()[i] as usize;
                if f[i] != ds.t_idx()[i] {
                    continue;
                }
                let p = probs[(i, ti)];
                if p < opts.floor && opts.weight_cap.is_none() {
                    return Err(Error::Positivity {
                        row: i + 1,
                        propensity: p,
                        floor: opts.floor,
                    });
                }
                let raw = if p > 0.0 { 1.0 / p } else { f64::INFINITY };
                let capped = opts.weight_cap.is_some_and(|cap| raw > cap);
                let weight = if capped {
                    opts.weight_cap.unwrap()
                } else {
                    raw
                };
                m[i] = ds.y()[i] * weight;
                if !capped {
                    for l in 1..k {
                        let d = f64::from(ti == l) - probs[(i, l)];
                        let base = (l - 1) * r;
                        for j in 0..r {
                            dm[(i, base + j)] = -m[i] * d * xr[(i, j)];
                        }
                    }
                }
            }
            let block = propensity.is_fitted().then(|| {
                multinomial_block(&xr, ds.t_idx(), &probs, w, propensity as *const _ as usize)
            });
            let dm = block.is_some().then_some(dm);
            Ok(Side { m, dm, block })
        }
        SandwichEstimator::IpwB {
            regime,
            propensity,
            opts,
        } => {
            if propensity.family != Family::Logistic {
                return Err(Error::Sandwich(
                    "ipw_b requires a logistic propensity".into(),
                ));
            }
            let spec = require_design(propensity, "propensity model")?;
            let design = build_design(ds, &spec, Some(regime))?;
            let probs = match predict(propensity, design.x.view())? {
                Predictions::Probabilities(p) => p,
                _ => unreachable!(),
            };
            let f = regime.evaluate(ds)?;
            let conc: Vec<f64> = f
                .iter()
                .zip(ds.t_idx())
                .map(|(&a, &b)| f64::from(a == b))
                .collect();
            let retained = propensity.retained_indices();
            let xr = restrict(&design.x, &retained);
            let r = retained.len();
            let mut m = vec![0.0; n];
            let mut dm = Array2::<f64>::zeros((n, r));
            for i in 0..n {
                if conc[i] == 0.0 {
                    continue;
                }
                let p = probs[i];
                if p < opts.floor && opts.weight_cap.is_none() {
                    return Err(Error::Positivity {
                        row: i + 1,
                        propensity: p,
                        floor: opts.floor,
                    });
                }
                let raw = if p > 0.0 { 1.0 / p } else { f64::INFINITY };
                let capped = opts.weight_cap.is_some_and(|cap| raw > cap);
                let weight = if capped {
                    opts.weight_cap.unwrap()
                } else {
                    raw
                };
                m[i] = ds.y()[i] * weight;
                if !capped {
                    for j in 0..r {
                        dm[(i, j)] = -m[i] * (1.0 - p) * xr[(i, j)];
                    }
                }
            }
            let block = propensity
                .is_fitted()
                .then(|| logistic_block(&xr, &conc, &probs, w, propensity as *const _ as usize));
            let dm = block.is_some().then_some(dm);
            Ok(Side { m, dm, block })
        }
        SandwichEstimator::GcB { regime, outcome } => {
            let spec = require_design(outcome, "outcome model")?;
            if !spec.requires_concordance() {
                return Err(Error::Sandwich(
                    "gc_b outcome model lacks the concordance term".into(),
                ));
            }
            let fit_design = build_design(ds, &spec, Some(regime))?;
            let pred_design = build_design_with(
                ds,
                &spec,
                Some(regime),
                DesignOverrides {
                    treatment: None,
                    concordance: Some(1),
                },
            )?;
            outcome_side(ds, w, outcome, &fit_design.x, &pred_design.x)
        }
        SandwichEstimator::GcNb { regime, outcome } => {
            let spec = require_design(outcome, "outcome model")?;
            if !spec.requires_treatment() {
                return Err(Error::Sandwich(
                    "gc_nb outcome model lacks treatment terms".into(),
                ));
            }
            let f = regime.evaluate(ds)?;
            let fit_design = build_design(ds, &spec, Some(regime))?;
            let pred_design = build_design_with(
                ds,
                &spec,
                Some(regime),
                DesignOverrides {
                    treatment: Some(&f),
                    concordance: None,
                },
            )?;
            outcome_side(ds, w, outcome, &fit_design.x, &pred_design.x)
        }
    }
}

fn outcome_side(
    ds: &Dataset,
    w: Option<&[f64]>,
    outcome: &FittedModel,
    x_fit: &Array2<f64>,
    x_pred: &Array2<f64>,
) -> Result<Side> {
    let n = ds.n();
    let retained = outcome.retained_indices();
    let xr_fit = restrict(x_fit, &retained);
    let xr_pred = restrict(x_pred, &retained);
    let r = retained.len();
    let key = outcome as *const _ as usize;
    match outcome.family {
        Family::Logistic => {
            let fitted = match predict(outcome, x_fit.view())? {
                Predictions::Probabilities(p) => p,
                _ => unreachable!(),
            };
            let m = match predict(outcome, x_pred.view())? {
                Predictions::Probabilities(p) => p,
                _ => unreachable!(),
            };
            let mut dm = Array2::<f64>::zeros((n, r));
            for i in 0..n {
                let s = m[i] * (1.0 - m[i]);
                for j in 0..r {
                    dm[(i, j)] = s * xr_pred[(i, j)];
                }
            }
            let block = outcome
                .is_fitted()
                .then(|| logistic_block(&xr_fit, ds.y(), &fitted, w, key));
            let dm = block.is_some().then_some(dm);
            Ok(Side { m, dm, block })
        }
        Family::Linear => {
            let fitted = match predict(outcome, x_fit.view())? {
                Predictions::Values(v) => v,
                _ => unreachable!(),
            };
            let m = match predict(outcome, x_pred.view())? {
                Predictions::Values(v) => v,
                _ => unreachable!(),
            };
            let block = outcome
                .is_fitted()
                .then(|| linear_block(&xr_fit, ds.y(), &fitted, w, key));
            let dm = block.is_some().then_some(xr_pred);
            Ok(Side { m, dm, block })
        }
        Family::Multinomial { .. } => Err(Error::Sandwich(
            "outcome model must be linear or logistic".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

fn solve(
    ds: &Dataset,
    w: Option<&[f64]>,
    sides: &[&SandwichEstimator<'_>],
    level: f64,
) -> Result<SandwichResult> {
    if let Some(w) = w {
        if w.len() != ds.n() {
            return Err(Error::Sandwich("weight vector length mismatch".into()));
        }
    }
    let n = ds.n();
    let total: f64 = w.map_or(n as f64, |w| w.iter().sum());
    if total <= 0.0 {
        return Err(Error::Sandwich("no rows with positive weight".into()));
    }

    let prepared: Vec<Side> = sides
        .iter()
        .map(|s| prepare_side(ds, w, s))
        .collect::<Result<_>>()?;

    // unique nuisance blocks in first-appearance order
    let mut blocks: Vec<&Block> = Vec::new();
    let mut side_block: Vec<Option<usize>> = Vec::new();
    for side in &prepared {
        match &side.block {
            None => side_block.push(None),
            Some(b) => {
                let pos = blocks.iter().position(|eb| eb.key == b.key);
                let idx = pos.unwrap_or_else(|| {
                    blocks.push(b);
                    blocks.len() - 1
                });
                side_block.push(Some(idx));
            }
        }
    }
    let block_offsets: Vec<usize> = blocks
        .iter()
        .scan(0usize, |acc, b| {
            let off = *acc;
            *acc += b.scores.ncols();
            Some(off)
        })
        .collect();
    let q_total: usize = blocks.iter().map(|b| b.scores.ncols()).sum();
    let n_sides = prepared.len();
    let with_delta = n_sides == 2;
    let dim = q_total + n_sides + usize::from(with_delta);

    // point estimates
    let nu: Vec<f64> = prepared
        .iter()
        .map(|side| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += weight_at(w, i) * side.m[i];
            }
            acc / total
        })
        .collect();
    let point = if with_delta { nu[0] - nu[1] } else { nu[0] };
    let target = dim - 1;

    // bread A = Σ w (−∂ψ/∂θ)
    let mut a = Array2::<f64>::zeros((dim, dim));
    for (bi, block) in blocks.iter().enumerate() {
        let off = block_offsets[bi];
        let q = block.scores.ncols();
        for r0 in 0..q {
            for c0 in 0..q {
                a[(off + r0, off + c0)] = block.info[(r0, c0)];
            }
        }
    }
    for (si, side) in prepared.iter().enumerate() {
        let row = q_total + si;
        a[(row, row)] = total;
        if let (Some(bi), Some(dm)) = (side_block[si], side.dm.as_ref()) {
            let off = block_offsets[bi];
            for j in 0..dm.ncols() {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += weight_at(w, i) * dm[(i, j)];
                }
                a[(row, off + j)] = -acc;
            }
        }
    }
    if with_delta {
        let row = target;
        a[(row, q_total)] = -total;
        a[(row, q_total + 1)] = total;
        a[(row, row)] = total;
    }

    // meat B = Σ w ψ ψᵀ (the Δ component of ψ is identically zero)
    let mut psi = Array2::<f64>::zeros((n, dim));
    for (bi, block) in blocks.iter().enumerate() {
        let off = block_offsets[bi];
        for i in 0..n {
            for j in 0..block.scores.ncols() {
                psi[(i, off + j)] = block.scores[(i, j)];
            }
        }
    }
    for (si, side) in prepared.iter().enumerate() {
        for i in 0..n {
            psi[(i, q_total + si)] = side.m[i] - nu[si];
        }
    }
    let mut b = Array2::<f64>::zeros((dim, dim));
    for i in 0..n {
        let wi = weight_at(w, i);
        if wi == 0.0 {
            continue;
        }
        for r0 in 0..dim {
            let pr = psi[(i, r0)] * wi;
            if pr == 0.0 {
                continue;
            }
            for c0 in r0..dim {
                b[(r0, c0)] += pr * psi[(i, c0)];
            }
        }
    }
    mirror(&mut b);

    let bread_condition = linalg::condition_number(&a);
    let a_inv = linalg::lu_inverse(&a).ok_or(Error::SingularBread {
        condition: bread_condition,
    })?;
    let meat_condition = linalg::condition_number(&b);

    // Var(θ̂) = A⁻¹ B A⁻ᵀ ; the target is the last coordinate
    let row: Array1<f64> = a_inv.row(target).to_owned();
    let tmp = b.dot(&row);
    let var = row.dot(&tmp).max(0.0);
    let se = var.sqrt();
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let interval = ConfidenceInterval::new(
        point - z * se,
        point + z * se,
        level,
        Some(se),
        CiMethod::SandwichWald {
            bread_condition,
            meat_condition,
        },
    )?;
    Ok(SandwichResult {
        point,
        se,
        interval,
        bread_condition,
        meat_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnData, CovariateDecl, CovariateKind, Schema, TreatmentDecl};

    fn dataset(y: Vec<f64>, t: Vec<u32>, z: Vec<u32>) -> Dataset {
        let schema = Schema {
            outcome: "y".into(),
            treatment: TreatmentDecl {
                name: "t".into(),
                levels: vec!["1".into(), "2".into()],
            },
            covariates: vec![CovariateDecl {
                name: "z".into(),
                kind: CovariateKind::Categorical {
                    levels: vec!["0".into(), "1".into()],
                    numeric_view: true,
                },
            }],
        };
        Dataset::from_columns(schema, y, t, vec![ColumnData::Categorical(z)]).unwrap()
    }

    #[test]
    fn soc_mean_se_matches_the_closed_form() {
        let y = vec![0.2, 0.8, 0.4, 1.0, 0.6, 0.0, 0.3];
        let n = y.len();
        let mean = y.iter().sum::<f64>() / n as f64;
        let popvar = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let want = (popvar / n as f64).sqrt();

        let ds = dataset(y, vec![0, 1, 0, 1, 0, 1, 0], vec![0, 0, 1, 1, 0, 1, 0]);
        let res = sandwich_value(&ds, None, &SandwichEstimator::SocMean, 0.95).unwrap();
        assert!((res.point - mean).abs() < 1e-14);
        assert!((res.se - want).abs() < 1e-10, "got {}, want {want}", res.se);
        assert!(res.interval.contains(res.point));
    }

    #[test]
    fn weighted_soc_matches_replicated_rows() {
        let ds = dataset(vec![0.0, 1.0, 0.5], vec![0, 1, 0], vec![0, 1, 1]);
        let w = vec![2.0, 3.0, 1.0];
        let res_w = sandwich_value(&ds, Some(&w), &SandwichEstimator::SocMean, 0.95).unwrap();

        let ds_rep = dataset(
            vec![0.0, 0.0, 1.0, 1.0, 1.0, 0.5],
            vec![0, 0, 1, 1, 1, 0],
            vec![0, 0, 1, 1, 1, 1],
        );
        let res_r = sandwich_value(&ds_rep, None, &SandwichEstimator::SocMean, 0.95).unwrap();
        assert!((res_w.point - res_r.point).abs() < 1e-14);
        assert!((res_w.se - res_r.se).abs() < 1e-12);
    }

    #[test]
    fn utility_of_a_side_against_itself_is_zero() {
        let ds = dataset(vec![0.0, 1.0, 1.0, 0.0], vec![0, 1, 0, 1], vec![0, 1, 1, 0]);
        let res = sandwich_utility(
            &ds,
            None,
            &SandwichEstimator::SocMean,
            &SandwichEstimator::SocMean,
            0.95,
        )
        .unwrap();
        assert_eq!(res.point, 0.0);
        assert!(res.se < 1e-12);
    }

    #[test]
    fn constant_outcome_gives_degenerate_interval() {
        let ds = dataset(vec![0.4; 6], vec![0, 1, 0, 1, 0, 1], vec![0, 0, 1, 1, 0, 1]);
        let res = sandwich_value(&ds, None, &SandwichEstimator::SocMean, 0.95).unwrap();
        assert!(res.se < 1e-12);
        assert!(res.interval.width() < 1e-11);
    }
}
