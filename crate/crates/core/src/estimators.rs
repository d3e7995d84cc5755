//! Value estimators for the mean counterfactual outcome under a regime, the
//! naive standard-of-care mean, and clinical-utility differences.
//!
//! Four regime-value estimators are provided. The IPW pair reweights
//! regime-concordant subjects by an inverse propensity: `ipw_nb` divides by
//! the estimated probability of the observed treatment (one multinomial
//! propensity serves any number of regimes), `ipw_b` by the estimated
//! probability of regime-concordance (a fresh binary propensity per regime).
//! The g-computation pair averages outcome-model predictions: `gc_b`
//! predicts with the concordance indicator forced to 1, `gc_nb` with the
//! treatment set to the regime's label. Estimated propensities below the
//! positivity floor are a hard error unless weight capping is enabled; caps
//! are always reported in the diagnostics.

use serde::{Deserialize, Serialize};

use crate::data::{build_design_with, Dataset, DesignOverrides};
use crate::error::{Error, Result};
use crate::glm::{predict, Family, FittedModel, Predictions};
use crate::inference::ConfidenceInterval;
use crate::numeric::KahanSum;
use crate::regimes::Regime;

pub const DEFAULT_POSITIVITY_FLOOR: f64 = 1e-6;
pub const DEFAULT_WEIGHT_CAP: f64 = 100.0;

/// Identifier reserved for the standard-of-care side of a comparison.
pub const SOC_ID: &str = "soc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    IpwB,
    IpwNb,
    GcB,
    GcNb,
    SocMean,
}

impl EstimatorId {
    pub const REGIME_ESTIMATORS: [EstimatorId; 4] = [
        EstimatorId::IpwB,
        EstimatorId::IpwNb,
        EstimatorId::GcB,
        EstimatorId::GcNb,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::IpwB => "ipw_b",
            EstimatorId::IpwNb => "ipw_nb",
            EstimatorId::GcB => "gc_b",
            EstimatorId::GcNb => "gc_nb",
            EstimatorId::SocMean => "soc_mean",
        }
    }

    pub fn parse(text: &str) -> Result<EstimatorId> {
        match text {
            "ipw_b" => Ok(EstimatorId::IpwB),
            "ipw_nb" => Ok(EstimatorId::IpwNb),
            "gc_b" => Ok(EstimatorId::GcB),
            "gc_nb" => Ok(EstimatorId::GcNb),
            "soc_mean" => Ok(EstimatorId::SocMean),
            other => Err(Error::Estimator(format!(
                "unknown estimator {other:?}; expected one of ipw_b, ipw_nb, gc_b, gc_nb, soc_mean"
            ))),
        }
    }
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Positivity handling for the IPW estimators.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IpwOptions {
    /// Estimated propensities below this floor are positivity violations.
    pub floor: f64,
    /// When set, inverse-propensity weights are capped at this value instead
    /// of failing; the capped count is reported in the diagnostics.
    pub weight_cap: Option<f64>,
}

impl Default for IpwOptions {
    fn default() -> Self {
        IpwOptions {
            floor: DEFAULT_POSITIVITY_FLOOR,
            weight_cap: None,
        }
    }
}

impl IpwOptions {
    pub fn capped() -> IpwOptions {
        IpwOptions {
            floor: DEFAULT_POSITIVITY_FLOOR,
            weight_cap: Some(DEFAULT_WEIGHT_CAP),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    /// Smallest estimated propensity actually used (concordant rows only).
    pub min_propensity: Option<f64>,
    /// Number of inverse-propensity weights above the cap (0 without a cap).
    pub capped_weights: usize,
    /// Weighted fraction of rows with `f(z) = t`.
    pub concordance_rate: Option<f64>,
}

/// A point estimate of `E[Y(f)]` (or of `E[Y]` for `soc_mean`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub estimator: EstimatorId,
    /// Regime id, or [`SOC_ID`] for the standard-of-care mean.
    pub subject: String,
    pub value: f64,
    /// Rows used (total frequency weight).
    pub n: usize,
    pub diagnostics: Diagnostics,
}

/// A clinical-utility difference `value(a) − value(b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityEstimate {
    pub estimator: EstimatorId,
    pub a: String,
    pub b: String,
    pub difference: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<ConfidenceInterval>,
}

fn total_weight(n: usize, w: Option<&[f64]>) -> f64 {
    w.map_or(n as f64, |w| w.iter().sum())
}

fn check_weights(ds: &Dataset, w: Option<&[f64]>) -> Result<()> {
    if let Some(w) = w {
        if w.len() != ds.n() {
            return Err(Error::Estimator("weight vector length mismatch".into()));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// soc_mean
// ---------------------------------------------------------------------------

/// Mean outcome in the current population: the naive standard-of-care value.
pub fn soc_mean(ds: &Dataset) -> Result<ValueEstimate> {
    soc_mean_weighted(ds, None)
}

pub fn soc_mean_weighted(ds: &Dataset, w: Option<&[f64]>) -> Result<ValueEstimate> {
    check_weights(ds, w)?;
    let total = total_weight(ds.n(), w);
    if total <= 0.0 {
        return Err(Error::Estimator("no rows with positive weight".into()));
    }
    let mut acc = KahanSum::new();
    for (i, &y) in ds.y().iter().enumerate() {
        acc.add(y * w.map_or(1.0, |w| w[i]));
    }
    Ok(ValueEstimate {
        estimator: EstimatorId::SocMean,
        subject: SOC_ID.to_string(),
        value: acc.value() / total,
        n: total.round() as usize,
        diagnostics: Diagnostics::default(),
    })
}

// ---------------------------------------------------------------------------
// IPW estimators
// ---------------------------------------------------------------------------

fn model_design(model: &FittedModel, what: &str) -> Result<crate::data::DesignSpec> {
    model.design.clone().ok_or_else(|| {
        Error::Estimator(format!(
            "{what} carries no design spec; attach one before estimating"
        ))
    })
}

pub(crate) fn ipw_value_kernel(
    ds: &Dataset,
    w: Option<&[f64]>,
    regime_id: &str,
    estimator: EstimatorId,
    concordance: &[f64],
    p_used: &[f64], // aligned with rows; read only where concordant
    opts: &IpwOptions,
) -> Result<ValueEstimate> {
    let n = ds.n();
    let total = total_weight(n, w);
    let mut acc = KahanSum::new();
    let mut conc_w = KahanSum::new();
    let mut min_p: Option<f64> = None;
    let mut capped = 0usize;
    for i in 0..n {
        let wi = w.map_or(1.0, |w| w[i]);
        if wi == 0.0 || concordance[i] == 0.0 {
            continue;
        }
        conc_w.add(wi);
        let p = p_used[i];
        min_p = Some(min_p.map_or(p, |m: f64| m.min(p)));
        let mut weight = if p > 0.0 { 1.0 / p } else { f64::INFINITY };
        match opts.weight_cap {
            Some(cap) => {
                if weight > cap {
                    capped += 1;
                    weight = cap;
                }
            }
            None => {
                if p < opts.floor {
                    return Err(Error::Positivity {
                        row: i + 1,
                        propensity: p,
                        floor: opts.floor,
                    });
                }
            }
        }
        acc.add(wi * ds.y()[i] * weight);
    }
    Ok(ValueEstimate {
        estimator,
        subject: regime_id.to_string(),
        value: acc.value() / total,
        n: total.round() as usize,
        diagnostics: Diagnostics {
            min_propensity: min_p,
            capped_weights: capped,
            concordance_rate: Some(conc_w.value() / total),
        },
    })
}

/// IPW with the multinomial propensity of the observed treatment.
pub fn ipw_nb(
    ds: &Dataset,
    regime: &Regime,
    propensity: &FittedModel,
    opts: &IpwOptions,
) -> Result<ValueEstimate> {
    ipw_nb_weighted(ds, None, regime, propensity, opts)
}

pub fn ipw_nb_weighted(
    ds: &Dataset,
    w: Option<&[f64]>,
    regime: &Regime,
    propensity: &FittedModel,
    opts: &IpwOptions,
) -> Result<ValueEstimate> {
    check_weights(ds, w)?;
    match &propensity.family {
        Family::Multinomial { levels } if levels == ds.treatment_levels() => {}
        Family::Multinomial { .. } => {
            return Err(Error::Estimator(
                "propensity model levels do not match the dataset treatment levels".into(),
            ))
        }
        _ => {
            return Err(Error::Estimator(
                "ipw_nb requires a multinomial propensity".into(),
            ))
        }
    }
    let spec = model_design(propensity, "propensity model")?;
    let design = crate::data::build_design(ds, &spec, Some(regime))?;
    let probs = match predict(propensity, design.x.view())? {
        Predictions::LevelProbabilities(p) => p,
        _ => unreachable!("multinomial family"),
    };
    let f = regime.evaluate(ds)?;
    let concordance: Vec<f64> = f
        .iter()
        .zip(ds.t_idx())
        .map(|(&a, &b)| f64::from(a == b))
        .collect();
    let p_used: Vec<f64> = (0..ds.n())
        .map(|i| probs[(i, ds.t_idx()[i] as usize)])
        .collect();
    ipw_value_kernel(
        ds,
        w,
        &regime.id,
        EstimatorId::IpwNb,
        &concordance,
        &p_used,
        opts,
    )
}

/// IPW with the binary propensity of regime-concordance.
pub fn ipw_b(
    ds: &Dataset,
    regime: &Regime,
    propensity: &FittedModel,
    opts: &IpwOptions,
) -> Result<ValueEstimate> {
    ipw_b_weighted(ds, None, regime, propensity, opts)
}

pub fn ipw_b_weighted(
    ds: &Dataset,
    w: Option<&[f64]>,
    regime: &Regime,
    propensity: &FittedModel,
    opts: &IpwOptions,
) -> Result<ValueEstimate> {
    check_weights(ds, w)?;
    if propensity.family != Family::Logistic {
        return Err(Error::Estimator(
            "ipw_b requires a logistic propensity".into(),
        ));
    }
    let spec = model_design(propensity, "propensity model")?;
    let design = crate::data::build_design(ds, &spec, Some(regime))?;
    let p_used = match predict(propensity, design.x.view())? {
        Predictions::Probabilities(p) => p,
        _ => unreachable!("logistic family"),
    };
    let f = regime.evaluate(ds)?;
    let concordance: Vec<f64> = f
        .iter()
        .zip(ds.t_idx())
        .map(|(&a, &b)| f64::from(a == b))
        .collect();
    ipw_value_kernel(
        ds,
        w,
        &regime.id,
        EstimatorId::IpwB,
        &concordance,
        &p_used,
        opts,
    )
}

// ---------------------------------------------------------------------------
// g-computation estimators
// ---------------------------------------------------------------------------

fn predicted_values(model: &FittedModel, x: ndarray::ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    match predict(model, x)? {
        Predictions::Values(v) | Predictions::Probabilities(v) => Ok(v),
        Predictions::LevelProbabilities(_) => Err(Error::Estimator(
            "outcome model must be linear or logistic".into(),
        )),
    }
}

fn weighted_mean_of(preds: &[f64], w: Option<&[f64]>) -> f64 {
    let total = total_weight(preds.len(), w);
    let mut acc = KahanSum::new();
    for (i, &p) in preds.iter().enumerate() {
        acc.add(p * w.map_or(1.0, |w| w[i]));
    }
    acc.value() / total
}

fn concordance_rate(ds: &Dataset, regime: &Regime, w: Option<&[f64]>) -> Result<f64> {
    let f = regime.evaluate(ds)?;
    let total = total_weight(ds.n(), w);
    let mut acc = KahanSum::new();
    for (i, (&a, &b)) in f.iter().zip(ds.t_idx()).enumerate() {
        if a == b {
            acc.add(w.map_or(1.0, |w| w[i]));
        }
    }
    Ok(acc.value() / total)
}

/// G-computation with the concordance indicator forced to 1 for every row.
pub fn gc_b(ds: &Dataset, regime: &Regime, outcome_model: &FittedModel) -> Result<ValueEstimate> {
    gc_b_weighted(ds, None, regime, outcome_model)
}

pub fn gc_b_weighted(
    ds: &Dataset,
    w: Option<&[f64]>,
    regime: &Regime,
    outcome_model: &FittedModel,
) -> Result<ValueEstimate> {
    check_weights(ds, w)?;
    let spec = model_design(outcome_model, "outcome model")?;
    if !spec.requires_concordance() {
        return Err(Error::Estimator(
            "gc_b outcome model design lacks the concordance term".into(),
        ));
    }
    let design = build_design_with(
        ds,
        &spec,
        Some(regime),
        DesignOverrides {
            treatment: None,
            concordance: Some(1),
        },
    )?;
    let preds = predicted_values(outcome_model, design.x.view())?;
    Ok(ValueEstimate {
        estimator: EstimatorId::GcB,
        subject: regime.id.clone(),
        value: weighted_mean_of(&preds, w),
        n: total_weight(ds.n(), w).round() as usize,
        diagnostics: Diagnostics {
            concordance_rate: Some(concordance_rate(ds, regime, w)?),
            ..Diagnostics::default()
        },
    })
}

/// G-computation with each row's treatment set to the regime's label.
pub fn gc_nb(ds: &Dataset, regime: &Regime, outcome_model: &FittedModel) -> Result<ValueEstimate> {
    gc_nb_weighted(ds, None, regime, outcome_model)
}

pub fn gc_nb_weighted(
    ds: &Dataset,
    w: Option<&[f64]>,
    regime: &Regime,
    outcome_model: &FittedModel,
) -> Result<ValueEstimate> {
    check_weights(ds, w)?;
    let spec = model_design(outcome_model, "outcome model")?;
    if !spec.requires_treatment() {
        return Err(Error::Estimator(
            "gc_nb outcome model design lacks treatment terms".into(),
        ));
    }
    let f = regime.evaluate(ds)?;
    let design = build_design_with(
        ds,
        &spec,
        Some(regime),
        DesignOverrides {
            treatment: Some(&f),
            concordance: None,
        },
    )?;
    let preds = predicted_values(outcome_model, design.x.view())?;
    Ok(ValueEstimate {
        estimator: EstimatorId::GcNb,
        subject: regime.id.clone(),
        value: weighted_mean_of(&preds, w),
        n: total_weight(ds.n(), w).round() as usize,
        diagnostics: Diagnostics {
            concordance_rate: Some(concordance_rate(ds, regime, w)?),
            ..Diagnostics::default()
        },
    })
}

// ---------------------------------------------------------------------------
// clinical utility
// ---------------------------------------------------------------------------

/// Difference in estimated values, `a − b`, on the same dataset.
/// Improvement is negative when smaller outcomes are better.
pub fn clinical_utility(a: &ValueEstimate, b: &ValueEstimate) -> Result<UtilityEstimate> {
    if a.n != b.n {
        return Err(Error::Estimator(format!(
            "comparator dataset mismatch: n = {} vs {}",
            a.n, b.n
        )));
    }
    Ok(UtilityEstimate {
        estimator: a.estimator,
        a: a.subject.clone(),
        b: b.subject.clone(),
        difference: a.value - b.value,
        n: a.n,
        intervals: Vec::new(),
    })
}

/// Header of the flat CSV estimate format (one row per estimator ×
/// comparator × interval; a single row with empty interval fields when no
/// interval is attached).
pub const UTILITY_CSV_HEADER: &str =
    "comparator_a,comparator_b,estimator,difference,n,ci_method,level,lower,upper,se";

impl UtilityEstimate {
    pub fn csv_rows(&self) -> Vec<String> {
        let base = format!(
            "{},{},{},{},{}",
            self.a, self.b, self.estimator, self.difference, self.n
        );
        if self.intervals.is_empty() {
            return vec![format!("{base},,,,,")];
        }
        self.intervals
            .iter()
            .map(|ci| {
                format!(
                    "{base},{},{},{},{},{}",
                    ci.method,
                    ci.level,
                    ci.lower,
                    ci.upper,
                    ci.se.map_or(String::new(), |s| s.to_string()),
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        ColumnData, CovariateDecl, CovariateKind, DesignSpec, Schema, Term, TreatmentDecl,
    };
    use ndarray::array;

    fn two_level_schema() -> Schema {
        Schema {
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
        }
    }

    fn two_row_dataset() -> Dataset {
        // row 1 concordant with the static-1 regime, row 2 not
        Dataset::from_columns(
            two_level_schema(),
            vec![1.0, 0.0],
            vec![0, 1],
            vec![ColumnData::Categorical(vec![0, 1])],
        )
        .unwrap()
    }

    fn known_multinomial_half() -> FittedModel {
        // intercept-only multinomial with P = (1/2, 1/2)
        let mut m = FittedModel::from_parts(
            Family::Multinomial {
                levels: vec!["1".into(), "2".into()],
            },
            array![[0.0]],
            vec!["(intercept)".into()],
        );
        m.design = Some(DesignSpec::intercept_only());
        m
    }

    fn known_logistic_half() -> FittedModel {
        let mut m =
            FittedModel::from_parts(Family::Logistic, array![[0.0]], vec!["(intercept)".into()]);
        m.design = Some(DesignSpec::intercept_only());
        m
    }

    #[test]
    fn soc_mean_is_the_sample_mean() {
        let ds = Dataset::from_columns(
            two_level_schema(),
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0, 0, 1, 1],
            vec![ColumnData::Categorical(vec![0, 0, 1, 1])],
        )
        .unwrap();
        let est = soc_mean(&ds).unwrap();
        assert_eq!(est.value, 0.5);
        assert_eq!(est.n, 4);
    }

    #[test]
    fn soc_mean_single_row() {
        let ds = Dataset::from_columns(
            two_level_schema(),
            vec![1.0],
            vec![0],
            vec![ColumnData::Categorical(vec![0])],
        )
        .unwrap();
        assert_eq!(soc_mean(&ds).unwrap().value, 1.0);
    }

    #[test]
    fn ipw_nb_two_row_hand_computation() {
        let ds = two_row_dataset();
        let regime = Regime::static_label("1");
        let est = ipw_nb(
            &ds,
            &regime,
            &known_multinomial_half(),
            &IpwOptions::default(),
        )
        .unwrap();
        // (1/2) * (1 / 0.5) = 1.0
        assert!((est.value - 1.0).abs() < 1e-12);
        assert_eq!(est.diagnostics.concordance_rate, Some(0.5));
        assert_eq!(est.diagnostics.min_propensity, Some(0.5));
    }

    #[test]
    fn ipw_b_two_row_hand_computation() {
        let ds = two_row_dataset();
        let regime = Regime::static_label("1");
        let est = ipw_b(&ds, &regime, &known_logistic_half(), &IpwOptions::default()).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn never_concordant_regime_gives_zero() {
        let ds = Dataset::from_columns(
            two_level_schema(),
            vec![1.0, 1.0],
            vec![1, 1],
            vec![ColumnData::Categorical(vec![0, 1])],
        )
        .unwrap();
        let regime = Regime::static_label("1");
        let est = ipw_nb(
            &ds,
            &regime,
            &known_multinomial_half(),
            &IpwOptions::default(),
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.diagnostics.concordance_rate, Some(0.0));
        assert_eq!(est.diagnostics.min_propensity, None);
    }

    #[test]
    fn positivity_floor_is_a_hard_error_without_cap() {
        let ds = two_row_dataset();
        let regime = Regime::static_label("1");
        // propensity of level 1 is sigmoid-like tiny: coefficient -40 on level 2 axis
        let mut m = FittedModel::from_parts(
            Family::Multinomial {
                levels: vec!["1".into(), "2".into()],
            },
            array![[40.0]],
            vec!["(intercept)".into()],
        );
        m.design = Some(DesignSpec::intercept_only());
        let err = ipw_nb(&ds, &regime, &m, &IpwOptions::default()).unwrap_err();
        assert!(err.to_string().contains("positivity violation at row 1"));

        let est = ipw_nb(&ds, &regime, &m, &IpwOptions::capped()).unwrap();
        assert_eq!(est.diagnostics.capped_weights, 1);
        // capped contribution: y * 100 / 2
        assert!((est.value - 50.0).abs() < 1e-9);
    }

    #[test]
    fn ipw_b_with_everything_concordant_reweights_to_the_mean() {
        // balanced 12-row toy where t always matches the static regime:
        // the saturated concordance propensity is 1 in every cell, so the
        // reweighted sum collapses to the plain mean of y
        let schema = Schema {
            outcome: "y".into(),
            treatment: TreatmentDecl {
                name: "t".into(),
                levels: vec!["1".into(), "2".into()],
            },
            covariates: vec![CovariateDecl {
                name: "z".into(),
                kind: CovariateKind::Categorical {
                    levels: vec!["0".into(), "1".into(), "2".into()],
                    numeric_view: true,
                },
            }],
        };
        let y: Vec<f64> = vec![0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let z: Vec<u32> = (0..12).map(|i| (i % 3) as u32).collect();
        let ds = Dataset::from_columns(
            schema,
            y.clone(),
            vec![0; 12],
            vec![ColumnData::Categorical(z)],
        )
        .unwrap();
        let regime = Regime::static_label("1");
        let spec = DesignSpec::saturated_cells(ds.schema()).unwrap();
        let model = crate::glm::fit_model(
            &ds,
            &spec,
            Some(&regime),
            crate::glm::ModelTarget::ConcordanceLogistic,
            None,
        )
        .unwrap();
        let est = ipw_b(&ds, &regime, &model, &IpwOptions::default()).unwrap();
        // exact identity with the direct formula at the fitted propensities
        let design = crate::data::build_design(&ds, &spec, Some(&regime)).unwrap();
        let probs = match crate::glm::predict(&model, design.x.view()).unwrap() {
            crate::glm::Predictions::Probabilities(p) => p,
            _ => unreachable!(),
        };
        let direct: f64 = y.iter().zip(&probs).map(|(yi, p)| yi / p).sum::<f64>() / 12.0;
        assert!(
            (est.value - direct).abs() < 1e-12,
            "{} vs direct {direct}",
            est.value
        );
        // the all-ones concordance response sits on the likelihood boundary,
        // so fitted propensities are 1 up to the separation stop
        let mean = y.iter().sum::<f64>() / 12.0;
        assert!((est.value - mean).abs() < 1e-5, "{} vs {mean}", est.value);
        assert_eq!(est.diagnostics.concordance_rate, Some(1.0));
    }

    #[test]
    fn gc_b_constant_model_returns_the_constant() {
        let ds = two_row_dataset();
        let regime = Regime::static_label("1");
        // linear outcome model: intercept 0.37 regardless of concordance
        let mut m = FittedModel::from_parts(
            Family::Linear,
            array![[0.37, 0.0]],
            vec!["(intercept)".into(), "concordant".into()],
        );
        m.design = Some(DesignSpec::new(vec![Term::Intercept, Term::concordance()]));
        let est = gc_b(&ds, &regime, &m).unwrap();
        assert!((est.value - 0.37).abs() < 1e-12);
    }

    #[test]
    fn gc_b_requires_the_concordance_term() {
        let ds = two_row_dataset();
        let regime = Regime::static_label("1");
        let mut m =
            FittedModel::from_parts(Family::Linear, array![[0.5]], vec!["(intercept)".into()]);
        m.design = Some(DesignSpec::intercept_only());
        let err = gc_b(&ds, &regime, &m).unwrap_err();
        assert!(err.to_string().contains("concordance term"));
    }

    #[test]
    fn gc_nb_requires_treatment_terms() {
        let ds = two_row_dataset();
        let regime = Regime::static_label("1");
        let mut m =
            FittedModel::from_parts(Family::Linear, array![[0.5]], vec!["(intercept)".into()]);
        m.design = Some(DesignSpec::intercept_only());
        let err = gc_nb(&ds, &regime, &m).unwrap_err();
        assert!(err.to_string().contains("treatment terms"));
    }

    #[test]
    fn clinical_utility_is_antisymmetric() {
        let a = ValueEstimate {
            estimator: EstimatorId::GcNb,
            subject: "f_opt".into(),
            value: 0.2333,
            n: 100,
            diagnostics: Diagnostics::default(),
        };
        let b = ValueEstimate {
            estimator: EstimatorId::SocMean,
            subject: SOC_ID.into(),
            value: 0.3667,
            n: 100,
            diagnostics: Diagnostics::default(),
        };
        let ab = clinical_utility(&a, &b).unwrap();
        let ba = clinical_utility(&b, &a).unwrap();
        assert!((ab.difference + 0.1334).abs() < 1e-12);
        assert_eq!(ab.difference, -ba.difference);
        let aa = clinical_utility(&a, &a).unwrap();
        assert_eq!(aa.difference, 0.0);
    }

    #[test]
    fn clinical_utility_enforces_matching_n() {
        let a = ValueEstimate {
            estimator: EstimatorId::GcNb,
            subject: "f".into(),
            value: 0.2,
            n: 100,
            diagnostics: Diagnostics::default(),
        };
        let mut b = a.clone();
        b.n = 99;
        assert!(clinical_utility(&a, &b).is_err());
    }
}
