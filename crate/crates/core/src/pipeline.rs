//! The full estimation recipe behind a run: fit the nuisance models, compute
//! regime values and the standard-of-care mean, and difference them per
//! comparator.
//!
//! A [`PreparedPipeline`] holds prebuilt design matrices; [`PreparedPipeline::run`]
//! re-fits everything data-dependent for a given frequency-weight vector.
//! Bootstrap replicates call `run` with resampled weights, so one propensity
//! fit serves every regime within a replicate and designs are never rebuilt.

use serde::{Deserialize, Serialize};

use crate::data::{build_design, build_design_with, Dataset, Design, DesignOverrides, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    clinical_utility, ipw_value_kernel, soc_mean_weighted, Diagnostics, EstimatorId, IpwOptions,
    UtilityEstimate, ValueEstimate, SOC_ID,
};
use crate::glm::{fit_model_on, predict, FittedModel, ModelTarget, Predictions};
use crate::numeric::KahanSum;
use crate::regimes::Regime;

/// Which regression each estimator uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    /// Multinomial propensity of the observed treatment (for `ipw_nb`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity_nb: Option<DesignSpec>,
    /// Logistic propensity of regime-concordance (for `ipw_b`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity_b: Option<DesignSpec>,
    /// Outcome model containing the concordance term (for `gc_b`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_b: Option<DesignSpec>,
    #[serde(default = "OutcomeFamily::logistic")]
    pub outcome_b_family: OutcomeFamily,
    /// Outcome model containing treatment terms (for `gc_nb`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_nb: Option<DesignSpec>,
    #[serde(default = "OutcomeFamily::linear")]
    pub outcome_nb_family: OutcomeFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeFamily {
    Linear,
    Logistic,
}

impl OutcomeFamily {
    fn linear() -> Self {
        OutcomeFamily::Linear
    }
    fn logistic() -> Self {
        OutcomeFamily::Logistic
    }
    fn target(self) -> ModelTarget {
        match self {
            OutcomeFamily::Linear => ModelTarget::OutcomeLinear,
            OutcomeFamily::Logistic => ModelTarget::OutcomeLogistic,
        }
    }
}

impl Default for ModelSet {
    fn default() -> Self {
        ModelSet {
            propensity_nb: None,
            propensity_b: None,
            outcome_b: None,
            outcome_b_family: OutcomeFamily::Logistic,
            outcome_nb: None,
            outcome_nb_family: OutcomeFamily::Linear,
        }
    }
}

/// One side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Soc,
    /// Index into the plan's regime list.
    Regime(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparator {
    pub a: Side,
    pub b: Side,
}

/// Declarative description of a full estimation run.
#[derive(Debug, Clone)]
pub struct PipelinePlan {
    pub regimes: Vec<Regime>,
    /// Regime-value estimators to compute (`soc_mean` is always computed).
    pub estimators: Vec<EstimatorId>,
    pub comparators: Vec<Comparator>,
    pub models: ModelSet,
    pub ipw: IpwOptions,
}

impl PipelinePlan {
    /// Every regime versus the standard of care, then every ordered regime
    /// pair, mirroring the usual comparison grid.
    pub fn default_comparators(n_regimes: usize) -> Vec<Comparator> {
        let mut out: Vec<Comparator> = (0..n_regimes)
            .map(|i| Comparator {
                a: Side::Regime(i),
                b: Side::Soc,
            })
            .collect();
        for i in 0..n_regimes {
            for j in (i + 1)..n_regimes {
                out.push(Comparator {
                    a: Side::Regime(i),
                    b: Side::Regime(j),
                });
            }
        }
        out
    }
}

/// Plan plus prebuilt designs and regime evaluations for one dataset.
pub struct PreparedPipeline<'a> {
    pub ds: &'a Dataset,
    pub plan: &'a PipelinePlan,
    f_labels: Vec<Vec<u32>>,
    concordance: Vec<Vec<f64>>,
    d_pnb: Option<Design>,
    d_pb: Option<Design>,
    d_ob_fit: Vec<Option<Design>>,
    d_ob_pred: Option<Design>,
    d_onb_fit: Option<Design>,
    d_onb_pred: Vec<Option<Design>>,
}

/// Every model fitted during one pipeline run.
#[derive(Debug, Default)]
pub struct FittedModels {
    pub propensity_nb: Option<FittedModel>,
    /// Per regime.
    pub propensity_b: Vec<Option<FittedModel>>,
    /// Per regime.
    pub outcome_b: Vec<Option<FittedModel>>,
    pub outcome_nb: Option<FittedModel>,
}

/// Output of one pipeline run.
#[derive(Debug)]
pub struct PipelineRun {
    pub soc: ValueEstimate,
    /// `values[e][r]` = value of regime `r` under `plan.estimators[e]`.
    pub values: Vec<Vec<ValueEstimate>>,
    /// One per (estimator, comparator), estimator-major, plan order.
    pub utilities: Vec<UtilityEstimate>,
    pub models: FittedModels,
}

impl PipelineRun {
    /// Flat statistics (utility differences) in the fixed plan order; the
    /// bootstrap percentiles are computed over these.
    pub fn stats(&self) -> Vec<f64> {
        self.utilities.iter().map(|u| u.difference).collect()
    }

    pub fn stat_names(&self) -> Vec<String> {
        self.utilities
            .iter()
            .map(|u| format!("{}:{}-vs-{}", u.estimator, u.a, u.b))
            .collect()
    }
}

/// Builds designs and evaluates regimes once for the dataset.
pub fn prepare<'a>(ds: &'a Dataset, plan: &'a PipelinePlan) -> Result<PreparedPipeline<'a>> {
    for est in &plan.estimators {
        if *est == EstimatorId::SocMean {
            return Err(Error::Estimator(
                "soc_mean is always computed; list only regime estimators".into(),
            ));
        }
    }
    for comp in &plan.comparators {
        for side in [comp.a, comp.b] {
            if let Side::Regime(i) = side {
                if i >= plan.regimes.len() {
                    return Err(Error::Estimator(format!(
                        "comparator references regime {i} of {}",
                        plan.regimes.len()
                    )));
                }
            }
        }
    }
    let wants = |e: EstimatorId| plan.estimators.contains(&e);

    let f_labels: Vec<Vec<u32>> = plan
        .regimes
        .iter()
        .map(|r| r.evaluate(ds))
        .collect::<Result<_>>()?;
    let concordance: Vec<Vec<f64>> = f_labels
        .iter()
        .map(|f| {
            f.iter()
                .zip(ds.t_idx())
                .map(|(&a, &b)| f64::from(a == b))
                .collect()
        })
        .collect();

    let d_pnb = if wants(EstimatorId::IpwNb) {
        let spec = plan.models.propensity_nb.as_ref().ok_or_else(|| {
            Error::Estimator("ipw_nb requested but no propensity_nb design configured".into())
        })?;
        Some(build_design(ds, spec, None)?)
    } else {
        None
    };
    let d_pb = if wants(EstimatorId::IpwB) {
        let spec = plan.models.propensity_b.as_ref().ok_or_else(|| {
            Error::Estimator("ipw_b requested but no propensity_b design configured".into())
        })?;
        if spec.requires_concordance() {
            return Err(Error::Estimator(
                "the concordance indicator is the response of the ipw_b propensity, not a design term".into(),
            ));
        }
        Some(build_design(ds, spec, None)?)
    } else {
        None
    };
    let (d_ob_fit, d_ob_pred) = if wants(EstimatorId::GcB) {
        let spec = plan.models.outcome_b.as_ref().ok_or_else(|| {
            Error::Estimator("gc_b requested but no outcome_b design configured".into())
        })?;
        if !spec.requires_concordance() {
            return Err(Error::Estimator(
                "gc_b outcome design must contain the concordance term".into(),
            ));
        }
        let fits: Vec<Option<Design>> = plan
            .regimes
            .iter()
            .map(|r| build_design(ds, spec, Some(r)).map(Some))
            .collect::<Result<_>>()?;
        let pred = build_design_with(
            ds,
            spec,
            None,
            DesignOverrides {
                treatment: None,
                concordance: Some(1),
            },
        )?;
        (fits, Some(pred))
    } else {
        (vec![None; plan.regimes.len()], None)
    };
    let (d_onb_fit, d_onb_pred) = if wants(EstimatorId::GcNb) {
        let spec = plan.models.outcome_nb.as_ref().ok_or_else(|| {
            Error::Estimator("gc_nb requested but no outcome_nb design configured".into())
        })?;
        if !spec.requires_treatment() {
            return Err(Error::Estimator(
                "gc_nb outcome design must contain treatment terms".into(),
            ));
        }
        let fit = build_design(ds, spec, None)?;
        let preds: Vec<Option<Design>> = f_labels
            .iter()
            .map(|f| {
                build_design_with(
                    ds,
                    spec,
                    None,
                    DesignOverrides {
                        treatment: Some(f),
                        concordance: None,
                    },
                )
                .map(Some)
            })
            .collect::<Result<_>>()?;
        (Some(fit), preds)
    } else {
        (None, vec![None; plan.regimes.len()])
    };

    Ok(PreparedPipeline {
        ds,
        plan,
        f_labels,
        concordance,
        d_pnb,
        d_pb,
        d_ob_fit,
        d_ob_pred,
        d_onb_fit,
        d_onb_pred,
    })
}

fn weighted_mean(values: &[f64], w: Option<&[f64]>) -> f64 {
    let mut num = KahanSum::new();
    let mut den = KahanSum::new();
    for (i, &v) in values.iter().enumerate() {
        let wi = w.map_or(1.0, |w| w[i]);
        num.add(v * wi);
        den.add(wi);
    }
    num.value() / den.value()
}

impl PreparedPipeline<'_> {
    pub fn n_stats(&self) -> usize {
        self.plan.estimators.len() * self.plan.comparators.len()
    }

    /// Evaluated regime labels (treatment level indices) per regime.
    pub fn regime_labels(&self, regime: usize) -> &[u32] {
        &self.f_labels[regime]
    }

    /// Re-runs everything data-dependent under the given frequency weights.
    pub fn run(&self, w: Option<&[f64]>) -> Result<PipelineRun> {
        let ds = self.ds;
        let plan = self.plan;
        let n_regimes = plan.regimes.len();
        let total = w.map_or(ds.n() as f64, |w| w.iter().sum());

        let soc = soc_mean_weighted(ds, w)?;
        let mut models = FittedModels {
            propensity_b: (0..n_regimes).map(|_| None).collect(),
            outcome_b: (0..n_regimes).map(|_| None).collect(),
            ..FittedModels::default()
        };
        let mut values: Vec<Vec<ValueEstimate>> = Vec::with_capacity(plan.estimators.len());

        for &est in &plan.estimators {
            let per_regime = match est {
                EstimatorId::IpwNb => {
                    let design = self.d_pnb.as_ref().expect("prepared");
                    let spec = plan.models.propensity_nb.as_ref().expect("prepared");
                    let model =
                        fit_model_on(ds, design, spec, None, ModelTarget::TreatmentMultinomial, w)?;
                    let probs = match predict(&model, design.x.view())? {
                        Predictions::LevelProbabilities(p) => p,
                        _ => unreachable!(),
                    };
                    let p_used: Vec<f64> = (0..ds.n())
                        .map(|i| probs[(i, ds.t_idx()[i] as usize)])
                        .collect();
                    let out = (0..n_regimes)
                        .map(|r| {
                            ipw_value_kernel(
                                ds,
                                w,
                                &plan.regimes[r].id,
                                EstimatorId::IpwNb,
                                &self.concordance[r],
                                &p_used,
                                &plan.ipw,
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    models.propensity_nb = Some(model);
                    out
                }
                EstimatorId::IpwB => {
                    let design = self.d_pb.as_ref().expect("prepared");
                    let spec = plan.models.propensity_b.as_ref().expect("prepared");
                    let mut out = Vec::with_capacity(n_regimes);
                    for r in 0..n_regimes {
                        let model = fit_model_on(
                            ds,
                            design,
                            spec,
                            Some(&plan.regimes[r]),
                            ModelTarget::ConcordanceLogistic,
                            w,
                        )?;
                        let p_used = match predict(&model, design.x.view())? {
                            Predictions::Probabilities(p) => p,
                            _ => unreachable!(),
                        };
                        out.push(ipw_value_kernel(
                            ds,
                            w,
                            &plan.regimes[r].id,
                            EstimatorId::IpwB,
                            &self.concordance[r],
                            &p_used,
                            &plan.ipw,
                        )?);
                        models.propensity_b[r] = Some(model);
                    }
                    out
                }
                EstimatorId::GcB => {
                    let spec = plan.models.outcome_b.as_ref().expect("prepared");
                    let pred_design = self.d_ob_pred.as_ref().expect("prepared");
                    let mut out = Vec::with_capacity(n_regimes);
                    for r in 0..n_regimes {
                        let fit_design = self.d_ob_fit[r].as_ref().expect("prepared");
                        let model = fit_model_on(
                            ds,
                            fit_design,
                            spec,
                            Some(&plan.regimes[r]),
                            plan.models.outcome_b_family.target(),
                            w,
                        )?;
                        let preds = match predict(&model, pred_design.x.view())? {
                            Predictions::Values(v) | Predictions::Probabilities(v) => v,
                            _ => unreachable!(),
                        };
                        out.push(ValueEstimate {
                            estimator: EstimatorId::GcB,
                            subject: plan.regimes[r].id.clone(),
                            value: weighted_mean(&preds, w),
                            n: total.round() as usize,
                            diagnostics: Diagnostics {
                                concordance_rate: Some(weighted_mean(&self.concordance[r], w)),
                                ..Diagnostics::default()
                            },
                        });
                        models.outcome_b[r] = Some(model);
                    }
                    out
                }
                EstimatorId::GcNb => {
                    let spec = plan.models.outcome_nb.as_ref().expect("prepared");
                    let fit_design = self.d_onb_fit.as_ref().expect("prepared");
                    let model = fit_model_on(
                        ds,
                        fit_design,
                        spec,
                        None,
                        plan.models.outcome_nb_family.target(),
                        w,
                    )?;
                    let out = (0..n_regimes)
                        .map(|r| {
                            let pred_design = self.d_onb_pred[r].as_ref().expect("prepared");
                            let preds = match predict(&model, pred_design.x.view())? {
                                Predictions::Values(v) | Predictions::Probabilities(v) => v,
                                _ => unreachable!(),
                            };
                            Ok(ValueEstimate {
                                estimator: EstimatorId::GcNb,
                                subject: plan.regimes[r].id.clone(),
                                value: weighted_mean(&preds, w),
                                n: total.round() as usize,
                                diagnostics: Diagnostics {
                                    concordance_rate: Some(weighted_mean(&self.concordance[r], w)),
                                    ..Diagnostics::default()
                                },
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    models.outcome_nb = Some(model);
                    out
                }
                EstimatorId::SocMean => unreachable!("rejected in prepare"),
            };
            values.push(per_regime);
        }

        let mut utilities = Vec::with_capacity(self.n_stats());
        for (ei, _) in plan.estimators.iter().enumerate() {
            for comp in &plan.comparators {
                let value_of = |side: Side| -> &ValueEstimate {
                    match side {
                        Side::Soc => &soc,
                        Side::Regime(r) => &values[ei][r],
                    }
                };
                utilities.push(clinical_utility(value_of(comp.a), value_of(comp.b))?);
            }
        }

        Ok(PipelineRun {
            soc,
            values,
            utilities,
            models,
        })
    }
}

/// Comparator sides as display strings (regime ids or [`SOC_ID`]).
pub fn side_label(plan: &PipelinePlan, side: Side) -> String {
    match side {
        Side::Soc => SOC_ID.to_string(),
        Side::Regime(i) => plan.regimes[i].id.clone(),
    }
}
