//! Estimator checks against independently computed truths: closed-form
//! values on noiseless cell means, the exact enumeration oracle, and
//! identification with known (not fitted) propensities.

use ndarray::Array2;

use cueval_core::data::{ColumnData, Dataset};
use cueval_core::estimators::{gc_nb, ipw_nb, soc_mean, EstimatorId, IpwOptions};
use cueval_core::glm::{fit_model, Family, FittedModel, ModelTarget};
use cueval_core::regimes::Regime;
use cueval_core::simulation::{
    compress_to_patterns, f_opt_regime, pattern_dataset, rat_f64, sample_population, setting,
    AllocationMechanism, SettingId, CELLS,
};

/// A dataset whose empirical covariate distribution matches the DGP exactly
/// and whose outcomes are the exact risk values: 10 rows per (z1, t) pair,
/// 7 with z2 = 1 and 3 with z2 = 0.
fn noiseless_cell_mean_dataset() -> Dataset {
    let schema = cueval_core::simulation::dgp_schema();
    let risk = cueval_core::simulation::RiskFunction;
    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut z1 = Vec::new();
    let mut z2 = Vec::new();
    for j in 0..6u32 {
        for arm in 0..3u32 {
            for (v, copies) in [(0u32, 3), (1u32, 7)] {
                for _ in 0..copies {
                    y.push(risk.probability(j as usize, v as usize, arm as usize));
                    t.push(arm);
                    z1.push(j);
                    z2.push(v);
                }
            }
        }
    }
    Dataset::from_columns(
        schema,
        y,
        t,
        vec![ColumnData::Categorical(z1), ColumnData::Categorical(z2)],
    )
    .unwrap()
}

#[test]
fn gc_nb_on_noiseless_cell_means_is_exact() {
    let ds = noiseless_cell_mean_dataset();
    let models = cueval_core::simulation::correct_models();
    let spec = models.outcome_nb.unwrap();
    let model = fit_model(&ds, &spec, None, ModelTarget::OutcomeLinear, None).unwrap();

    let est = gc_nb(&ds, &f_opt_regime(), &model).unwrap();
    assert!(
        (est.value - 7.0 / 30.0).abs() < 1e-9,
        "E[Y(f_opt)] = {}, want 7/30",
        est.value
    );

    let est2 = gc_nb(&ds, &Regime::static_label("2"), &model).unwrap();
    assert!(
        (est2.value - 0.3).abs() < 1e-9,
        "E[Y(static 2)] = {}, want 3/10",
        est2.value
    );
}

#[test]
fn gc_nb_equals_the_mean_when_the_regime_matches_observed_treatment() {
    // plug-in consistency: on data where t is exactly f_opt(z), predicting
    // with the treatment set to f_opt reproduces the fitted values, and the
    // fitted-value mean equals mean(y) because the treatment indicators
    // span the intercept
    let s = setting(SettingId::S1);
    let sampled = sample_population(&s, 800, 5).unwrap();
    let regime = f_opt_regime();
    let f = regime.evaluate(&sampled).unwrap();
    let schema = sampled.schema().clone();
    let z1 = match sampled.column("z1").unwrap() {
        ColumnData::Categorical(v) => v.clone(),
        _ => unreachable!(),
    };
    let z2 = match sampled.column("z2").unwrap() {
        ColumnData::Categorical(v) => v.clone(),
        _ => unreachable!(),
    };
    let ds = Dataset::from_columns(
        schema,
        sampled.y().to_vec(),
        f,
        vec![ColumnData::Categorical(z1), ColumnData::Categorical(z2)],
    )
    .unwrap();

    let models = cueval_core::simulation::correct_models();
    let spec = models.outcome_nb.unwrap();
    let model = fit_model(&ds, &spec, None, ModelTarget::OutcomeLinear, None).unwrap();
    let est = gc_nb(&ds, &regime, &model).unwrap();
    let mean_y = soc_mean(&ds).unwrap().value;
    assert!(
        (est.value - mean_y).abs() < 1e-10,
        "gc_nb {} vs mean(y) {}",
        est.value,
        mean_y
    );
    assert_eq!(est.diagnostics.concordance_rate, Some(1.0));
}

/// True multinomial propensity as an injected model: saturated cell design
/// with coefficients log(p_arm(cell)/p_1(cell)).
fn known_propensity(alloc: &AllocationMechanism) -> FittedModel {
    let schema = cueval_core::simulation::dgp_schema();
    let spec = cueval_core::data::DesignSpec::saturated_cells(&schema).unwrap();
    let mut coefs = Array2::<f64>::zeros((2, CELLS));
    for cell in 0..CELLS {
        let p = alloc.cell_f64(cell);
        coefs[(0, cell)] = (p[1] / p[0]).ln();
        coefs[(1, cell)] = (p[2] / p[0]).ln();
    }
    let mut model = FittedModel::from_parts(
        Family::Multinomial {
            levels: vec!["1".into(), "2".into(), "3".into()],
        },
        coefs,
        (0..CELLS).map(|c| format!("cell{c}")).collect(),
    );
    model.design = Some(spec);
    model
}

#[test]
fn ipw_nb_with_known_propensity_is_unbiased_per_setting() {
    // identification sanity: with the true propensity supplied directly, the
    // ipw_nb average over many replications matches the enumeration oracle
    let reps = 10_000;
    let n = 500;
    for id in [SettingId::S1, SettingId::S2, SettingId::S3] {
        let s = setting(id);
        let propensity = known_propensity(&s.allocation);
        let truth = s.oracle.regime_f64();
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for rep in 0..reps {
            let seed = cueval_core::rng::mix_seed(991, &[id as u64, rep]);
            let ds = sample_population(&s, n, seed).unwrap();
            let est = ipw_nb(&ds, &s.regime, &propensity, &IpwOptions::default()).unwrap();
            sum += est.value;
            sumsq += est.value * est.value;
        }
        let mean = sum / reps as f64;
        let sd = ((sumsq / reps as f64 - mean * mean) * reps as f64 / (reps - 1) as f64).sqrt();
        let mc_se = sd / (reps as f64).sqrt();
        assert!(
            (mean - truth).abs() <= 3.0 * mc_se,
            "{id}: mean {mean:.6} vs truth {truth:.6} (3 mc-se = {:.6})",
            3.0 * mc_se
        );
    }
}

#[test]
fn soc_mean_converges_to_oracle_per_setting() {
    // oracle self-consistency over one large draw per setting
    let n = 1_000_000;
    let tol = 3.0 * (0.25f64 / n as f64).sqrt();
    for id in [SettingId::S1, SettingId::S2, SettingId::S3, SettingId::S2M] {
        let s = setting(id);
        let ds = sample_population(&s, n, 17).unwrap();
        let est = soc_mean(&ds).unwrap();
        assert!(
            (est.value - s.oracle.soc_f64()).abs() <= tol,
            "{id}: sample mean {} vs oracle {}",
            est.value,
            s.oracle.soc_f64()
        );
    }
}

#[test]
fn s2_oracle_utility_is_exactly_zero() {
    let s = setting(SettingId::S2);
    assert_eq!(rat_f64(s.oracle.utility), 0.0);
    assert_eq!(s.oracle.utility, cueval_core::simulation::Rat::new(0, 1));
}

#[test]
fn pattern_compression_preserves_estimates() {
    // weighted estimation over the 72-pattern dataset reproduces row-level
    // estimation exactly (this equivalence is what the Monte Carlo relies on)
    let s = setting(SettingId::S1);
    let ds = sample_population(&s, 400, 23).unwrap();
    let counts = compress_to_patterns(&ds).unwrap();
    let patterns = pattern_dataset();

    let spec = cueval_core::data::DesignSpec::saturated_cells(ds.schema()).unwrap();
    let row_model = fit_model(&ds, &spec, None, ModelTarget::TreatmentMultinomial, None).unwrap();
    let pat_model = fit_model(
        &patterns,
        &spec,
        None,
        ModelTarget::TreatmentMultinomial,
        Some(&counts),
    )
    .unwrap();
    for (a, b) in row_model
        .coefficients
        .iter()
        .zip(pat_model.coefficients.iter())
    {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    let row_est = ipw_nb(&ds, &s.regime, &row_model, &IpwOptions::default()).unwrap();
    let pat_est = cueval_core::estimators::ipw_nb_weighted(
        &patterns,
        Some(&counts),
        &s.regime,
        &pat_model,
        &IpwOptions::default(),
    )
    .unwrap();
    assert!((row_est.value - pat_est.value).abs() < 1e-10);
    assert_eq!(row_est.estimator, EstimatorId::IpwNb);
}
