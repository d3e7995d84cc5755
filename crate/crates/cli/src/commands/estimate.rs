use std::path::{Path, PathBuf};

use anyhow::anyhow;

use cueval_core::data::{build_design, ingest_csv, Dataset};
use cueval_core::estimators::{EstimatorId, IpwOptions, UtilityEstimate, UTILITY_CSV_HEADER};
use cueval_core::glm::{predict, Predictions};
use cueval_core::inference::{bootstrap_ci, sandwich_utility, BootstrapConfig, SandwichEstimator};
use cueval_core::pipeline::{prepare, PipelinePlan, PipelineRun, Side};
use cueval_core::regimes::Regime;
use cueval_core::simulation::CiMethodKind;
use cueval_core::Error as CoreError;

use crate::commands::write_output;
use crate::config::{
    load_json, parse_ci_methods, parse_comparators, parse_estimators, resolve, AnalysisConfig,
};
use crate::forest::{parse_estimates_csv, render_forest};
use crate::{resolve_seed, CliError, CliResult, EstimateArgs};

pub fn run(args: EstimateArgs) -> CliResult<()> {
    let config: AnalysisConfig = load_json(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(|p| resolve(&base, p)))
        .unwrap_or_else(|| PathBuf::from("."));
    let seed = resolve_seed(args.seed, config.seed);
    let report_improvement = args.report_improvement || config.report_improvement;
    let weight_cap = args.weight_cap.or(config.weight_cap);

    // data
    let schema = config.schema.load(&base)?;
    let ds = ingest_csv(&resolve(&base, &config.dataset), &schema)?;

    // regimes
    let mut regimes = Vec::new();
    for rc in &config.regimes {
        regimes.push(rc.build(&base)?);
    }
    let ids: Vec<String> = regimes.iter().map(|r| r.id.clone()).collect();
    for (i, id) in ids.iter().enumerate() {
        if ids[i + 1..].contains(id) {
            return Err(CliError::config(anyhow!("duplicate regime id {id:?}")));
        }
    }

    let estimators = parse_estimators(&config.estimators)?;
    let models = config.models.build(&schema)?;
    let comparators = parse_comparators(&config.comparators, &ids)?;
    let ci_methods = parse_ci_methods(&config.ci.methods)?;
    let level = config.ci.level;

    let ipw = IpwOptions {
        weight_cap,
        ..IpwOptions::default()
    };
    let plan = PipelinePlan {
        regimes,
        estimators,
        comparators,
        models,
        ipw,
    };
    let prepared = prepare(&ds, &plan)?;

    let run = match prepared.run(None) {
        Ok(run) => run,
        Err(CoreError::Positivity {
            row,
            propensity,
            floor,
        }) => {
            let path = out_dir.join("diagnostics.csv");
            write_positivity_diagnostics(&ds, &plan, &path)?;
            return Err(CliError::estimation(anyhow!(
                "positivity violation at row {row} (propensity {propensity:e} below {floor:e}); per-row diagnostics written to {}; rerun with --weight-cap to cap weights instead",
                path.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };

    // intervals
    let mut utilities: Vec<UtilityEstimate> = run.utilities.clone();
    if ci_methods.contains(&CiMethodKind::Bootstrap) {
        let boot = bootstrap_ci(
            ds.n(),
            None,
            prepared.n_stats(),
            |w| prepared.run(Some(w)).map(|r| r.stats()),
            &BootstrapConfig {
                replicates: config.ci.replicates,
                seed,
                level,
                parallel: true,
            },
        )?;
        for (u, ci) in utilities.iter_mut().zip(boot.intervals) {
            u.intervals.push(ci);
        }
    }
    if ci_methods.contains(&CiMethodKind::Sandwich) {
        attach_sandwich(&ds, &plan, &run, &mut utilities, level)?;
    }

    // outputs: flat CSV, forest derived from the CSV, metadata
    let mut csv_text = String::from(UTILITY_CSV_HEADER);
    csv_text.push('\n');
    for u in &utilities {
        for row in u.csv_rows() {
            csv_text.push_str(&row);
            csv_text.push('\n');
        }
    }
    write_output(&out_dir.join("estimates.csv"), &csv_text)?;
    let svg = render_forest(&parse_estimates_csv(&csv_text)?);
    write_output(&out_dir.join("forest.svg"), &svg)?;

    let metadata = serde_json::json!({
        "command": "estimate",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "level": level,
        "ci_replicates": config.ci.replicates,
        "dataset": config.dataset,
        "n": ds.n(),
        "estimators": config.estimators,
        "regimes": plan.regimes.iter().map(|r| r.id.clone()).collect::<Vec<_>>(),
        "weight_cap": weight_cap,
        "sign_convention": "utility = value(a) - value(b); improvement is negative when smaller outcomes are better",
    });
    write_output(
        &out_dir.join("metadata.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&metadata).map_err(|e| CliError::config(e.into()))?
        ),
    )?;

    // console summary (the only place --report-improvement applies)
    let sign = if report_improvement { -1.0 } else { 1.0 };
    if report_improvement {
        println!("displayed differences are negated (improvement positive); files keep value(a) - value(b)");
    }
    println!("n = {}", ds.n());
    for u in &utilities {
        let shown = sign * u.difference;
        let ci_text = u
            .intervals
            .iter()
            .map(|ci| {
                let (mut lo, mut hi) = (ci.lower, ci.upper);
                if report_improvement {
                    (lo, hi) = (-hi, -lo);
                }
                format!("[{lo:+.4}, {hi:+.4}] {}", ci.method)
            })
            .collect::<Vec<_>>()
            .join("  ");
        println!(
            "  {:>7}  {} vs {}: {shown:+.4}  {ci_text}",
            u.estimator.to_string(),
            u.a,
            u.b
        );
    }
    println!("wrote {}", out_dir.join("estimates.csv").display());
    Ok(())
}

fn attach_sandwich(
    ds: &Dataset,
    plan: &PipelinePlan,
    run: &PipelineRun,
    utilities: &mut [UtilityEstimate],
    level: f64,
) -> CliResult<()> {
    for (ei, est) in plan.estimators.iter().enumerate() {
        for (ci_idx, comp) in plan.comparators.iter().enumerate() {
            let side = |s: Side| -> CliResult<SandwichEstimator<'_>> {
                Ok(match s {
                    Side::Soc => SandwichEstimator::SocMean,
                    Side::Regime(r) => match est {
                        EstimatorId::IpwNb => SandwichEstimator::IpwNb {
                            regime: &plan.regimes[r],
                            propensity: run.models.propensity_nb.as_ref().expect("fitted"),
                            opts: plan.ipw,
                        },
                        EstimatorId::IpwB => SandwichEstimator::IpwB {
                            regime: &plan.regimes[r],
                            propensity: run.models.propensity_b[r].as_ref().expect("fitted"),
                            opts: plan.ipw,
                        },
                        EstimatorId::GcB => SandwichEstimator::GcB {
                            regime: &plan.regimes[r],
                            outcome: run.models.outcome_b[r].as_ref().expect("fitted"),
                        },
                        EstimatorId::GcNb => SandwichEstimator::GcNb {
                            regime: &plan.regimes[r],
                            outcome: run.models.outcome_nb.as_ref().expect("fitted"),
                        },
                        EstimatorId::SocMean => SandwichEstimator::SocMean,
                    },
                })
            };
            let a = side(comp.a)?;
            let b = side(comp.b)?;
            let result = sandwich_utility(ds, None, &a, &b, level)?;
            utilities[ei * plan.comparators.len() + ci_idx]
                .intervals
                .push(result.interval);
        }
    }
    Ok(())
}

/// Per-row positivity diagnostics: every concordant row whose estimated
/// propensity falls below the floor, for each requested IPW estimator.
fn write_positivity_diagnostics(ds: &Dataset, plan: &PipelinePlan, path: &Path) -> CliResult<()> {
    use cueval_core::glm::{fit_model, ModelTarget};
    let floor = plan.ipw.floor;
    let mut out = String::from("estimator,regime,row,propensity,treatment\n");
    let mut push = |est: &str, regime: &Regime, row: usize, p: f64, t: &str| {
        out.push_str(&format!("{est},{},{},{p:e},{t}\n", regime.id, row + 1));
    };
    if plan.estimators.contains(&EstimatorId::IpwNb) {
        if let Some(spec) = &plan.models.propensity_nb {
            let model = fit_model(ds, spec, None, ModelTarget::TreatmentMultinomial, None)?;
            let design = build_design(ds, spec, None)?;
            if let Predictions::LevelProbabilities(probs) = predict(&model, design.x.view())? {
                for regime in &plan.regimes {
                    let f = regime.evaluate(ds)?;
                    for i in 0..ds.n() {
                        if f[i] == ds.t_idx()[i] {
                            let p = probs[(i, ds.t_idx()[i] as usize)];
                            if p < floor {
                                push("ipw_nb", regime, i, p, ds.t_label(i));
                            }
                        }
                    }
                }
            }
        }
    }
    if plan.estimators.contains(&EstimatorId::IpwB) {
        if let Some(spec) = &plan.models.propensity_b {
            let design = build_design(ds, spec, None)?;
            for regime in &plan.regimes {
                let model = fit_model(
                    ds,
                    spec,
                    Some(regime),
                    ModelTarget::ConcordanceLogistic,
                    None,
                )?;
                if let Predictions::Probabilities(probs) = predict(&model, design.x.view())? {
                    let f = regime.evaluate(ds)?;
                    for i in 0..ds.n() {
                        if f[i] == ds.t_idx()[i] && probs[i] < floor {
                            push("ipw_b", regime, i, probs[i], ds.t_label(i));
                        }
                    }
                }
            }
        }
    }
    write_output(path, &out)?;
    Ok(())
}
