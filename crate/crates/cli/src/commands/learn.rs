use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::Serialize;

use cueval_core::data::ingest_csv;
use cueval_core::regimes::{learn_rff_regime, RegimeKind, RffConfig};
use cueval_core::rng::seeded_permutation;

use crate::commands::write_output;
use crate::config::{load_json, resolve, LearnConfig};
use crate::{resolve_seed, CliError, CliResult, LearnArgs};

#[derive(Serialize)]
struct ArmDiagnostics {
    arm: String,
    holdout_rows: usize,
    rmse: f64,
}

#[derive(Serialize)]
struct LearnDiagnostics {
    train_rows: usize,
    holdout_rows: usize,
    bandwidth: f64,
    feature_count: usize,
    ridge: f64,
    seed: u64,
    per_arm: Vec<ArmDiagnostics>,
    /// Fraction of holdout rows where the learned regime agrees with the
    /// reference regime, when one was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_agreement: Option<f64>,
}

pub fn run(args: LearnArgs) -> CliResult<()> {
    let (file, base): (LearnConfig, PathBuf) = match &args.config {
        Some(path) => (
            load_json(path)?,
            path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        ),
        None => (LearnConfig::default(), PathBuf::from(".")),
    };

    let data_path = args
        .data
        .clone()
        .or_else(|| file.data.as_ref().map(|p| resolve(&base, p)))
        .ok_or_else(|| CliError::config(anyhow!("--data (or config.data) is required")))?;
    let schema = match (&args.schema, &file.schema) {
        (Some(path), _) => crate::config::SchemaSource::Path(path.clone()).load(Path::new("."))?,
        (None, Some(source)) => source.load(&base)?,
        (None, None) => {
            return Err(CliError::config(anyhow!(
                "--schema (or config.schema) is required"
            )))
        }
    };
    let train_fraction = args.train_fraction.or(file.train_fraction).unwrap_or(0.5);
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CliError::config(anyhow!(
            "train fraction {train_fraction} invalid: holdout required (fraction must be in (0,1))"
        )));
    }
    let seed = resolve_seed(args.seed, file.seed);
    let smaller_is_better = match args
        .direction
        .or(file.direction)
        .unwrap_or_else(|| "smaller".into())
        .as_str()
    {
        "smaller" => true,
        "larger" => false,
        other => {
            return Err(CliError::config(anyhow!(
                "direction must be \"smaller\" or \"larger\", got {other:?}"
            )))
        }
    };
    let config = RffConfig {
        feature_count: args.features.or(file.feature_count).unwrap_or(200),
        bandwidth: args.bandwidth.or(file.bandwidth),
        ridge: args.ridge.or(file.ridge).unwrap_or(1.0),
        seed,
        smaller_is_better,
    };
    let out_dir = args
        .out
        .clone()
        .or_else(|| file.output.as_ref().map(|p| resolve(&base, p)))
        .unwrap_or_else(|| PathBuf::from("."));

    let ds = ingest_csv(&data_path, &schema)?;

    // seeded shuffle split
    let rows = seeded_permutation(ds.n(), seed, &[0x7370_6c69]);
    let n_train = ((train_fraction * ds.n() as f64).round() as usize).clamp(1, ds.n() - 1);
    let train = ds.subset(&rows[..n_train])?;
    let holdout = ds.subset(&rows[n_train..])?;

    let regime = learn_rff_regime(&train, &config)?;
    let scorer = match &regime.kind {
        RegimeKind::Learned(s) => s.clone(),
        _ => unreachable!("learner returns a learned regime"),
    };

    // holdout diagnostics: per-arm RMSE of the arm's own predictions
    let preds = scorer.predict_dataset(&holdout)?;
    let levels = holdout.treatment_levels().to_vec();
    let mut per_arm = Vec::new();
    for (a, label) in scorer.arms.iter().enumerate() {
        let arm_level = levels.iter().position(|l| l == label).unwrap() as u32;
        let mut sse = 0.0;
        let mut count = 0usize;
        for i in 0..holdout.n() {
            if holdout.t_idx()[i] == arm_level {
                let e = holdout.y()[i] - preds[i][a];
                sse += e * e;
                count += 1;
            }
        }
        per_arm.push(ArmDiagnostics {
            arm: label.clone(),
            holdout_rows: count,
            rmse: if count > 0 {
                (sse / count as f64).sqrt()
            } else {
                f64::NAN
            },
        });
    }

    let reference_agreement = match &file.reference {
        Some(rc) => {
            let reference = rc.build(&base)?;
            let ours = regime.evaluate(&holdout)?;
            let theirs = reference.evaluate(&holdout)?;
            let agree = ours.iter().zip(&theirs).filter(|(a, b)| a == b).count();
            Some(agree as f64 / holdout.n() as f64)
        }
        None => None,
    };

    let diagnostics = LearnDiagnostics {
        train_rows: train.n(),
        holdout_rows: holdout.n(),
        bandwidth: scorer.bandwidth,
        feature_count: scorer.feature_count,
        ridge: scorer.ridge,
        seed,
        per_arm,
        reference_agreement,
    };

    write_output(
        &out_dir.join("regime.json"),
        &format!("{}\n", regime.to_json()?),
    )?;
    write_output(
        &out_dir.join("learn_diagnostics.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&diagnostics).map_err(|e| CliError::config(e.into()))?
        ),
    )?;
    println!(
        "learned regime on {} rows (holdout {}), bandwidth {:.4}; wrote {}",
        train.n(),
        holdout.n(),
        scorer.bandwidth,
        out_dir.join("regime.json").display()
    );
    if let Some(agreement) = diagnostics.reference_agreement {
        println!(
            "holdout agreement with reference: {:.1}%",
            100.0 * agreement
        );
    }
    Ok(())
}
