use anyhow::anyhow;

use cueval_core::estimators::EstimatorId;
use cueval_core::simulation::{run_monte_carlo, CiMethodKind, MonteCarloConfig, SettingId};

use crate::commands::write_output;
use crate::config::{load_json, parse_ci_methods, parse_estimators, SimulateConfig};
use crate::{resolve_seed, CliError, CliResult, SimulateArgs};

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let file: SimulateConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => SimulateConfig::default(),
    };

    let setting_name = args
        .setting
        .or(file.setting)
        .ok_or_else(|| CliError::config(anyhow!("--setting (or config.setting) is required")))?;
    let setting = SettingId::parse(&setting_name)?;
    let n = args.n.or(file.n).unwrap_or(2000);
    let iterations = args.iters.or(file.iters).unwrap_or(2000);
    let bootstrap_replicates = args.boot.or(file.boot).unwrap_or(500);
    let seed = resolve_seed(args.seed, file.seed);
    let workers = args.workers.or(file.workers);
    let level = args.level.or(file.level).unwrap_or(0.95);

    let estimators = match args.estimators {
        Some(list) => parse_estimators(&split(&list))?,
        None => match &file.estimators {
            Some(list) => parse_estimators(list)?,
            None => EstimatorId::REGIME_ESTIMATORS.to_vec(),
        },
    };
    let ci_methods = match args.ci {
        Some(list) => parse_ci_methods(&split(&list))?,
        None => match &file.ci_methods {
            Some(list) => parse_ci_methods(list)?,
            None => vec![CiMethodKind::Bootstrap],
        },
    };

    let config = MonteCarloConfig {
        setting,
        n,
        iterations,
        bootstrap_replicates,
        estimators,
        ci_methods,
        level,
        seed,
        workers,
    };
    let report = run_monte_carlo(&config)?;

    let out_dir = args.out.unwrap_or_else(|| std::path::PathBuf::from("."));
    write_output(&out_dir.join("report.csv"), &report.to_csv())?;
    let registered = cueval_core::simulation::setting(setting);
    let metadata = serde_json::json!({
        "command": "simulate",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "regime": registered.regime.id,
        "model_presets": registered.models,
        "oracle": {
            "utility": report.oracle_utility,
            "regime_value": report.oracle_regime_value,
            "soc": report.oracle_soc,
        },
    });
    write_output(
        &out_dir.join("metadata.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&metadata).map_err(|e| CliError::config(e.into()))?
        ),
    )?;

    println!(
        "setting {} n={} iterations={} bootstrap={} seed={}",
        report.setting, report.n, report.iterations, report.bootstrap_replicates, report.seed
    );
    println!("oracle utility {:+.5}", report.oracle_utility);
    for m in &report.metrics {
        println!(
            "  {:>7}  bias {:+.5}  se {:.5}  coverage {}  failures {}",
            m.estimator.to_string(),
            m.bias,
            m.empirical_se,
            m.coverage_bootstrap
                .map(|c| format!("{c:.3}"))
                .unwrap_or_else(|| "-".into()),
            m.point_failures,
        );
    }
    println!("wrote {}", out_dir.join("report.csv").display());
    Ok(())
}

fn split(list: &str) -> Vec<String> {
    list.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}
