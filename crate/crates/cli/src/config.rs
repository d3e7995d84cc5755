//! JSON configuration formats for the subcommands.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use cueval_core::data::{DesignSpec, Schema};
use cueval_core::estimators::{EstimatorId, SOC_ID};
use cueval_core::pipeline::{Comparator, ModelSet, OutcomeFamily, Side};
use cueval_core::regimes::{parse_rule_dsl, Regime};
use cueval_core::simulation::CiMethodKind;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub setting: Option<String>,
    pub n: Option<usize>,
    pub iters: Option<usize>,
    pub boot: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub estimators: Option<Vec<String>>,
    pub ci_methods: Option<Vec<String>>,
    pub level: Option<f64>,
}

/// Where a schema comes from: a path or the inline object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaSource {
    Path(PathBuf),
    Inline(Schema),
}

impl SchemaSource {
    pub fn load(&self, base: &Path) -> Result<Schema, CliError> {
        match self {
            SchemaSource::Inline(schema) => {
                schema.validate().map_err(CliError::from)?;
                Ok(schema.clone())
            }
            SchemaSource::Path(path) => {
                let path = resolve(base, path);
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading schema {}", path.display()))
                    .map_err(CliError::config)?;
                Schema::from_json(&text).map_err(CliError::from)
            }
        }
    }
}

/// One regime definition: exactly one of the payload fields is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub id: String,
    /// Constant treatment label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r#static: Option<String>,
    /// Path to a rule-DSL file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsl: Option<PathBuf>,
    /// Lookup table over covariate columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lookup: Option<LookupConfig>,
    /// Path to a learned-regime JSON file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learned: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookupConfig {
    pub columns: Vec<String>,
    /// Entries as [level values..., label].
    pub entries: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
}

impl RegimeConfig {
    pub fn build(&self, base: &Path) -> Result<Regime, CliError> {
        let chosen = [
            self.r#static.is_some(),
            self.dsl.is_some(),
            self.lookup.is_some(),
            self.learned.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if chosen != 1 {
            return Err(CliError::config(anyhow!(
                "regime {:?} must define exactly one of static, dsl, lookup, learned",
                self.id
            )));
        }
        let regime = if let Some(label) = &self.r#static {
            Regime::static_label(label)
        } else if let Some(path) = &self.dsl {
            let path = resolve(base, path);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading rule file {}", path.display()))
                .map_err(CliError::config)?;
            parse_rule_dsl(&text)?
        } else if let Some(lookup) = &self.lookup {
            let mut entries = Vec::new();
            for entry in &lookup.entries {
                if entry.len() != lookup.columns.len() + 1 {
                    return Err(CliError::config(anyhow!(
                        "lookup entry {entry:?} must list {} level(s) then a label",
                        lookup.columns.len()
                    )));
                }
                let (label, levels) = entry.split_last().unwrap();
                entries.push((levels.to_vec(), label.clone()));
            }
            Regime::lookup(lookup.columns.clone(), entries, lookup.default.clone())
        } else {
            let path = resolve(base, self.learned.as_ref().unwrap());
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading learned regime {}", path.display()))
                .map_err(CliError::config)?;
            Regime::from_json(&text)?
        };
        Ok(regime.with_id(&self.id))
    }
}

/// Design spec or a named preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpecConfig {
    /// "saturated" (cell indicators) or "saturated_concordance"
    /// (cell × concordance indicators).
    Preset(String),
    Spec(DesignSpec),
}

impl ModelSpecConfig {
    fn build(&self, schema: &Schema) -> Result<DesignSpec, CliError> {
        match self {
            ModelSpecConfig::Spec(spec) => Ok(spec.clone()),
            ModelSpecConfig::Preset(name) => match name.as_str() {
                "saturated" => DesignSpec::saturated_cells(schema).map_err(CliError::from),
                "saturated_concordance" => {
                    DesignSpec::saturated_cells_by_concordance(schema).map_err(CliError::from)
                }
                other => Err(CliError::config(anyhow!(
                    "unknown model preset {other:?}; expected \"saturated\" or \"saturated_concordance\" or an inline design spec"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity_nb: Option<ModelSpecConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity_b: Option<ModelSpecConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_b: Option<ModelSpecConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_b_family: Option<OutcomeFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_nb: Option<ModelSpecConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_nb_family: Option<OutcomeFamily>,
}

impl ModelsConfig {
    pub fn build(&self, schema: &Schema) -> Result<ModelSet, CliError> {
        let spec = |m: &Option<ModelSpecConfig>| -> Result<Option<DesignSpec>, CliError> {
            m.as_ref().map(|m| m.build(schema)).transpose()
        };
        Ok(ModelSet {
            propensity_nb: spec(&self.propensity_nb)?,
            propensity_b: spec(&self.propensity_b)?,
            outcome_b: spec(&self.outcome_b)?,
            outcome_b_family: self.outcome_b_family.unwrap_or(OutcomeFamily::Logistic),
            outcome_nb: spec(&self.outcome_nb)?,
            outcome_nb_family: self.outcome_nb_family.unwrap_or(OutcomeFamily::Linear),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiConfig {
    #[serde(default = "default_ci_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn default_ci_methods() -> Vec<String> {
    vec!["bootstrap".into()]
}

fn default_level() -> f64 {
    0.95
}

fn default_replicates() -> usize {
    500
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            methods: default_ci_methods(),
            level: default_level(),
            replicates: default_replicates(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub dataset: PathBuf,
    pub schema: SchemaSource,
    pub regimes: Vec<RegimeConfig>,
    pub estimators: Vec<String>,
    #[serde(default)]
    pub models: ModelsConfig,
    /// Pairs of regime ids (or "soc"); defaults to every regime vs soc plus
    /// every regime pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparators: Option<Vec<[String; 2]>>,
    #[serde(default)]
    pub ci: CiConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub report_improvement: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

pub fn parse_estimators(names: &[String]) -> Result<Vec<EstimatorId>, CliError> {
    if names.is_empty() {
        return Err(CliError::config(anyhow!("at least one estimator required")));
    }
    names
        .iter()
        .map(|n| EstimatorId::parse(n).map_err(CliError::from))
        .collect()
}

pub fn parse_ci_methods(names: &[String]) -> Result<Vec<CiMethodKind>, CliError> {
    names
        .iter()
        .map(|n| match n.as_str() {
            "bootstrap" => Ok(CiMethodKind::Bootstrap),
            "sandwich" => Ok(CiMethodKind::Sandwich),
            other => Err(CliError::config(anyhow!(
                "unknown CI method {other:?}; expected bootstrap or sandwich"
            ))),
        })
        .collect()
}

pub fn parse_comparators(
    configured: &Option<Vec<[String; 2]>>,
    regime_ids: &[String],
) -> Result<Vec<Comparator>, CliError> {
    let side = |name: &str| -> Result<Side, CliError> {
        if name == SOC_ID {
            return Ok(Side::Soc);
        }
        regime_ids
            .iter()
            .position(|id| id == name)
            .map(Side::Regime)
            .ok_or_else(|| {
                CliError::config(anyhow!(
                    "comparator references unknown regime {name:?}; known: {regime_ids:?} and \"{SOC_ID}\""
                ))
            })
    };
    match configured {
        None => Ok(cueval_core::pipeline::PipelinePlan::default_comparators(
            regime_ids.len(),
        )),
        Some(pairs) => pairs
            .iter()
            .map(|[a, b]| {
                Ok(Comparator {
                    a: side(a)?,
                    b: side(b)?,
                })
            })
            .collect(),
    }
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(CliError::config)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(CliError::config)
}

/// Paths inside a config file are relative to the config's directory.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<SchemaSource>,
    pub train_fraction: Option<f64>,
    pub feature_count: Option<usize>,
    pub bandwidth: Option<f64>,
    pub ridge: Option<f64>,
    pub seed: Option<u64>,
    /// "smaller" (default) or "larger": which outcome direction is better.
    pub direction: Option<String>,
    /// Optional reference regime for agreement diagnostics.
    pub reference: Option<RegimeConfig>,
    pub output: Option<PathBuf>,
}
