//! Deterministic treatment regimes: static assignments, ordered rule lists
//! (parsed from a small DSL), lookup tables over covariate cells, and
//! regimes learned from data via random Fourier features.
//!
//! A regime is total and deterministic: it returns a declared treatment
//! label for every covariate record of a compatible schema, and the same
//! record always yields the same label. Evaluation is row-wise independent.

mod dsl;
mod rff;

pub use dsl::parse_rule_dsl;
pub use rff::{learn_rff_regime, ColumnEncoding, EncodedColumn, RffConfig, RffScorer};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CompareOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub column: String,
    pub op: CompareOp,
    pub literal: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Static {
        label: String,
    },
    /// Ordered rules; the first whose conditions all hold wins, the default
    /// guarantees totality.
    RuleList {
        rules: Vec<Rule>,
        default: String,
    },
    /// Map from joint covariate levels (of the named columns, label-encoded)
    /// to a treatment label.
    Lookup {
        columns: Vec<String>,
        entries: Vec<(Vec<String>, String)>,
        default: Option<String>,
    },
    Learned(RffScorer),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub id: String,
    pub kind: RegimeKind,
}

impl Regime {
    pub fn static_label(label: &str) -> Regime {
        Regime {
            id: format!("static-{label}"),
            kind: RegimeKind::Static {
                label: label.into(),
            },
        }
    }

    pub fn lookup(
        columns: Vec<String>,
        entries: Vec<(Vec<String>, String)>,
        default: Option<String>,
    ) -> Regime {
        Regime {
            id: "lookup".into(),
            kind: RegimeKind::Lookup {
                columns,
                entries,
                default,
            },
        }
    }

    pub fn with_id(mut self, id: &str) -> Regime {
        self.id = id.into();
        self
    }

    /// Guideline-style threshold rule: below-threshold records get
    /// `low_label`, the rest `high_label`.
    pub fn threshold_rule(
        column: &str,
        threshold: f64,
        low_label: &str,
        high_label: &str,
    ) -> Regime {
        Regime {
            id: "cgl".into(),
            kind: RegimeKind::RuleList {
                rules: vec![Rule {
                    conditions: vec![Condition {
                        column: column.into(),
                        op: CompareOp::Lt,
                        literal: format!("{threshold}"),
                    }],
                    label: low_label.into(),
                }],
                default: high_label.into(),
            },
        }
    }

    /// Evaluates the regime on every row, returning treatment level indices
    /// aligned with row order.
    pub fn evaluate(&self, ds: &Dataset) -> Result<Vec<u32>> {
        let levels = ds.treatment_levels();
        let resolve = |label: &str| -> Result<u32> {
            levels
                .iter()
                .position(|l| l == label)
                .map(|i| i as u32)
                .ok_or_else(|| {
                    Error::Regime(format!(
                        "regime {} produced undeclared treatment label {label:?}",
                        self.id
                    ))
                })
        };
        match &self.kind {
            RegimeKind::Static { label } => {
                let idx = resolve(label)?;
                Ok(vec![idx; ds.n()])
            }
            RegimeKind::RuleList { rules, default } => {
                let mut out = Vec::with_capacity(ds.n());
                for record in ds.records() {
                    let mut label: &str = default;
                    'rules: for rule in rules {
                        for cond in &rule.conditions {
                            if !eval_condition(&record, cond)? {
                                continue 'rules;
                            }
                        }
                        label = &rule.label;
                        break;
                    }
                    out.push(resolve(label)?);
                }
                Ok(out)
            }
            RegimeKind::Lookup {
                columns,
                entries,
                default,
            } => {
                let map: BTreeMap<&[String], &str> = entries
                    .iter()
                    .map(|(k, v)| (k.as_slice(), v.as_str()))
                    .collect();
                let mut out = Vec::with_capacity(ds.n());
                let mut key: Vec<String> = Vec::with_capacity(columns.len());
                for record in ds.records() {
                    key.clear();
                    for col in columns {
                        let value = record.get(col).ok_or_else(|| {
                            Error::Regime(format!(
                                "lookup regime references unknown column {col:?}"
                            ))
                        })?;
                        key.push(match value {
                            Value::Categorical { label, .. } => label.to_string(),
                            Value::Numeric(v) => format!("{v}"),
                        });
                    }
                    let label = match map.get(key.as_slice()) {
                        Some(l) => *l,
                        None => default.as_deref().ok_or_else(|| {
                            Error::Regime(format!(
                                "lookup regime {} has no entry for {:?} and no default",
                                self.id, key
                            ))
                        })?,
                    };
                    out.push(resolve(label)?);
                }
                Ok(out)
            }
            RegimeKind::Learned(scorer) => scorer.assign(ds),
        }
    }

    /// Evaluated labels as strings.
    pub fn evaluate_labels<'a>(&self, ds: &'a Dataset) -> Result<Vec<&'a str>> {
        let idx = self.evaluate(ds)?;
        let levels = ds.treatment_levels();
        Ok(idx.iter().map(|&i| levels[i as usize].as_str()).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Regime> {
        Ok(serde_json::from_str(text)?)
    }
}

fn eval_condition(record: &crate::data::CovariateRecord<'_>, cond: &Condition) -> Result<bool> {
    let value = record.get(&cond.column).ok_or_else(|| {
        Error::Regime(format!(
            "rule predicate references unknown column {:?}",
            cond.column
        ))
    })?;
    let lit_num = cond.literal.parse::<f64>().ok();
    match cond.op {
        CompareOp::Lt | CompareOp::Le | CompareOp::Gt | CompareOp::Ge => {
            let v = value.as_numeric().ok_or_else(|| {
                Error::Regime(format!(
                    "ordered comparison on non-numeric column {:?}",
                    cond.column
                ))
            })?;
            let l = lit_num.ok_or_else(|| {
                Error::Regime(format!(
                    "ordered comparison against non-numeric literal {:?}",
                    cond.literal
                ))
            })?;
            Ok(match cond.op {
                CompareOp::Lt => v < l,
                CompareOp::Le => v <= l,
                CompareOp::Gt => v > l,
                CompareOp::Ge => v >= l,
                _ => unreachable!(),
            })
        }
        CompareOp::Eq | CompareOp::Ne => {
            let eq = match (value.as_numeric(), lit_num) {
                (Some(v), Some(l)) => v == l,
                _ => match value {
                    Value::Categorical { label, .. } => label == cond.literal,
                    Value::Numeric(_) => {
                        return Err(Error::Regime(format!(
                            "equality against non-numeric literal {:?} on numeric column {:?}",
                            cond.literal, cond.column
                        )))
                    }
                },
            };
            Ok(if cond.op == CompareOp::Eq { eq } else { !eq })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnData, CovariateDecl, CovariateKind, Schema, TreatmentDecl};

    fn crp_schema() -> Schema {
        Schema {
            outcome: "y".into(),
            treatment: TreatmentDecl {
                name: "t".into(),
                levels: vec!["csDMARD".into(), "biologics".into()],
            },
            covariates: vec![CovariateDecl {
                name: "crp".into(),
                kind: CovariateKind::Numeric,
            }],
        }
    }

    fn crp_dataset(crp: Vec<f64>) -> Dataset {
        let n = crp.len();
        Dataset::from_columns(
            crp_schema(),
            vec![0.0; n],
            vec![0; n],
            vec![ColumnData::Numeric(crp)],
        )
        .unwrap()
    }

    #[test]
    fn static_regime_is_constant() {
        let ds = crp_dataset(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = Regime::static_label("biologics");
        assert_eq!(r.evaluate(&ds).unwrap(), vec![1, 1, 1, 1, 1]);
    }

    #[test]
    fn guideline_threshold_rule_splits_on_crp() {
        let ds = crp_dataset(vec![8.0, 12.5]);
        let r = Regime::threshold_rule("crp", 10.0, "csDMARD", "biologics");
        let labels = r.evaluate_labels(&ds).unwrap();
        assert_eq!(labels, vec!["csDMARD", "biologics"]);
    }

    #[test]
    fn undeclared_label_is_an_error() {
        let ds = crp_dataset(vec![1.0]);
        let r = Regime::static_label("prednisone");
        assert!(r.evaluate(&ds).is_err());
    }

    #[test]
    fn first_matching_rule_wins() {
        let ds = crp_dataset(vec![5.0]);
        let r = Regime {
            id: "order".into(),
            kind: RegimeKind::RuleList {
                rules: vec![
                    Rule {
                        conditions: vec![Condition {
                            column: "crp".into(),
                            op: CompareOp::Lt,
                            literal: "10".into(),
                        }],
                        label: "csDMARD".into(),
                    },
                    Rule {
                        conditions: vec![Condition {
                            column: "crp".into(),
                            op: CompareOp::Lt,
                            literal: "20".into(),
                        }],
                        label: "biologics".into(),
                    },
                ],
                default: "biologics".into(),
            },
        };
        assert_eq!(r.evaluate_labels(&ds).unwrap(), vec!["csDMARD"]);
    }

    #[test]
    fn lookup_without_entry_and_default_fails() {
        let schema = Schema {
            outcome: "y".into(),
            treatment: TreatmentDecl {
                name: "t".into(),
                levels: vec!["1".into(), "2".into()],
            },
            covariates: vec![CovariateDecl {
                name: "g".into(),
                kind: CovariateKind::Categorical {
                    levels: vec!["a".into(), "b".into()],
                    numeric_view: false,
                },
            }],
        };
        let ds = Dataset::from_columns(
            schema,
            vec![0.0],
            vec![0],
            vec![ColumnData::Categorical(vec![1])],
        )
        .unwrap();
        let r = Regime::lookup(vec!["g".into()], vec![(vec!["a".into()], "1".into())], None);
        assert!(r.evaluate(&ds).is_err());
    }
}
