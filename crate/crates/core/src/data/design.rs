//! Declarative regression designs.
//!
//! A [`DesignSpec`] is an ordered list of terms; each term is an intercept or
//! a product of factors (covariates, the treatment, or the regime-concordance
//! indicator). Building a design is a pure function of its inputs: columns
//! appear in term order, categorical levels in declared order, so identical
//! inputs produce bit-identical matrices.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regimes::Regime;

use super::{ColumnData, CovariateKind, Dataset};

pub const INTERCEPT_NAME: &str = "(intercept)";
pub const CONCORDANT_NAME: &str = "concordant";

/// Coding rule for categorical factors: one indicator per level, or one per
/// non-reference level (the first declared level is the reference).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    FullDummy,
    #[default]
    Reference,
}

/// What a factor reads from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorSource {
    Covariate(String),
    Treatment,
    Concordance,
}

/// One multiplicand of a product term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub source: FactorSource,
    /// Use the numeric view of a categorical covariate instead of dummies.
    #[serde(default)]
    pub numeric: bool,
}

impl Factor {
    pub fn covariate(name: &str) -> Factor {
        Factor {
            source: FactorSource::Covariate(name.into()),
            numeric: false,
        }
    }

    pub fn numeric_covariate(name: &str) -> Factor {
        Factor {
            source: FactorSource::Covariate(name.into()),
            numeric: true,
        }
    }

    pub fn treatment() -> Factor {
        Factor {
            source: FactorSource::Treatment,
            numeric: false,
        }
    }

    pub fn concordance() -> Factor {
        Factor {
            source: FactorSource::Concordance,
            numeric: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Intercept,
    Product(Vec<Factor>),
}

impl Term {
    pub fn main(name: &str) -> Term {
        Term::Product(vec![Factor::covariate(name)])
    }

    pub fn numeric(name: &str) -> Term {
        Term::Product(vec![Factor::numeric_covariate(name)])
    }

    pub fn treatment() -> Term {
        Term::Product(vec![Factor::treatment()])
    }

    pub fn concordance() -> Term {
        Term::Product(vec![Factor::concordance()])
    }

    pub fn interaction(factors: Vec<Factor>) -> Term {
        Term::Product(factors)
    }
}

/// Ordered term list plus the coding rule for categoricals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub terms: Vec<Term>,
    #[serde(default)]
    pub coding: Coding,
}

impl DesignSpec {
    pub fn new(terms: Vec<Term>) -> DesignSpec {
        DesignSpec {
            terms,
            coding: Coding::Reference,
        }
    }

    pub fn with_coding(mut self, coding: Coding) -> DesignSpec {
        self.coding = coding;
        self
    }

    pub fn intercept_only() -> DesignSpec {
        DesignSpec::new(vec![Term::Intercept])
    }

    /// Saturated design over the joint categorical covariate cells: exactly
    /// one indicator per cell, no intercept.
    pub fn saturated_cells(schema: &super::Schema) -> Result<DesignSpec> {
        let factors = saturated_factors(schema)?;
        Ok(DesignSpec {
            terms: vec![Term::Product(factors)],
            coding: Coding::FullDummy,
        })
    }

    /// Saturated design over (covariate cell) × (concordance level): one
    /// indicator per combination.
    pub fn saturated_cells_by_concordance(schema: &super::Schema) -> Result<DesignSpec> {
        let mut factors = saturated_factors(schema)?;
        factors.push(Factor::concordance());
        Ok(DesignSpec {
            terms: vec![Term::Product(factors)],
            coding: Coding::FullDummy,
        })
    }

    pub fn requires_treatment(&self) -> bool {
        self.any_factor(|f| f.source == FactorSource::Treatment)
    }

    pub fn requires_concordance(&self) -> bool {
        self.any_factor(|f| f.source == FactorSource::Concordance)
    }

    fn any_factor(&self, pred: impl Fn(&Factor) -> bool) -> bool {
        self.terms.iter().any(|t| match t {
            Term::Intercept => false,
            Term::Product(fs) => fs.iter().any(&pred),
        })
    }
}

fn saturated_factors(schema: &super::Schema) -> Result<Vec<Factor>> {
    let mut factors = Vec::new();
    for c in &schema.covariates {
        match c.kind {
            CovariateKind::Categorical { .. } => factors.push(Factor::covariate(&c.name)),
            CovariateKind::Numeric => {
                return Err(Error::Design(format!(
                    "saturated design requires categorical covariates; {} is numeric",
                    c.name
                )))
            }
        }
    }
    if factors.is_empty() {
        return Err(Error::Design(
            "saturated design requires at least one covariate".into(),
        ));
    }
    Ok(factors)
}

/// A built design matrix with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Array2<f64>,
    pub names: Vec<String>,
}

impl Design {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }
}

/// Row-level substitutions used by the g-computation estimators: predict
/// with the treatment set to the regime's label, or with the concordance
/// indicator forced to a level.
#[derive(Debug, Clone, Copy, Default)]
pub struct DesignOverrides<'a> {
    pub treatment: Option<&'a [u32]>,
    pub concordance: Option<u8>,
}

/// Builds the design matrix for `spec` on `ds`. A regime must be supplied
/// when the spec contains a concordance term.
pub fn build_design(ds: &Dataset, spec: &DesignSpec, regime: Option<&Regime>) -> Result<Design> {
    build_design_with(ds, spec, regime, DesignOverrides::default())
}

/// [`build_design`] with explicit row-level overrides.
pub fn build_design_with(
    ds: &Dataset,
    spec: &DesignSpec,
    regime: Option<&Regime>,
    overrides: DesignOverrides<'_>,
) -> Result<Design> {
    let n = ds.n();

    // concordance levels are shared by every concordance factor
    let concordance: Option<Vec<u32>> = if spec.requires_concordance() {
        Some(match overrides.concordance {
            Some(level) => vec![level as u32; n],
            None => {
                let regime = regime.ok_or_else(|| {
                    Error::Design(
                        "design contains a concordance term but no regime was supplied".into(),
                    )
                })?;
                let labels = regime.evaluate(ds)?;
                labels
                    .iter()
                    .zip(ds.t_idx())
                    .map(|(&f, &t)| u32::from(f == t))
                    .collect()
            }
        })
    } else {
        None
    };

    if let Some(t_over) = overrides.treatment {
        if t_over.len() != n {
            return Err(Error::Design("treatment override length mismatch".into()));
        }
    }

    let mut names: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for term in &spec.terms {
        match term {
            Term::Intercept => {
                names.push(INTERCEPT_NAME.to_string());
                columns.push(vec![1.0; n]);
            }
            Term::Product(factors) => {
                if factors.is_empty() {
                    return Err(Error::Design("empty product term".into()));
                }
                // cross product of factor encodings, leftmost factor slowest
                let mut acc: Vec<(String, Vec<f64>)> = vec![(String::new(), vec![1.0; n])];
                for factor in factors {
                    let parts =
                        encode_factor(ds, factor, spec.coding, concordance.as_deref(), overrides)?;
                    let mut next = Vec::with_capacity(acc.len() * parts.len());
                    for (prefix, base) in &acc {
                        for (suffix, values) in &parts {
                            let name = if prefix.is_empty() {
                                suffix.clone()
                            } else {
                                format!("{prefix}:{suffix}")
                            };
                            let col = base.iter().zip(values).map(|(a, b)| a * b).collect();
                            next.push((name, col));
                        }
                    }
                    acc = next;
                }
                for (name, col) in acc {
                    names.push(name);
                    columns.push(col);
                }
            }
        }
    }

    let p = columns.len();
    let mut x = Array2::<f64>::zeros((n, p));
    for (j, col) in columns.iter().enumerate() {
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    Ok(Design { x, names })
}

fn encode_factor(
    ds: &Dataset,
    factor: &Factor,
    coding: Coding,
    concordance: Option<&[u32]>,
    overrides: DesignOverrides<'_>,
) -> Result<Vec<(String, Vec<f64>)>> {
    let n = ds.n();
    match &factor.source {
        FactorSource::Covariate(name) => {
            let (_, decl) = ds
                .schema()
                .covariate(name)
                .ok_or_else(|| Error::Design(format!("term references unknown column {name:?}")))?;
            match (&decl.kind, factor.numeric) {
                (CovariateKind::Numeric, _) => Ok(vec![(name.clone(), ds.numeric_view(name)?)]),
                (CovariateKind::Categorical { .. }, true) => {
                    Ok(vec![(name.clone(), ds.numeric_view(name)?)])
                }
                (CovariateKind::Categorical { levels, .. }, false) => {
                    let data = match ds.column(name) {
                        Some(ColumnData::Categorical(v)) => v,
                        _ => unreachable!(),
                    };
                    Ok(dummy_columns(name, levels, data, coding, n))
                }
            }
        }
        FactorSource::Treatment => {
            let levels = ds.treatment_levels();
            let data: &[u32] = overrides.treatment.unwrap_or(ds.t_idx());
            if data.iter().any(|&v| v as usize >= levels.len()) {
                return Err(Error::Design(
                    "treatment override level out of range".into(),
                ));
            }
            let owned: Vec<u32> = data.to_vec();
            Ok(dummy_columns(
                &ds.schema().treatment.name,
                levels,
                &owned,
                coding,
                n,
            ))
        }
        FactorSource::Concordance => {
            let conc = concordance.expect("concordance precomputed when required");
            match coding {
                Coding::Reference => Ok(vec![(
                    CONCORDANT_NAME.to_string(),
                    conc.iter().map(|&c| c as f64).collect(),
                )]),
                Coding::FullDummy => {
                    let levels = ["0".to_string(), "1".to_string()];
                    Ok(dummy_columns(CONCORDANT_NAME, &levels, conc, coding, n))
                }
            }
        }
    }
}

fn dummy_columns(
    name: &str,
    levels: &[String],
    data: &[u32],
    coding: Coding,
    n: usize,
) -> Vec<(String, Vec<f64>)> {
    let start = match coding {
        Coding::FullDummy => 0,
        Coding::Reference => 1,
    };
    (start..levels.len())
        .map(|l| {
            let mut col = vec![0.0; n];
            for (i, &v) in data.iter().enumerate() {
                if v as usize == l {
                    col[i] = 1.0;
                }
            }
            (format!("{name}={}", levels[l]), col)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CovariateDecl, Schema, TreatmentDecl};

    fn schema() -> Schema {
        Schema {
            outcome: "y".into(),
            treatment: TreatmentDecl {
                name: "t".into(),
                levels: vec!["1".into(), "2".into(), "3".into()],
            },
            covariates: vec![
                CovariateDecl {
                    name: "z1".into(),
                    kind: CovariateKind::Categorical {
                        levels: vec![
                            "0".into(),
                            "0.2".into(),
                            "0.4".into(),
                            "0.6".into(),
                            "0.8".into(),
                            "1".into(),
                        ],
                        numeric_view: true,
                    },
                },
                CovariateDecl {
                    name: "z2".into(),
                    kind: CovariateKind::Categorical {
                        levels: vec!["0".into(), "1".into()],
                        numeric_view: true,
                    },
                },
            ],
        }
    }

    fn dataset() -> Dataset {
        Dataset::from_columns(
            schema(),
            vec![0.0, 1.0, 1.0],
            vec![0, 1, 2],
            vec![
                ColumnData::Categorical(vec![0, 1, 5]),
                ColumnData::Categorical(vec![0, 1, 1]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn saturated_design_has_one_indicator_per_cell() {
        let ds = dataset();
        let spec = DesignSpec::saturated_cells(ds.schema()).unwrap();
        let d = build_design(&ds, &spec, None).unwrap();
        assert_eq!(d.width(), 12);
        for i in 0..d.n() {
            let s: f64 = d.x.row(i).sum();
            assert_eq!(s, 1.0);
        }
        assert_eq!(d.names[0], "z1=0:z2=0");
        assert_eq!(d.names[11], "z1=1:z2=1");
    }

    #[test]
    fn intercept_plus_numeric_z1() {
        let ds = dataset();
        let spec = DesignSpec::new(vec![Term::Intercept, Term::numeric("z1")]);
        let d = build_design(&ds, &spec, None).unwrap();
        assert_eq!(d.names, vec!["(intercept)".to_string(), "z1".to_string()]);
        assert_eq!(d.x[(0, 0)], 1.0);
        assert_eq!(d.x[(0, 1)], 0.0);
        assert_eq!(d.x[(1, 0)], 1.0);
        assert_eq!(d.x[(1, 1)], 0.2);
    }

    #[test]
    fn concordance_of_identity_regime_is_all_ones() {
        let ds = dataset();
        // regime that copies the observed treatment per row: a lookup on
        // both covariates that happens to match this dataset's t column
        let regime = Regime::lookup(
            vec!["z1".into(), "z2".into()],
            vec![
                (vec!["0".into(), "0".into()], "1".into()),
                (vec!["0.2".into(), "1".into()], "2".into()),
                (vec!["1".into(), "1".into()], "3".into()),
            ],
            Some("1".into()),
        );
        let spec = DesignSpec::new(vec![Term::concordance()]);
        let d = build_design(&ds, &spec, Some(&regime)).unwrap();
        assert_eq!(d.names, vec!["concordant".to_string()]);
        assert!(d.x.column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn concordance_without_regime_is_an_error() {
        let ds = dataset();
        let spec = DesignSpec::new(vec![Term::concordance()]);
        let err = build_design(&ds, &spec, None).unwrap_err();
        assert!(err.to_string().contains("no regime"));
    }

    #[test]
    fn unknown_column_is_an_error() {
        let ds = dataset();
        let spec = DesignSpec::new(vec![Term::main("zz")]);
        let err = build_design(&ds, &spec, None).unwrap_err();
        assert!(err.to_string().contains("unknown column"));
    }

    #[test]
    fn build_design_is_pure() {
        let ds = dataset();
        let spec = DesignSpec::saturated_cells_by_concordance(ds.schema()).unwrap();
        let regime = Regime::static_label("2");
        let a = build_design(&ds, &spec, Some(&regime)).unwrap();
        let b = build_design(&ds, &spec, Some(&regime)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.width(), 24);
    }

    #[test]
    fn treatment_override_moves_indicators() {
        let ds = dataset();
        let spec = DesignSpec::new(vec![Term::treatment()]).with_coding(Coding::FullDummy);
        let over = [1u32, 1, 1];
        let d = build_design_with(
            &ds,
            &spec,
            None,
            DesignOverrides {
                treatment: Some(&over),
                concordance: None,
            },
        )
        .unwrap();
        assert_eq!(d.names, vec!["t=1", "t=2", "t=3"]);
        for i in 0..3 {
            assert_eq!(d.x[(i, 1)], 1.0);
            assert_eq!(d.x[(i, 0)] + d.x[(i, 2)], 0.0);
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = DesignSpec::new(vec![
            Term::Intercept,
            Term::numeric("z1"),
            Term::interaction(vec![Factor::treatment(), Factor::numeric_covariate("z1")]),
            Term::concordance(),
        ]);
        let text = serde_json::to_string(&spec).unwrap();
        let back: DesignSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
