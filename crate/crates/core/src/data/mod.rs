//! Tabular data model: column schemas, validated datasets, covariate cells,
//! design-matrix construction, and CSV ingestion.
//!
//! A dataset holds one outcome column `y` (binary or real), one treatment
//! column `t` over a declared finite label set with at least two levels, and
//! any number of covariate columns. Values are validated at construction;
//! missingness is rejected, never imputed. Datasets are immutable once built
//! and safe to share across threads.

mod csv_io;
mod design;

pub use csv_io::{ingest_csv, ingest_csv_reader, write_csv, write_csv_writer};
pub use design::{
    build_design, build_design_with, Coding, Design, DesignOverrides, DesignSpec, Factor,
    FactorSource, Term,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared type of a covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CovariateKind {
    Numeric,
    Categorical {
        levels: Vec<String>,
        /// When true the labels must parse as numbers, and the column can be
        /// used both as a factor (saturated designs) and as a numeric term
        /// (additive designs) in the same schema.
        #[serde(default)]
        numeric_view: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateDecl {
    pub name: String,
    #[serde(flatten)]
    pub kind: CovariateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentDecl {
    pub name: String,
    pub levels: Vec<String>,
}

/// Column/type/level declaration for a dataset. Column order, and the order
/// of categorical levels, is the declared order throughout: design columns,
/// cell ids and coefficient layouts all follow it, so repeated runs produce
/// identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub outcome: String,
    pub treatment: TreatmentDecl,
    pub covariates: Vec<CovariateDecl>,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        if self.treatment.levels.len() < 2 {
            return Err(Error::Schema(format!(
                "treatment column {} declares {} level(s); at least 2 required",
                self.treatment.name,
                self.treatment.levels.len()
            )));
        }
        let mut names: Vec<&str> = vec![&self.outcome, &self.treatment.name];
        for c in &self.covariates {
            names.push(&c.name);
        }
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::Schema(format!("duplicate column name {a:?}")));
            }
        }
        for c in &self.covariates {
            if let CovariateKind::Categorical {
                levels,
                numeric_view,
            } = &c.kind
            {
                if levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "column {} declares no levels",
                        c.name
                    )));
                }
                let mut seen = levels.clone();
                seen.sort();
                seen.dedup();
                if seen.len() != levels.len() {
                    return Err(Error::Schema(format!(
                        "column {} has duplicate levels",
                        c.name
                    )));
                }
                if *numeric_view {
                    for l in levels {
                        if l.parse::<f64>().is_err() {
                            return Err(Error::Schema(format!(
                                "column {} declares numeric_view but level {l:?} is not numeric",
                                c.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn covariate(&self, name: &str) -> Option<(usize, &CovariateDecl)> {
        self.covariates
            .iter()
            .enumerate()
            .find(|(_, c)| c.name == name)
    }

    /// Parses a schema from its JSON representation.
    pub fn from_json(text: &str) -> Result<Schema> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }
}

/// Stored column values. Categorical values are level indices into the
/// declared level list.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<u32>),
}

/// One value of a covariate record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Numeric(f64),
    Categorical { level: u32, label: &'a str },
}

impl Value<'_> {
    /// Numeric content of the value, if it has one (numeric columns, or
    /// categorical columns whose labels parse as numbers).
    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            Value::Numeric(v) => Some(*v),
            Value::Categorical { label, .. } => label.parse::<f64>().ok(),
        }
    }
}

/// Borrowed view of one row's covariates.
#[derive(Debug, Clone, Copy)]
pub struct CovariateRecord<'a> {
    dataset: &'a Dataset,
    row: usize,
}

impl<'a> CovariateRecord<'a> {
    pub fn get(&self, name: &str) -> Option<Value<'a>> {
        let (idx, decl) = self.dataset.schema.covariate(name)?;
        Some(match (&self.dataset.covariates[idx], &decl.kind) {
            (ColumnData::Numeric(v), _) => Value::Numeric(v[self.row]),
            (ColumnData::Categorical(v), CovariateKind::Categorical { levels, .. }) => {
                let level = v[self.row];
                Value::Categorical {
                    level,
                    label: &levels[level as usize],
                }
            }
            _ => unreachable!("column storage matches schema by construction"),
        })
    }

    pub fn row(&self) -> usize {
        self.row
    }
}

/// A validated rectangular dataset of (y, t, z) rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    y: Vec<f64>,
    y_binary: bool,
    t: Vec<u32>,
    covariates: Vec<ColumnData>,
}

impl Dataset {
    /// Builds a dataset from parsed columns, enforcing all invariants:
    /// at least one row, equal column lengths, treatment indices in range,
    /// categorical indices in range, all values finite.
    pub fn from_columns(
        schema: Schema,
        y: Vec<f64>,
        t: Vec<u32>,
        covariates: Vec<ColumnData>,
    ) -> Result<Dataset> {
        schema.validate()?;
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if t.len() != n {
            return Err(Error::Schema("treatment column length mismatch".into()));
        }
        if covariates.len() != schema.covariates.len() {
            return Err(Error::Schema("covariate column count mismatch".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("outcome contains non-finite values".into()));
        }
        let k = schema.treatment.levels.len() as u32;
        if t.iter().any(|&v| v >= k) {
            return Err(Error::Schema("treatment index out of range".into()));
        }
        for (col, decl) in covariates.iter().zip(&schema.covariates) {
            match (col, &decl.kind) {
                (ColumnData::Numeric(v), CovariateKind::Numeric) => {
                    if v.len() != n {
                        return Err(Error::Schema(format!(
                            "column {} length mismatch",
                            decl.name
                        )));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Schema(format!(
                            "column {} contains non-finite values",
                            decl.name
                        )));
                    }
                }
                (ColumnData::Categorical(v), CovariateKind::Categorical { levels, .. }) => {
                    if v.len() != n {
                        return Err(Error::Schema(format!(
                            "column {} length mismatch",
                            decl.name
                        )));
                    }
                    if v.iter().any(|&x| x as usize >= levels.len()) {
                        return Err(Error::Schema(format!(
                            "column {} level index out of range",
                            decl.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "column {} storage does not match its declared type",
                        decl.name
                    )))
                }
            }
        }
        let y_binary = y.iter().all(|&v| v == 0.0 || v == 1.0);
        Ok(Dataset {
            schema,
            y,
            y_binary,
            t,
            covariates,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// True when every outcome value is exactly 0 or 1.
    pub fn y_is_binary(&self) -> bool {
        self.y_binary
    }

    /// Treatment as level indices into `schema.treatment.levels`.
    pub fn t_idx(&self) -> &[u32] {
        &self.t
    }

    pub fn treatment_levels(&self) -> &[String] {
        &self.schema.treatment.levels
    }

    pub fn t_label(&self, row: usize) -> &str {
        &self.schema.treatment.levels[self.t[row] as usize]
    }

    pub fn record(&self, row: usize) -> CovariateRecord<'_> {
        CovariateRecord { dataset: self, row }
    }

    pub fn records(&self) -> impl Iterator<Item = CovariateRecord<'_>> {
        (0..self.n()).map(move |row| CovariateRecord { dataset: self, row })
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        let (idx, _) = self.schema.covariate(name)?;
        Some(&self.covariates[idx])
    }

    /// A new dataset containing the given rows (in the given order).
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.iter().any(|&r| r >= self.n()) {
            return Err(Error::Schema("subset row index out of range".into()));
        }
        let y = rows.iter().map(|&r| self.y[r]).collect();
        let t = rows.iter().map(|&r| self.t[r]).collect();
        let covariates = self
            .covariates
            .iter()
            .map(|col| match col {
                ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
                ColumnData::Categorical(v) => {
                    ColumnData::Categorical(rows.iter().map(|&r| v[r]).collect())
                }
            })
            .collect();
        Dataset::from_columns(self.schema.clone(), y, t, covariates)
    }

    /// Numeric values of a covariate column: identity for numeric columns,
    /// parsed labels for categorical columns with `numeric_view`.
    pub fn numeric_view(&self, name: &str) -> Result<Vec<f64>> {
        let (idx, decl) = self
            .schema
            .covariate(name)
            .ok_or_else(|| Error::Design(format!("unknown column {name:?}")))?;
        match (&self.covariates[idx], &decl.kind) {
            (ColumnData::Numeric(v), _) => Ok(v.clone()),
            (
                ColumnData::Categorical(v),
                CovariateKind::Categorical {
                    levels,
                    numeric_view,
                },
            ) => {
                if !numeric_view {
                    return Err(Error::Design(format!(
                        "column {name:?} is categorical without a numeric view"
                    )));
                }
                let values: Vec<f64> = levels.iter().map(|l| l.parse::<f64>().unwrap()).collect();
                Ok(v.iter().map(|&i| values[i as usize]).collect())
            }
            _ => unreachable!(),
        }
    }
}

/// Bijection between joint categorical covariate values and integer cell
/// ids. Cell ids are mixed-radix over the declared covariate order with the
/// last covariate varying fastest.
#[derive(Debug, Clone)]
pub struct CellIndex {
    sizes: Vec<usize>,
    names: Vec<String>,
    level_labels: Vec<Vec<String>>,
}

impl CellIndex {
    /// Builds the index over all covariates of the schema; every covariate
    /// must be categorical.
    pub fn from_schema(schema: &Schema) -> Result<CellIndex> {
        let mut sizes = Vec::new();
        let mut names = Vec::new();
        let mut level_labels = Vec::new();
        for c in &schema.covariates {
            match &c.kind {
                CovariateKind::Categorical { levels, .. } => {
                    sizes.push(levels.len());
                    names.push(c.name.clone());
                    level_labels.push(levels.clone());
                }
                CovariateKind::Numeric => {
                    return Err(Error::Design(format!(
                        "cell index requires categorical covariates; {} is numeric",
                        c.name
                    )))
                }
            }
        }
        if sizes.is_empty() {
            return Err(Error::Design(
                "cell index requires at least one covariate".into(),
            ));
        }
        Ok(CellIndex {
            sizes,
            names,
            level_labels,
        })
    }

    /// Total number of cells: the product of the level-set sizes.
    pub fn n_cells(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Cell id of one row.
    pub fn cell_of_row(&self, ds: &Dataset, row: usize) -> usize {
        let mut id = 0;
        for (k, name) in self.names.iter().enumerate() {
            let level = match ds.column(name) {
                Some(ColumnData::Categorical(v)) => v[row] as usize,
                _ => unreachable!("index built from the same schema"),
            };
            id = id * self.sizes[k] + level;
        }
        id
    }

    /// Cell ids for every row, in row order.
    pub fn cells(&self, ds: &Dataset) -> Vec<usize> {
        (0..ds.n()).map(|row| self.cell_of_row(ds, row)).collect()
    }

    /// Level indices of a cell id, in covariate order.
    pub fn decode(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            out[k] = cell % self.sizes[k];
            cell /= self.sizes[k];
        }
        out
    }

    /// Human-readable cell description like `z1=0.2:z2=1`.
    pub fn describe(&self, cell: usize) -> String {
        self.decode(cell)
            .iter()
            .enumerate()
            .map(|(k, &l)| format!("{}={}", self.names[k], self.level_labels[k][l]))
            .collect::<Vec<_>>()
            .join(":")
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names
    }

    pub fn level_labels(&self) -> &[Vec<String>] {
        &self.level_labels
    }
}
