//! Synthetic-data lab: the data-generating process over a 6 × 2 covariate
//! grid with three treatments, the simulation settings, exact enumeration
//! oracle, and the Monte Carlo study producing bias/SE/coverage tables.
//!
//! Covariates: `z1` uniform on {0, 0.2, ..., 1.0}, `z2 ~ Bernoulli(0.7)`.
//! The outcome is Bernoulli with risk
//!
//! ```text
//! P(Y = 1 | z, t) = 0.5 + 0.5 z1 - 0.5 z2   (t = 1)
//!                   0.65 - 0.5 z2            (t = 2)
//!                   1 - 0.5 z1 - 0.5 z2      (t = 3)
//! ```
//!
//! with Y = 0 the desired outcome. Treatment allocation varies by setting;
//! every setting's oracle truths are exact rationals recomputed and checked
//! at construction.

mod monte_carlo;
mod oracle;
mod sample;

pub use monte_carlo::{
    run_monte_carlo, CiMethodKind, EstimatorMetrics, MonteCarloConfig, MonteCarloReport,
};
pub use oracle::{
    exhaustive_regime_search, oracle_truth, regime_cell_assignment, OracleTruths, Rat,
};
pub use sample::{compress_to_patterns, pattern_dataset, sample_population, PATTERN_COUNT};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::data::{CovariateDecl, CovariateKind, Schema, TreatmentDecl};
use crate::error::{Error, Result};
use crate::pipeline::ModelSet;
use crate::regimes::Regime;

pub const Z1_LEVELS: usize = 6;
pub const Z2_LEVELS: usize = 2;
pub const CELLS: usize = Z1_LEVELS * Z2_LEVELS;
pub const ARMS: usize = 3;

/// The risk function `(z1, z2, t) -> P(Y = 1)` on the discrete support.
/// `j` indexes z1 = j/5, `z2` is 0/1, `arm` is 0-based (treatment 1..3).
#[derive(Debug, Clone, Copy, Default)]
pub struct RiskFunction;

impl RiskFunction {
    pub fn rational(&self, j: usize, z2: usize, arm: usize) -> Rat {
        let z2 = Ratio::new(z2 as i64, 1);
        let z1 = Ratio::new(j as i64, 5);
        let half = Ratio::new(1, 2);
        match arm {
            0 => half + half * z1 - half * z2,
            1 => Ratio::new(13, 20) - half * z2,
            2 => Ratio::new(1, 1) - half * z1 - half * z2,
            _ => unreachable!("three arms"),
        }
    }

    pub fn probability(&self, j: usize, z2: usize, arm: usize) -> f64 {
        let r = self.rational(j, z2, arm);
        *r.numer() as f64 / *r.denom() as f64
    }
}

/// Per-cell treatment-assignment probabilities. Cells are `j * 2 + z2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMechanism {
    per_cell: Vec<[Rat; ARMS]>,
}

impl AllocationMechanism {
    pub fn new(per_cell: Vec<[Rat; ARMS]>) -> Result<AllocationMechanism> {
        if per_cell.len() != CELLS {
            return Err(Error::Simulation(format!(
                "allocation must cover {CELLS} cells, got {}",
                per_cell.len()
            )));
        }
        let one = Ratio::new(1i64, 1);
        let floor = Ratio::new(1i64, 50);
        for (c, probs) in per_cell.iter().enumerate() {
            let sum: Rat = probs.iter().sum();
            if sum != one {
                return Err(Error::Simulation(format!(
                    "cell {c} probabilities sum to {sum}"
                )));
            }
            if probs.iter().any(|p| *p < floor) {
                return Err(Error::Simulation(format!(
                    "cell {c} has an arm probability below 1/50; positivity by construction requires ≥ 0.02"
                )));
            }
        }
        Ok(AllocationMechanism { per_cell })
    }

    pub fn uniform() -> AllocationMechanism {
        let third = Ratio::new(1i64, 3);
        AllocationMechanism::new(vec![[third; ARMS]; CELLS]).expect("uniform is valid")
    }

    pub fn cell(&self, cell: usize) -> &[Rat; ARMS] {
        &self.per_cell[cell]
    }

    pub fn cell_f64(&self, cell: usize) -> [f64; ARMS] {
        let p = &self.per_cell[cell];
        [rat_f64(p[0]), rat_f64(p[1]), rat_f64(p[2])]
    }
}

pub fn rat_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Side-arm probabilities of the treatment-2-concentrated allocation,
/// per (z1 level, z2 level). Chosen so the cell-weighted mean outcome
/// equals 3/10 exactly (verified by the enumeration oracle in tests) while
/// every arm keeps probability at least 1/50 in every cell and every
/// regime-concordant arm at least 1/20.
fn s2_epsilons() -> ([[Rat; Z2_LEVELS]; Z1_LEVELS], [[Rat; Z2_LEVELS]; Z1_LEVELS]) {
    let e = |n: i64, d: i64| Ratio::new(n, d);
    // treatment 1
    let eps1 = [
        [e(2, 25), e(7, 50)],
        [e(1, 20), e(7, 50)],
        [e(2, 25), e(1, 20)],
        [e(1, 50), e(1, 50)],
        [e(1, 20), e(1, 20)],
        [e(1, 50), e(1, 50)],
    ];
    // treatment 3
    let eps3 = [
        [e(1, 50), e(1, 50)],
        [e(1, 50), e(1, 50)],
        [e(1, 50), e(1, 50)],
        [e(2, 25), e(1, 20)],
        [e(1, 50), e(17, 700)],
        [e(2, 25), e(7, 50)],
    ];
    (eps1, eps3)
}

fn s2_allocation() -> AllocationMechanism {
    let (eps1, eps3) = s2_epsilons();
    let one = Ratio::new(1i64, 1);
    let mut per_cell = Vec::with_capacity(CELLS);
    for j in 0..Z1_LEVELS {
        for z2 in 0..Z2_LEVELS {
            let (e1, e3) = (eps1[j][z2], eps3[j][z2]);
            per_cell.push([e1, one - e1 - e3, e3]);
        }
    }
    AllocationMechanism::new(per_cell).expect("s2 allocation is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SettingId {
    S1,
    S2,
    S3,
    S2M,
}

impl SettingId {
    pub const ALL: [SettingId; 4] = [SettingId::S1, SettingId::S2, SettingId::S3, SettingId::S2M];

    pub fn parse(text: &str) -> Result<SettingId> {
        match text {
            "S1" => Ok(SettingId::S1),
            "S2" => Ok(SettingId::S2),
            "S3" => Ok(SettingId::S3),
            "S2M" => Ok(SettingId::S2M),
            other => Err(Error::Simulation(format!(
                "unknown setting {other:?}; valid settings: S1, S2, S3, S2M"
            ))),
        }
    }

    fn tag(&self) -> u64 {
        match self {
            SettingId::S1 => 1,
            SettingId::S2 => 2,
            SettingId::S3 => 3,
            SettingId::S2M => 4,
        }
    }
}

impl std::fmt::Display for SettingId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SettingId::S1 => "S1",
            SettingId::S2 => "S2",
            SettingId::S3 => "S3",
            SettingId::S2M => "S2M",
        })
    }
}

/// A registered simulation setting: allocation, evaluated regime, model
/// presets, and exact oracle truths.
#[derive(Debug, Clone)]
pub struct SimulationSetting {
    pub id: SettingId,
    pub allocation: AllocationMechanism,
    pub regime: Regime,
    pub models: ModelSet,
    pub oracle: OracleTruths,
}

/// Schema of the simulated datasets: binary outcome `y`, treatment `t` in
/// {1,2,3}, categorical `z1` and `z2` with numeric views.
pub fn dgp_schema() -> Schema {
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

/// The per-z1 risk-minimizing regime (ties cannot occur; z2 drops out).
pub fn f_opt_regime() -> Regime {
    lookup_over_z1(["1", "1", "2", "2", "3", "3"]).with_id("f_opt")
}

/// The alternative regime evaluated under the null setting; its value
/// equals the static treatment-2 value exactly.
pub fn f2_regime() -> Regime {
    lookup_over_z1(["1", "1", "1", "3", "1", "3"]).with_id("f2")
}

fn lookup_over_z1(labels: [&str; Z1_LEVELS]) -> Regime {
    let z1 = ["0", "0.2", "0.4", "0.6", "0.8", "1"];
    Regime::lookup(
        vec!["z1".into()],
        z1.iter()
            .zip(labels)
            .map(|(lvl, lab)| (vec![lvl.to_string()], lab.to_string()))
            .collect(),
        None,
    )
}

/// Correct-specification presets: saturated cell designs for both
/// propensities and the binary outcome model, and a linear design that
/// contains the risk surface exactly for the non-binary outcome model.
pub fn correct_models() -> ModelSet {
    use crate::data::{Coding, DesignSpec, Factor, Term};
    let schema = dgp_schema();
    let saturated = DesignSpec::saturated_cells(&schema).expect("categorical covariates");
    let h_nb = DesignSpec::new(vec![
        Term::treatment(),
        Term::interaction(vec![Factor::treatment(), Factor::numeric_covariate("z1")]),
        Term::numeric("z2"),
    ])
    .with_coding(Coding::FullDummy);
    ModelSet {
        propensity_nb: Some(saturated.clone()),
        propensity_b: Some(saturated),
        outcome_b: Some(
            DesignSpec::saturated_cells_by_concordance(&schema).expect("categorical covariates"),
        ),
        outcome_b_family: crate::pipeline::OutcomeFamily::Logistic,
        outcome_nb: Some(h_nb),
        outcome_nb_family: crate::pipeline::OutcomeFamily::Linear,
    }
}

/// Misspecified presets: additive or intercept-only designs in the numeric
/// views, dropping the interactions the risk surface requires.
pub fn misspecified_models() -> ModelSet {
    use crate::data::{Coding, DesignSpec, Term};
    ModelSet {
        propensity_nb: Some(DesignSpec::new(vec![Term::Intercept, Term::numeric("z1")])),
        propensity_b: Some(DesignSpec::new(vec![
            Term::Intercept,
            Term::numeric("z1"),
            Term::numeric("z2"),
        ])),
        outcome_b: Some(DesignSpec::new(vec![
            Term::Intercept,
            Term::numeric("z1"),
            Term::concordance(),
        ])),
        outcome_b_family: crate::pipeline::OutcomeFamily::Logistic,
        outcome_nb: Some(
            DesignSpec::new(vec![
                Term::treatment(),
                Term::numeric("z1"),
                Term::numeric("z2"),
            ])
            .with_coding(Coding::FullDummy),
        ),
        outcome_nb_family: crate::pipeline::OutcomeFamily::Linear,
    }
}

/// Builds a setting; oracle truths are recomputed by the enumeration oracle
/// and must match the registered exact values.
pub fn setting(id: SettingId) -> SimulationSetting {
    let (allocation, regime, models, expect_value, expect_soc) = match id {
        SettingId::S1 => (
            AllocationMechanism::uniform(),
            f_opt_regime(),
            correct_models(),
            Ratio::new(7i64, 30),
            Ratio::new(11i64, 30),
        ),
        SettingId::S2 => (
            s2_allocation(),
            f2_regime(),
            correct_models(),
            Ratio::new(3i64, 10),
            Ratio::new(3i64, 10),
        ),
        SettingId::S3 => (
            AllocationMechanism::uniform(),
            Regime::static_label("2"),
            correct_models(),
            Ratio::new(3i64, 10),
            Ratio::new(11i64, 30),
        ),
        SettingId::S2M => (
            s2_allocation(),
            f2_regime(),
            misspecified_models(),
            Ratio::new(3i64, 10),
            Ratio::new(3i64, 10),
        ),
    };
    let oracle = oracle_truth(&allocation, &regime).expect("oracle over the DGP support");
    assert_eq!(
        oracle.regime_value, expect_value,
        "oracle E[Y(f)] mismatch for {id}"
    );
    assert_eq!(
        oracle.soc_value, expect_soc,
        "oracle E[Y] mismatch for {id}"
    );
    assert_eq!(
        oracle.utility,
        expect_value - expect_soc,
        "oracle utility mismatch for {id}"
    );
    SimulationSetting {
        id,
        allocation,
        regime,
        models,
        oracle,
    }
}
