//! Exact enumeration oracle.
//!
//! Everything the simulation settings promise — counterfactual means, the
//! standard-of-care mean, utilities, and the optimality of the per-cell
//! argmin regime — is computable in closed form by summing the risk
//! function over the 12 covariate cells, in exact rational arithmetic.

use num_rational::Ratio;

use crate::data::{CellIndex, ColumnData, Dataset};
use crate::error::Result;
use crate::regimes::Regime;

use super::{
    dgp_schema, rat_f64, AllocationMechanism, RiskFunction, ARMS, CELLS, Z1_LEVELS, Z2_LEVELS,
};

pub type Rat = Ratio<i64>;

/// `P(cell)` = P(z1) P(z2): (1/6)(7/10) or (1/6)(3/10); z1 is uniform so
/// only z2 matters.
pub fn cell_probability(_j: usize, z2: usize) -> Rat {
    let z2_mass = if z2 == 1 {
        Ratio::new(7i64, 10)
    } else {
        Ratio::new(3i64, 10)
    };
    Ratio::new(1i64, 6) * z2_mass
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleTruths {
    /// `E[Y]` under the allocation (the standard of care).
    pub soc_value: Rat,
    /// `E[Y(f)]` for the evaluated regime.
    pub regime_value: Rat,
    /// `E[Y(f)] − E[Y]`.
    pub utility: Rat,
}

impl OracleTruths {
    pub fn soc_f64(&self) -> f64 {
        rat_f64(self.soc_value)
    }

    pub fn regime_f64(&self) -> f64 {
        rat_f64(self.regime_value)
    }

    pub fn utility_f64(&self) -> f64 {
        rat_f64(self.utility)
    }
}

/// The arm the regime assigns in each covariate cell, resolved by
/// evaluating it on a dataset that enumerates the cells.
pub fn regime_cell_assignment(regime: &Regime) -> Result<[usize; CELLS]> {
    let schema = dgp_schema();
    let mut z1 = Vec::with_capacity(CELLS);
    let mut z2 = Vec::with_capacity(CELLS);
    for j in 0..Z1_LEVELS {
        for v in 0..Z2_LEVELS {
            z1.push(j as u32);
            z2.push(v as u32);
        }
    }
    let ds = Dataset::from_columns(
        schema,
        vec![0.0; CELLS],
        vec![0; CELLS],
        vec![ColumnData::Categorical(z1), ColumnData::Categorical(z2)],
    )?;
    // consistency with the shared cell convention
    let index = CellIndex::from_schema(ds.schema())?;
    debug_assert_eq!(index.n_cells(), CELLS);
    let f = regime.evaluate(&ds)?;
    let mut out = [0usize; CELLS];
    for (row, &arm) in f.iter().enumerate() {
        let cell = index.cell_of_row(&ds, row);
        out[cell] = arm as usize;
    }
    Ok(out)
}

/// Exact `E[Y]`, `E[Y(f)]`, and utility over the 12 covariate cells.
pub fn oracle_truth(allocation: &AllocationMechanism, regime: &Regime) -> Result<OracleTruths> {
    let risk = RiskFunction;
    let assignment = regime_cell_assignment(regime)?;
    let mut soc = Ratio::new(0i64, 1);
    let mut value = Ratio::new(0i64, 1);
    for j in 0..Z1_LEVELS {
        for z2 in 0..Z2_LEVELS {
            let cell = j * Z2_LEVELS + z2;
            let p_cell = cell_probability(j, z2);
            let probs = allocation.cell(cell);
            for arm in 0..ARMS {
                soc += p_cell * probs[arm] * risk.rational(j, z2, arm);
            }
            value += p_cell * risk.rational(j, z2, assignment[cell]);
        }
    }
    Ok(OracleTruths {
        soc_value: soc,
        regime_value: value,
        utility: value - soc,
    })
}

/// Exhaustively enumerates all `3^12` deterministic cell regimes and returns
/// `(count, minimum value, argmin assignment)`. Values are exact: every
/// `P(cell)·risk` is an integer multiple of 1/1200, so regimes are compared
/// by integer sums.
pub fn exhaustive_regime_search() -> (usize, Rat, [usize; CELLS]) {
    let risk = RiskFunction;
    // integer value of cell/arm on the common denominator 1200
    let mut table = [[0i64; ARMS]; CELLS];
    for j in 0..Z1_LEVELS {
        for z2 in 0..Z2_LEVELS {
            let cell = j * Z2_LEVELS + z2;
            for arm in 0..ARMS {
                let v = cell_probability(j, z2) * risk.rational(j, z2, arm);
                let scaled = v * Ratio::new(1200i64, 1);
                debug_assert_eq!(*scaled.denom(), 1);
                table[cell][arm] = *scaled.numer();
            }
        }
    }

    let mut assignment = [0usize; CELLS];
    let mut best = i64::MAX;
    let mut best_assignment = [0usize; CELLS];
    let mut count = 0usize;
    loop {
        count += 1;
        let total: i64 = (0..CELLS).map(|c| table[c][assignment[c]]).sum();
        if total < best {
            best = total;
            best_assignment = assignment;
        }
        // mixed-radix increment
        let mut pos = 0;
        loop {
            if pos == CELLS {
                return (count, Ratio::new(best, 1200), best_assignment);
            }
            assignment[pos] += 1;
            if assignment[pos] < ARMS {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{f2_regime, f_opt_regime};

    #[test]
    fn f_opt_value_is_seven_thirtieths() {
        let truths = oracle_truth(&AllocationMechanism::uniform(), &f_opt_regime()).unwrap();
        assert_eq!(truths.regime_value, Ratio::new(7, 30));
        assert_eq!(truths.soc_value, Ratio::new(11, 30));
        assert_eq!(truths.utility, Ratio::new(-2, 15));
        assert!((truths.regime_f64() - 0.23333333333333334).abs() < 1e-15);
    }

    #[test]
    fn static_two_value_is_three_tenths() {
        let truths =
            oracle_truth(&AllocationMechanism::uniform(), &Regime::static_label("2")).unwrap();
        assert_eq!(truths.regime_value, Ratio::new(3, 10));
        assert_eq!(truths.utility, Ratio::new(-1, 15));
    }

    #[test]
    fn uniform_soc_is_eleven_thirtieths() {
        let truths =
            oracle_truth(&AllocationMechanism::uniform(), &Regime::static_label("1")).unwrap();
        assert_eq!(truths.soc_value, Ratio::new(11, 30));
        assert!((truths.soc_f64() - 0.36666666666666664).abs() < 1e-15);
    }

    #[test]
    fn f2_value_matches_static_two_exactly() {
        let a = oracle_truth(&AllocationMechanism::uniform(), &f2_regime()).unwrap();
        let b = oracle_truth(&AllocationMechanism::uniform(), &Regime::static_label("2")).unwrap();
        assert_eq!(a.regime_value, b.regime_value);
        assert_eq!(a.regime_value, Ratio::new(3, 10));
    }

    #[test]
    fn exhaustive_search_confirms_f_opt() {
        let (count, best, assignment) = exhaustive_regime_search();
        assert_eq!(count, 531_441); // 3^12
        assert_eq!(best, Ratio::new(7, 30));
        let f_opt = regime_cell_assignment(&f_opt_regime()).unwrap();
        assert_eq!(assignment, f_opt);
    }
}
