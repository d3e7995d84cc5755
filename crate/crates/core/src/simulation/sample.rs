//! Population sampling and the pattern compression the Monte Carlo loop
//! runs on.
//!
//! A simulated dataset over the discrete support collapses to counts over
//! (cell, treatment, outcome) patterns: 12 × 3 × 2 = 72. Every preset design
//! is a function of the pattern, so weighted fits on the fixed 72-row
//! pattern dataset reproduce row-level fits exactly while the bootstrap
//! only redraws the count vector.

use rand::Rng;

use crate::data::{CellIndex, ColumnData, Dataset};
use crate::error::Result;
use crate::rng::derive_rng;

use super::{dgp_schema, RiskFunction, SimulationSetting, ARMS, CELLS, Z1_LEVELS, Z2_LEVELS};

pub const PATTERN_COUNT: usize = CELLS * ARMS * 2;

/// Draws a population of size `n` from the setting's data-generating
/// process. A fixed seed reproduces the dataset bit for bit.
pub fn sample_population(setting: &SimulationSetting, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = derive_rng(seed, &[0x706f_7075]);
    let risk = RiskFunction;
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut z1 = Vec::with_capacity(n);
    let mut z2 = Vec::with_capacity(n);
    for _ in 0..n {
        let j = rng.random_range(0..Z1_LEVELS);
        let v = usize::from(rng.random::<f64>() < 0.7);
        let cell = j * Z2_LEVELS + v;
        let probs = setting.allocation.cell_f64(cell);
        let u = rng.random::<f64>();
        let arm = if u < probs[0] {
            0
        } else if u < probs[0] + probs[1] {
            1
        } else {
            2
        };
        let outcome = f64::from(rng.random::<f64>() < risk.probability(j, v, arm));
        y.push(outcome);
        t.push(arm as u32);
        z1.push(j as u32);
        z2.push(v as u32);
    }
    Dataset::from_columns(
        dgp_schema(),
        y,
        t,
        vec![ColumnData::Categorical(z1), ColumnData::Categorical(z2)],
    )
}

/// The fixed 72-row dataset enumerating every (cell, treatment, outcome)
/// pattern; row index = cell·6 + arm·2 + y.
pub fn pattern_dataset() -> Dataset {
    let mut y = Vec::with_capacity(PATTERN_COUNT);
    let mut t = Vec::with_capacity(PATTERN_COUNT);
    let mut z1 = Vec::with_capacity(PATTERN_COUNT);
    let mut z2 = Vec::with_capacity(PATTERN_COUNT);
    for j in 0..Z1_LEVELS {
        for v in 0..Z2_LEVELS {
            for arm in 0..ARMS {
                for outcome in 0..2 {
                    z1.push(j as u32);
                    z2.push(v as u32);
                    t.push(arm as u32);
                    y.push(outcome as f64);
                }
            }
        }
    }
    Dataset::from_columns(
        dgp_schema(),
        y,
        t,
        vec![ColumnData::Categorical(z1), ColumnData::Categorical(z2)],
    )
    .expect("pattern dataset is valid")
}

/// Frequency of each pattern row in `ds` (a dataset over the DGP schema).
pub fn compress_to_patterns(ds: &Dataset) -> Result<Vec<f64>> {
    let index = CellIndex::from_schema(ds.schema())?;
    let mut counts = vec![0.0; PATTERN_COUNT];
    for row in 0..ds.n() {
        let cell = index.cell_of_row(ds, row);
        let arm = ds.t_idx()[row] as usize;
        let outcome = ds.y()[row] as usize;
        counts[cell * (ARMS * 2) + arm * 2 + outcome] += 1.0;
    }
    Ok(counts)
}
