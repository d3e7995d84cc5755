use super::*;
use ndarray::array;
use rand::Rng;

use crate::rng::derive_rng;

fn ones(n: usize) -> Array2<f64> {
    Array2::from_elem((n, 1), 1.0)
}

#[test]
fn linear_intercept_only_is_the_mean() {
    let x = ones(3);
    let m = fit_linear(&x, &[0.0, 1.0, 1.0]).unwrap();
    assert!((m.coefficients[(0, 0)] - 2.0 / 3.0).abs() < 1e-14);
    let pred = predict(&m, ones(2).view()).unwrap().into_values();
    assert!((pred[0] - 2.0 / 3.0).abs() < 1e-14);
}

/// Noiseless cell means of the simulation risk surface: a design with
/// per-treatment intercepts, per-treatment z1 slopes, and z2 recovers the
/// generating coefficients exactly (residuals are identically zero).
#[test]
fn linear_recovers_risk_surface_on_noiseless_cell_means() {
    let z1_levels = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for t in 0..3usize {
        for &z1 in &z1_levels {
            for z2 in [0.0, 1.0] {
                let mut row = vec![0.0; 7];
                row[t] = 1.0; // t intercepts
                row[3 + t] = z1; // t-specific slope
                row[6] = z2;
                rows.push(row);
                let risk = match t {
                    0 => 0.5 + 0.5 * z1 - 0.5 * z2,
                    1 => 0.65 - 0.5 * z2,
                    _ => 1.0 - 0.5 * z1 - 0.5 * z2,
                };
                y.push(risk);
            }
        }
    }
    let n = rows.len();
    let x = Array2::from_shape_vec((n, 7), rows.into_iter().flatten().collect()).unwrap();
    let m = fit_linear(&x, &y).unwrap();
    let beta = m.coefficients.row(0);
    let expected = [0.5, 0.65, 1.0, 0.5, 0.0, -0.5, -0.5];
    for (b, e) in beta.iter().zip(expected) {
        assert!((b - e).abs() < 1e-10, "got {b}, want {e}");
    }
    // residuals orthogonal to the retained columns
    let fitted = predict(&m, x.view()).unwrap().into_values();
    for j in 0..7 {
        let dot: f64 = (0..n).map(|i| (y[i] - fitted[i]) * x[(i, j)]).sum();
        assert!(dot.abs() <= 1e-8 * n as f64);
    }
}

#[test]
fn duplicate_column_is_dropped_with_a_warning_naming_it() {
    let x = array![
        [1.0, 1.0, 0.0],
        [1.0, 1.0, 1.0],
        [1.0, 1.0, 2.0],
        [1.0, 1.0, 3.0],
    ];
    let names = vec![
        "(intercept)".to_string(),
        "dup".to_string(),
        "x".to_string(),
    ];
    let m = fit_linear_named(&x, &[0.0, 1.0, 2.0, 3.0], None, Some(&names)).unwrap();
    assert_eq!(m.convergence.dropped_columns, vec!["dup".to_string()]);
    assert_eq!(m.coefficients[(0, 1)], 0.0);
    assert!((m.coefficients[(0, 2)] - 1.0).abs() < 1e-12);
}

#[test]
fn linear_errors_when_nothing_fittable_remains() {
    let x = Array2::<f64>::zeros((3, 2));
    let err = fit_linear(&x, &[1.0, 2.0, 3.0]).unwrap_err();
    assert!(err.to_string().contains("no usable columns"));
}

#[test]
fn logistic_intercept_only_matches_logit_of_mean() {
    let x = ones(4);
    let m = fit_logistic(&x, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    let want = (0.25f64 / 0.75).ln();
    assert!(
        (m.coefficients[(0, 0)] - want).abs() < 1e-9,
        "{}",
        m.coefficients[(0, 0)]
    );
    assert!(m.convergence.converged);
    match predict(&m, ones(1).view()).unwrap() {
        Predictions::Probabilities(p) => assert!((p[0] - 0.25).abs() < 1e-10),
        other => panic!("unexpected predictions {other:?}"),
    }
}

#[test]
fn saturated_logistic_reproduces_cell_proportions() {
    // 3 cells with proportions 1/4, 2/3, 1/2
    let mut x = Array2::<f64>::zeros((13, 3));
    let mut y = Vec::new();
    let cells: [(usize, &[f64]); 3] = [
        (0, &[1.0, 0.0, 0.0, 0.0]),
        (1, &[1.0, 1.0, 0.0]),
        (2, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]),
    ];
    let mut row = 0;
    for (cell, ys) in cells {
        for &v in ys {
            x[(row, cell)] = 1.0;
            y.push(v);
            row += 1;
        }
    }
    let m = fit_logistic(&x, &y).unwrap();
    let probs = match predict(&m, x.view()).unwrap() {
        Predictions::Probabilities(p) => p,
        _ => unreachable!(),
    };
    let want = [
        0.25,
        0.25,
        0.25,
        0.25,
        2.0 / 3.0,
        2.0 / 3.0,
        2.0 / 3.0,
        0.5,
        0.5,
        0.5,
        0.5,
        0.5,
        0.5,
    ];
    for (p, w) in probs.iter().zip(want) {
        assert!((p - w).abs() < 1e-8, "got {p}, want {w}");
    }
}

#[test]
fn all_ones_response_flags_separation() {
    let x = ones(10);
    let m = fit_logistic(&x, &[1.0; 10]).unwrap();
    assert!(m.convergence.separation);
    assert!(!m.convergence.converged);
    // predictions remain usable
    match predict(&m, ones(1).view()).unwrap() {
        Predictions::Probabilities(p) => assert!(p[0] > 0.99),
        _ => unreachable!(),
    }
}

#[test]
fn multinomial_intercept_only_matches_level_shares() {
    let x = ones(4);
    let levels: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
    let m = fit_multinomial(&x, &[0, 0, 1, 2], &levels).unwrap();
    match predict(&m, ones(1).view()).unwrap() {
        Predictions::LevelProbabilities(p) => {
            assert!((p[(0, 0)] - 0.5).abs() < 1e-9);
            assert!((p[(0, 1)] - 0.25).abs() < 1e-9);
            assert!((p[(0, 2)] - 0.25).abs() < 1e-9);
        }
        _ => unreachable!(),
    }
}

#[test]
fn multinomial_with_two_levels_reduces_to_logistic() {
    let mut rng = derive_rng(42, &[1]);
    let n = 200;
    let mut x = Array2::<f64>::zeros((n, 2));
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = rng.random::<f64>() * 2.0 - 1.0;
        let p = sigmoid(-0.3 + 1.2 * x[(i, 1)]);
        let hit = rng.random::<f64>() < p;
        t.push(u32::from(hit));
        y.push(f64::from(hit));
    }
    let levels: Vec<String> = vec!["0".into(), "1".into()];
    let mm = fit_multinomial(&x, &t, &levels).unwrap();
    let ml = fit_logistic(&x, &y).unwrap();
    for j in 0..2 {
        assert!(
            (mm.coefficients[(0, j)] - ml.coefficients[(0, j)]).abs() < 1e-6,
            "coef {j}: {} vs {}",
            mm.coefficients[(0, j)],
            ml.coefficients[(0, j)]
        );
    }
}

#[test]
fn saturated_multinomial_reproduces_cell_shares() {
    // 2 cells; counts (2,1,1) and (1,3,2)
    let counts = [[2usize, 1, 1], [1, 3, 2]];
    let n: usize = counts.iter().flatten().sum();
    let mut x = Array2::<f64>::zeros((n, 2));
    let mut t = Vec::new();
    let mut row = 0;
    for (cell, cc) in counts.iter().enumerate() {
        for (level, &c) in cc.iter().enumerate() {
            for _ in 0..c {
                x[(row, cell)] = 1.0;
                t.push(level as u32);
                row += 1;
            }
        }
    }
    let levels: Vec<String> = vec!["1".into(), "2".into(), "3".into()];
    let m = fit_multinomial(&x, &t, &levels).unwrap();
    let probs = match predict(&m, x.view()).unwrap() {
        Predictions::LevelProbabilities(p) => p,
        _ => unreachable!(),
    };
    for i in 0..n {
        let cell = if x[(i, 0)] == 1.0 { 0 } else { 1 };
        let total: f64 = counts[cell].iter().sum::<usize>() as f64;
        for l in 0..3 {
            let want = counts[cell][l] as f64 / total;
            assert!((probs[(i, l)] - want).abs() < 1e-8, "cell {cell} level {l}");
        }
        let s: f64 = (0..3).map(|l| probs[(i, l)]).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn multinomial_rejects_absent_level() {
    let x = ones(3);
    let levels: Vec<String> = vec!["1".into(), "2".into(), "3".into()];
    let err = fit_multinomial(&x, &[0, 0, 1], &levels).unwrap_err();
    assert!(err.to_string().contains("\"3\""));
}

#[test]
fn predict_rejects_width_mismatch() {
    let m = FittedModel::from_parts(
        Family::Linear,
        array![[1.0, 2.0]],
        vec!["a".into(), "b".into()],
    );
    assert!(predict(&m, ones(2).view()).is_err());
}

fn finite_difference_grad(f: impl Fn(&[f64]) -> f64, beta: &[f64], h: f64) -> Vec<f64> {
    (0..beta.len())
        .map(|j| {
            let mut hi = beta.to_vec();
            let mut lo = beta.to_vec();
            hi[j] += h;
            lo[j] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

fn assert_grad_close(analytic: &[f64], numeric: &[f64]) {
    let scale = analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (a, n) in analytic.iter().zip(numeric) {
        assert!((a - n).abs() <= 1e-4 * scale, "analytic {a} vs numeric {n}");
    }
}

#[test]
fn scores_match_finite_differences() {
    let mut rng = derive_rng(7, &[99]);
    for rep in 0..5u64 {
        let n = 30;
        let p = 3;
        let mut x = Array2::<f64>::zeros((n, p));
        let mut y = Vec::new();
        let mut t = Vec::new();
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..p {
                x[(i, j)] = rng.random::<f64>() * 2.0 - 1.0;
            }
            y.push(f64::from(rng.random::<f64>() < 0.5));
            t.push(rng.random_range(0..3u32));
        }
        let beta: Vec<f64> = (0..p).map(|_| rng.random::<f64>() - 0.5).collect();
        let beta3: Vec<f64> = (0..2 * p).map(|_| rng.random::<f64>() - 0.5).collect();
        let w: Option<Vec<f64>> = if rep % 2 == 0 {
            None
        } else {
            Some((0..n).map(|_| rng.random_range(0..4) as f64).collect())
        };
        let wref = w.as_deref();

        assert_grad_close(
            &logistic_score(&x, &y, wref, &beta),
            &finite_difference_grad(|b| logistic_loglik(&x, &y, wref, b), &beta, 1e-5),
        );
        assert_grad_close(
            &multinomial_score(&x, &t, 3, wref, &beta3),
            &finite_difference_grad(|b| multinomial_loglik(&x, &t, 3, wref, b), &beta3, 1e-5),
        );
        let yr: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        assert_grad_close(
            &linear_score(&x, &yr, wref, &beta),
            &finite_difference_grad(|b| linear_loglik(&x, &yr, wref, b), &beta, 1e-5),
        );
    }
}

#[test]
fn newton_ascent_is_monotone() {
    let mut rng = derive_rng(13, &[5]);
    let n = 120;
    let mut x = Array2::<f64>::zeros((n, 3));
    let mut y = Vec::new();
    for i in 0..n {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = rng.random::<f64>() * 4.0 - 2.0;
        x[(i, 2)] = f64::from(rng.random::<f64>() < 0.4);
        let p = sigmoid(0.5 - 2.0 * x[(i, 1)] + x[(i, 2)]);
        y.push(f64::from(rng.random::<f64>() < p));
    }
    let m = fit_logistic(&x, &y).unwrap();
    assert!(m.convergence.converged);
    assert!(m.convergence.monotone_ascent);
    assert!(m.convergence.grad_norm < GRADIENT_TOLERANCE);
}

#[test]
fn weighted_fit_equals_replicated_rows() {
    let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
    let y = [0.0, 1.0, 1.0];
    let w = [2.0, 1.0, 3.0];
    let mw = fit_logistic_weighted(&x, &y, &w).unwrap();

    let mut xr = Vec::new();
    let mut yr = Vec::new();
    for i in 0..3 {
        for _ in 0..w[i] as usize {
            xr.push([x[(i, 0)], x[(i, 1)]]);
            yr.push(y[i]);
        }
    }
    let xr = Array2::from_shape_vec((yr.len(), 2), xr.into_iter().flatten().collect()).unwrap();
    let mr = fit_logistic(&xr, &yr).unwrap();
    for j in 0..2 {
        assert!((mw.coefficients[(0, j)] - mr.coefficients[(0, j)]).abs() < 1e-8);
    }
}

#[test]
fn fitted_model_round_trips_through_json() {
    let x = ones(4);
    let m = fit_logistic(&x, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    let text = m.to_json().unwrap();
    let back = FittedModel::from_json(&text).unwrap();
    assert_eq!(m, back);
    assert!(text.contains("\"family\""));
    assert!(text.contains("\"convergence\""));
}
