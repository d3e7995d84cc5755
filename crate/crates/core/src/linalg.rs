//! Dense linear algebra for the small systems this crate solves (p ≲ 50):
//! Cholesky, LU with partial pivoting, Householder least squares, and a
//! Gram–Schmidt pruner that detects exactly collinear design columns.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Cholesky factorization of a symmetric positive definite matrix.
/// Returns the lower factor, or `None` if a pivot is not strictly positive.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// Solves `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let l = cholesky(a)?;
    Some(cholesky_solve_factored(&l, b))
}

/// Forward/back substitution with a precomputed lower Cholesky factor.
pub fn cholesky_solve_factored(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        for k in 0..i {
            let v = y[k];
            y[i] -= l[(i, k)] * v;
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = y[k];
            y[i] -= l[(k, i)] * v;
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// LU factorization with partial pivoting. Returns `(lu, perm, sign)` where
/// `lu` packs both factors; `None` if the matrix is numerically singular.
fn lu_factor(a: &Array2<f64>) -> Option<(Array2<f64>, Vec<usize>)> {
    let n = a.nrows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut max = lu[(k, k)].abs();
        for i in (k + 1)..n {
            let v = lu[(i, k)].abs();
            if v > max {
                max = v;
                p = i;
            }
        }
        if max == 0.0 || !max.is_finite() {
            return None;
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            for j in (k + 1)..n {
                lu[(i, j)] -= m * lu[(k, j)];
            }
        }
    }
    Some((lu, perm))
}

fn lu_solve_factored(lu: &Array2<f64>, perm: &[usize], b: &Array1<f64>) -> Array1<f64> {
    let n = lu.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in 0..n {
        x[i] = b[perm[i]];
    }
    for i in 0..n {
        for k in 0..i {
            let v = x[k];
            x[i] -= lu[(i, k)] * v;
        }
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = x[k];
            x[i] -= lu[(i, k)] * v;
        }
        x[i] /= lu[(i, i)];
    }
    x
}

/// Inverts a general square matrix via LU. Returns `None` when singular.
pub fn lu_inverse(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let (lu, perm) = lu_factor(a)?;
    let mut inv = Array2::<f64>::zeros((n, n));
    let mut e = Array1::<f64>::zeros(n);
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = lu_solve_factored(&lu, &perm, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Some(inv)
}

/// 1-norm of a square matrix (maximum absolute column sum).
pub fn norm1(a: &Array2<f64>) -> f64 {
    let mut max = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|v| v.abs()).sum();
        if s > max {
            max = s;
        }
    }
    max
}

/// 1-norm condition number estimate `‖A‖₁ · ‖A⁻¹‖₁`.
/// Returns `f64::INFINITY` when the matrix is singular.
pub fn condition_number(a: &Array2<f64>) -> f64 {
    match lu_inverse(a) {
        Some(inv) => norm1(a) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Detects exactly collinear columns by modified Gram–Schmidt in column
/// order: a column whose residual norm after projection onto the retained
/// columns falls below `tol` times its original norm is marked dropped.
/// Earlier columns win; later duplicates are the ones removed.
pub fn prune_collinear(x: ArrayView2<'_, f64>, tol: f64) -> (Vec<usize>, Vec<usize>) {
    let (n, p) = x.dim();
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p {
        let mut v: Array1<f64> = x.column(j).to_owned();
        let orig = v.dot(&v).sqrt();
        if orig == 0.0 {
            dropped.push(j);
            continue;
        }
        // two orthogonalization passes keep the basis numerically orthogonal
        for _ in 0..2 {
            for q in &basis {
                let c = v.dot(q);
                for i in 0..n {
                    v[i] -= c * q[i];
                }
            }
        }
        let rem = v.dot(&v).sqrt();
        if rem <= tol * orig {
            dropped.push(j);
        } else {
            retained.push(j);
            basis.push(&v / rem);
        }
    }
    (retained, dropped)
}

/// Numerical rank with the same tolerance convention as [`prune_collinear`].
pub fn matrix_rank(x: ArrayView2<'_, f64>, tol: f64) -> usize {
    prune_collinear(x, tol).0.len()
}

/// Least squares solution of `x b ≈ y` via Householder QR.
/// `x` must have full column rank (callers prune first).
pub fn lstsq(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Option<Array1<f64>> {
    let (n, p) = x.dim();
    debug_assert!(n >= p);
    let mut r = x.to_owned();
    let mut qty = y.to_owned();
    for k in 0..p {
        // Householder vector for column k below the diagonal
        let mut norm = 0.0;
        for i in k..n {
            norm += r[(i, k)] * r[(i, k)];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            return None;
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v = Array1::<f64>::zeros(n - k);
        for i in k..n {
            v[i - k] = r[(i, k)];
        }
        v[0] -= alpha;
        let vnorm2 = v.dot(&v);
        if vnorm2 == 0.0 {
            continue;
        }
        // apply H = I - 2 v vᵀ / (vᵀv) to remaining columns and to qty
        for j in k..p {
            let mut s = 0.0;
            for i in k..n {
                s += v[i - k] * r[(i, j)];
            }
            let f = 2.0 * s / vnorm2;
            for i in k..n {
                r[(i, j)] -= f * v[i - k];
            }
        }
        let mut s = 0.0;
        for i in k..n {
            s += v[i - k] * qty[i];
        }
        let f = 2.0 * s / vnorm2;
        for i in k..n {
            qty[i] -= f * v[i - k];
        }
        r[(k, k)] = alpha;
    }
    // back substitution on the upper triangle
    let mut beta = Array1::<f64>::zeros(p);
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in (i + 1)..p {
            s -= r[(i, j)] * beta[j];
        }
        if r[(i, i)] == 0.0 {
            return None;
        }
        beta[i] = s / r[(i, i)];
    }
    Some(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_round_trip() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let b = array![1.0, 2.0, 3.0];
        let x = cholesky_solve(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn lu_inverse_identity() {
        let a = array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let inv = lu_inverse(&a).unwrap();
        let prod = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prune_drops_duplicate_and_zero_columns() {
        let x = array![
            [1.0, 1.0, 0.0, 2.0],
            [1.0, 1.0, 0.0, 2.0],
            [1.0, 1.0, 0.0, 3.0],
        ];
        let (retained, dropped) = prune_collinear(x.view(), 1e-10);
        assert_eq!(retained, vec![0, 3]);
        assert_eq!(dropped, vec![1, 2]);
    }

    #[test]
    fn lstsq_recovers_exact_coefficients() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0],];
        let beta_true = array![0.5, -2.0];
        let y = x.dot(&beta_true);
        let beta = lstsq(x.view(), y.view()).unwrap();
        assert!((beta[0] - 0.5).abs() < 1e-12);
        assert!((beta[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn condition_number_of_identity_is_one() {
        let a = Array2::<f64>::eye(4);
        assert!((condition_number(&a) - 1.0).abs() < 1e-12);
    }
}
