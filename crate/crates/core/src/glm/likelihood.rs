//! Log-likelihoods in numerically stable form, shared by the Newton loop
//! and by tests that check analytic gradients against finite differences.

use ndarray::{Array1, Array2};

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn weight_at(w: Option<&[f64]>, i: usize) -> f64 {
    w.map_or(1.0, |w| w[i])
}

/// Bernoulli log-likelihood `sum w [y*eta - log(1 + exp(eta))]`.
pub fn logistic_loglik(x: &Array2<f64>, y: &[f64], w: Option<&[f64]>, beta: &[f64]) -> f64 {
    logistic_loglik_internal(x, y, w, &Array1::from_vec(beta.to_vec()))
}

pub(crate) fn logistic_loglik_internal(
    x: &Array2<f64>,
    y: &[f64],
    w: Option<&[f64]>,
    beta: &Array1<f64>,
) -> f64 {
    let eta = x.dot(beta);
    let mut ll = 0.0;
    for i in 0..x.nrows() {
        let wi = weight_at(w, i);
        if wi == 0.0 {
            continue;
        }
        ll += wi * (y[i] * eta[i] - softplus(eta[i]));
    }
    ll
}

/// Multinomial log-likelihood with reference level 0 and level-major flat
/// parameters (`beta[(l-1)*p + j]` for level `l`, column `j`).
pub fn multinomial_loglik(
    x: &Array2<f64>,
    t_idx: &[u32],
    k: usize,
    w: Option<&[f64]>,
    beta: &[f64],
) -> f64 {
    multinomial_loglik_internal(x, t_idx, k, w, &Array1::from_vec(beta.to_vec()))
}

pub(crate) fn multinomial_loglik_internal(
    x: &Array2<f64>,
    t_idx: &[u32],
    k: usize,
    w: Option<&[f64]>,
    beta: &Array1<f64>,
) -> f64 {
    let n = x.nrows();
    let p = x.ncols();
    debug_assert_eq!(beta.len(), (k - 1) * p);
    let bm = Array2::from_shape_fn((k - 1, p), |(l, j)| beta[l * p + j]);
    let eta = x.dot(&bm.t()); // n × (k-1)
    let mut ll = 0.0;
    for i in 0..n {
        let wi = weight_at(w, i);
        if wi == 0.0 {
            continue;
        }
        let mut max = 0.0f64;
        for l in 0..k - 1 {
            max = max.max(eta[(i, l)]);
        }
        let mut lse = (-max).exp();
        for l in 0..k - 1 {
            lse += (eta[(i, l)] - max).exp();
        }
        let lse = max + lse.ln();
        let own = if t_idx[i] == 0 {
            0.0
        } else {
            eta[(i, t_idx[i] as usize - 1)]
        };
        ll += wi * (own - lse);
    }
    ll
}

/// Score (gradient of the log-likelihood) of the Bernoulli model:
/// `Xᵀ (w ⊙ (y − p))`.
pub fn logistic_score(x: &Array2<f64>, y: &[f64], w: Option<&[f64]>, beta: &[f64]) -> Vec<f64> {
    logistic_score_internal(x, y, w, &Array1::from_vec(beta.to_vec())).to_vec()
}

pub(crate) fn logistic_score_internal(
    x: &Array2<f64>,
    y: &[f64],
    w: Option<&[f64]>,
    beta: &Array1<f64>,
) -> Array1<f64> {
    let (n, p) = x.dim();
    let eta = x.dot(beta);
    let mut g = Array1::<f64>::zeros(p);
    for i in 0..n {
        let wi = weight_at(w, i);
        if wi == 0.0 {
            continue;
        }
        let resid = wi * (y[i] - super::sigmoid(eta[i]));
        for j in 0..p {
            g[j] += resid * x[(i, j)];
        }
    }
    g
}

/// Score of the softmax model in the level-major flat layout.
pub fn multinomial_score(
    x: &Array2<f64>,
    t_idx: &[u32],
    k: usize,
    w: Option<&[f64]>,
    beta: &[f64],
) -> Vec<f64> {
    multinomial_score_internal(x, t_idx, k, w, &Array1::from_vec(beta.to_vec())).to_vec()
}

pub(crate) fn multinomial_score_internal(
    x: &Array2<f64>,
    t_idx: &[u32],
    k: usize,
    w: Option<&[f64]>,
    beta: &Array1<f64>,
) -> Array1<f64> {
    let (n, p) = x.dim();
    let bm = Array2::from_shape_fn((k - 1, p), |(l, j)| beta[l * p + j]);
    let pr = super::softmax_probabilities(&bm, x.view());
    let mut g = Array1::<f64>::zeros((k - 1) * p);
    for i in 0..n {
        let wi = weight_at(w, i);
        if wi == 0.0 {
            continue;
        }
        for l in 1..k {
            let resid = wi * (f64::from(t_idx[i] as usize == l) - pr[(i, l)]);
            let base = (l - 1) * p;
            for j in 0..p {
                g[base + j] += resid * x[(i, j)];
            }
        }
    }
    g
}

/// Least-squares "log-likelihood" `-(1/2) Σ w (y − xβ)²` and its score
/// `Xᵀ (w ⊙ (y − Xβ))`; the Gaussian scale is profiled out.
pub fn linear_loglik(x: &Array2<f64>, y: &[f64], w: Option<&[f64]>, beta: &[f64]) -> f64 {
    let b = Array1::from_vec(beta.to_vec());
    let eta = x.dot(&b);
    let mut ll = 0.0;
    for i in 0..x.nrows() {
        let wi = weight_at(w, i);
        let r = y[i] - eta[i];
        ll -= 0.5 * wi * r * r;
    }
    ll
}

pub fn linear_score(x: &Array2<f64>, y: &[f64], w: Option<&[f64]>, beta: &[f64]) -> Vec<f64> {
    let (n, p) = x.dim();
    let b = Array1::from_vec(beta.to_vec());
    let eta = x.dot(&b);
    let mut g = vec![0.0; p];
    for i in 0..n {
        let wi = weight_at(w, i);
        if wi == 0.0 {
            continue;
        }
        let r = wi * (y[i] - eta[i]);
        for j in 0..p {
            g[j] += r * x[(i, j)];
        }
    }
    g
}
