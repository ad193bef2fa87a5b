//! Independent oracles shared by the integration suites. Nothing here calls
//! into the recursion under test.
#![allow(dead_code)]

use ibs::{DataVector, FieldVector, LinearizedInverse, OperatorFamily};
use nalgebra::{DMatrix, DVector};

/// Truncated power series with `coeffs[i]` the coefficient of `w^i`.
pub type Series = Vec<f64>;

pub fn series_mul(a: &[f64], b: &[f64], len: usize) -> Series {
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate().take(len) {
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn series_reciprocal(a: &[f64], len: usize) -> Series {
    assert!(a[0] != 0.0);
    let mut out = vec![0.0; len];
    out[0] = 1.0 / a[0];
    for n in 1..len {
        let s: f64 = (1..=n.min(a.len() - 1)).map(|k| a[k] * out[n - k]).sum();
        out[n] = -s / a[0];
    }
    out
}

/// Coefficients `d_1..d_n` of the compositional inverse of
/// `f(w) = sum_m c_m w^m`, by Lagrange inversion:
/// `d_m = (1/m) [w^{m-1}] (w / f(w))^m`.
pub fn lagrange_inverse(c: &[f64], n: usize) -> Vec<f64> {
    let reduced: Vec<f64> = c.to_vec(); // f(w)/w = c_1 + c_2 w + ...
    let g = series_reciprocal(&reduced, n);
    let mut power = vec![1.0];
    power.resize(n, 0.0);
    let mut out = Vec::with_capacity(n);
    for m in 1..=n {
        power = series_mul(&power, &g, n);
        out.push(power[m - 1] / m as f64);
    }
    out
}

/// Coefficients `e_1..e_n` of `outer(inner(w))`, both given as `[x_1, x_2, ..]`
/// without constant term.
pub fn compose(outer: &[f64], inner: &[f64], n: usize) -> Vec<f64> {
    let mut inner_full = vec![0.0];
    inner_full.extend_from_slice(inner);
    inner_full.resize(n + 1, 0.0);
    let mut power = vec![0.0; n + 1];
    power[0] = 1.0;
    let mut total = vec![0.0; n + 1];
    for coeff in outer.iter().take(n) {
        power = series_mul(&power, &inner_full, n + 1);
        for (t, p) in total.iter_mut().zip(&power) {
            *t += coeff * p;
        }
    }
    total[1..].to_vec()
}

/// Largest singular value of `m` by power iteration on `m^T m`.
pub fn power_iteration_norm(m: &DMatrix<f64>, iterations: usize) -> f64 {
    let mut v = DVector::from_fn(m.ncols(), |i, _| 1.0 + (i as f64 * 0.618).sin());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let w = m.tr_mul(&(m * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm.sqrt();
        v = w / norm;
    }
    estimate
}

/// Top right singular vector of `m` by power iteration.
pub fn top_right_vector(m: &DMatrix<f64>, iterations: usize) -> DVector<f64> {
    let mut v = DVector::from_fn(m.ncols(), |i, _| 1.0 + (i as f64 * 0.377).cos());
    for _ in 0..iterations {
        v = m.tr_mul(&(m * &v));
        let n = v.norm();
        v /= n;
    }
    v
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// `|sum_{m<=order} K^m(F(s eta)) - s eta|` with the forward series truncated at `order`.
pub fn identity_residual<F: OperatorFamily>(
    family: &F,
    inverse: &LinearizedInverse,
    eta: &FieldVector,
    s: f64,
    order: usize,
) -> f64 {
    let scaled = FieldVector(&eta.0 * s);
    let phi: DataVector = ibs::forward_series(family, &scaled, order).unwrap();
    let coeffs = ibs::inverse_coefficients(family, inverse, &phi, order).unwrap();
    let recon = ibs::reconstruct(&coeffs, order).unwrap();
    family.norm_x(&FieldVector(&recon.0 - &scaled.0))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

pub fn vec_rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = b.amax().max(a.amax());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).amax() / scale
    }
}
