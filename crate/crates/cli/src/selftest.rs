//! Built-in oracle suites.

use std::fmt::Write as _;

use ibs::diffuse::{
    assemble_family, build_geometry, kernel_bound_check, nu_mu_constants, GeometryParams,
};
use ibs::series::random_unit_vector;
use ibs::{
    bloch_radii, classical_inverse_coefficients, forward_series, inverse_coefficients,
    inverse_coefficients_with, make_random_matrix_family, make_scalar_family, reconstruct,
    reconstruction_bound, tail_bound, theorem1_radius, DataVector, FieldVector, LinearizedInverse,
    OperatorFamily, RecursionOptions, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Run the equivalence suite against a recursion with a flipped sign.
    pub inject_sign_fault: bool,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let _ = writeln!(
            out,
            "{} of {} checks passed",
            self.checks.len() - self.failures(),
            self.checks.len()
        );
        out
    }
}

type Outcome = ibs::Result<(bool, String)>;

fn check(name: &'static str, outcome: Outcome) -> Check {
    match outcome {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn series_mul(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate().take(len) {
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `outer(inner(x))` for series without constant term; index `i` holds the coefficient of `x^{i+1}`.
fn compose(outer: &[f64], inner: &[f64], n: usize) -> Vec<f64> {
    let mut total = vec![0.0; n];
    let mut power = inner[..n.min(inner.len())].to_vec();
    power.resize(n, 0.0);
    for (k, c) in outer.iter().enumerate().take(n) {
        for (t, p) in total.iter_mut().zip(&power) {
            *t += c * p;
        }
        if k + 1 < n {
            // x^{k+2} terms: shift by one since both factors start at x^1
            let mut next = vec![0.0; n];
            let prod = series_mul(&power, inner, n);
            next[1..].copy_from_slice(&prod[..n - 1]);
            power = next;
        }
    }
    total
}

/// Reversion of `f` by matching coefficients of `g(f(x)) = x` one order at a time.
fn reversion(c: &[f64], n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n];
    d[0] = 1.0 / c[0];
    for m in 1..n {
        let partial = compose(&d, c, m + 1);
        d[m] = -partial[m] / c[0].powi(m as i32 + 1);
    }
    d
}

fn scalar_oracle() -> Outcome {
    let family = make_scalar_family(&[1.0; 10], 1.0)?;
    let coeffs = inverse_coefficients(
        &family,
        &LinearizedInverse::exact(&family)?,
        &DataVector::from_vec(vec![1.0]),
        10,
    )?;
    let mut worst: f64 = 0.0;
    for m in 1..=10 {
        let expected = if m % 2 == 1 { 1.0 } else { -1.0 };
        worst = worst.max((coeffs.term(m)[0] - expected).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut identity_err: f64 = 0.0;
    let mut oracle_err: f64 = 0.0;
    for trial in 0..3 {
        let mut c: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        c[0] = if trial == 1 { 2.0 } else { 1.0 };
        let family = make_scalar_family(&c, 1.0)?;
        let inverse = LinearizedInverse::exact(&family)?;
        let got: Vec<f64> =
            inverse_coefficients(&family, &inverse, &DataVector::from_vec(vec![1.0]), 8)?
                .terms()
                .iter()
                .map(|t| t[0])
                .collect();
        let id = compose(&got, &c, 8);
        identity_err = id.iter().enumerate().fold(identity_err, |a, (i, v)| {
            a.max((v - if i == 0 { 1.0 } else { 0.0 }).abs())
        });
        let expected = reversion(&c, 8);
        oracle_err = got.iter().zip(&expected).fold(oracle_err, |a, (g, e)| {
            a.max((g - e).abs() / e.abs().max(1.0))
        });
    }
    Ok((
        worst <= 1e-12 && identity_err <= 1e-10 && oracle_err <= 1e-12,
        format!(
            "geometric max err {worst:.3e} (tol 1e-12); composition max err {identity_err:.3e} (tol 1e-10); reversion max err {oracle_err:.3e}"
        ),
    ))
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

fn identity_scaling() -> Outcome {
    let order = 6;
    let scales = [0.02, 0.01, 0.005];
    let mut slopes = Vec::new();
    for seed in 0..10 {
        let family = make_random_matrix_family(5, 5, order, seed)?;
        let inverse = LinearizedInverse::exact(&family)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let eta = random_unit_vector(family.weights_x(), &mut rng);
        let mut residuals = Vec::new();
        for s in scales {
            let scaled = FieldVector(&eta.0 * s);
            let phi = forward_series(&family, &scaled, order)?;
            let coeffs = inverse_coefficients(&family, &inverse, &phi, order)?;
            let recon = reconstruct(&coeffs, order)?;
            residuals.push(family.norm_x(&FieldVector(&recon.0 - &scaled.0)));
        }
        slopes.push(loglog_slope(&scales, &residuals));
    }
    let min = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((
        min >= order as f64 + 0.8,
        format!("min exponent over 10 seeds {min:.3} (need >= 6.8)"),
    ))
}

fn equivalence(options: &RecursionOptions) -> Outcome {
    let mut worst: f64 = 0.0;
    let rel = |a: &FieldVector, b: &FieldVector| {
        let scale = a.amax().max(b.amax());
        if scale == 0.0 {
            0.0
        } else {
            (&a.0 - &b.0).amax() / scale
        }
    };
    let family = make_scalar_family(&[1.0; 6], 1.0)?;
    let inverse = LinearizedInverse::exact(&family)?;
    let phi = DataVector::from_vec(vec![0.3]);
    let memo = inverse_coefficients_with(&family, &inverse, &phi, 6, options)?;
    let classical = classical_inverse_coefficients(&family, &inverse, &phi, 6, None)?;
    for m in 1..=6 {
        worst = worst.max(rel(memo.term(m), classical.term(m)));
    }
    for seed in 0..3 {
        let family = make_random_matrix_family(5, 5, 6, seed)?;
        let inverse = LinearizedInverse::exact(&family)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = DataVector(random_unit_vector(family.weights_y(), &mut rng).0 * 0.05);
        let memo = inverse_coefficients_with(&family, &inverse, &phi, 6, options)?;
        let classical = classical_inverse_coefficients(&family, &inverse, &phi, 6, None)?;
        for m in 1..=6 {
            worst = worst.max(rel(memo.term(m), classical.term(m)));
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max rel difference {worst:.3e} (tol 1e-10)"),
    ))
}

fn mutation_detected() -> Outcome {
    let faulty = RecursionOptions {
        flip_second_order_sign: true,
        ..Default::default()
    };
    let (caught, detail) = equivalence(&faulty)?;
    Ok((!caught, format!("sign-flipped recursion: {detail}")))
}

fn kernel_bounds() -> Outcome {
    let geometry = build_geometry(GeometryParams {
        a: 1.0,
        radius: 2.0,
        voxels_per_axis: 8,
        n_sources: 32,
        n_detectors: 32,
        coincident: false,
    })?;
    let family = assemble_family(&geometry, 1.0)?;
    let report = kernel_bound_check(&family, 3, 100, 1, ibs::diffuse::DEFAULT_QUADRATURE_SLACK)?;
    let ratios: Vec<String> = report
        .orders
        .iter()
        .map(|o| format!("{:.3e}", o.max_ratio))
        .collect();
    Ok((
        report.passed(),
        format!("max ratios m=1..3 [{}] (limit 1.05)", ratios.join(", ")),
    ))
}

fn formulas() -> Outcome {
    let mut errs: Vec<f64> = Vec::new();
    let (r, p) = bloch_radii(1.0)?;
    errs.extend([r - 0.447213595499958, p - 0.2360679774997897]);
    let (r, p) = bloch_radii(10.0)?;
    errs.extend([r - 0.04993761694389223, p - 0.02498439450078573]);
    let t = theorem1_radius(1.0, 1.0, 1.0, Variant::Theorem)?;
    errs.extend([
        t.c - 2.0,
        t.r - 0.03112887414927483,
        t.r0 - 0.2480694691784169,
    ]);
    errs.push(theorem1_radius(1.0, 1.0, 3.0, Variant::Theorem)?.r - 0.02079728939614774);
    errs.push(theorem1_radius(0.5, 1.0, 1.0, Variant::Proposition)?.r - 0.06155281280883027);
    errs.push(tail_bound(0.9, 1.0, 0.2, 5)? - 1.062882);
    let b = reconstruction_bound(1.0, 1.0, 1.0, 0.2, 0.1)?;
    errs.push(b.value().unwrap_or(f64::NAN) - 0.2285714285714286);
    let (nu, mu) = nu_mu_constants(1.0, 1.0, 2.0)?;
    errs.extend([nu - 0.04159844715273983, mu - 0.28209479177387814]);
    let worst = errs.iter().fold(0.0_f64, |a, e| {
        if e.is_nan() {
            f64::INFINITY
        } else {
            a.max(e.abs())
        }
    });
    Ok((
        worst <= 1e-9,
        format!(
            "max abs err {worst:.3e} over {} values (tol 1e-9)",
            errs.len()
        ),
    ))
}

pub fn run(options: &SelftestOptions) -> SelftestReport {
    let recursion = RecursionOptions {
        flip_second_order_sign: options.inject_sign_fault,
        ..Default::default()
    };
    let checks = vec![
        check("scalar-inversion-oracle", scalar_oracle()),
        check("finite-dimensional-identity", identity_scaling()),
        check("formulation-equivalence", equivalence(&recursion)),
        check("mutation-detection", mutation_detected()),
        check("kernel-bounds", kernel_bounds()),
        check("formula-spot-checks", formulas()),
    ];
    SelftestReport { checks }
}
