mod common;

use common::rel_err;
use ibs::{
    bloch_radii, build_report, divergence_monitor, inverse_coefficients, make_scalar_family,
    partial_sums, reconstruction_bound, tail_bound, theorem1_radius, DataVector, LinearizedInverse,
    OperatorFamily, ReconstructionBound, ScalarFamily, SeriesTrend, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORDER: usize = 12;

// coefficients c_m = nu mu^{m-1} attain the growth bound with equality
fn extremal(nu: f64, mu: f64) -> ScalarFamily {
    let c: Vec<f64> = (0..ORDER).map(|m| nu * mu.powi(m as i32)).collect();
    make_scalar_family(&c, mu).unwrap()
}

fn bounded_random(nu: f64, mu: f64, seed: u64) -> ScalarFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c: Vec<f64> = (0..ORDER)
        .map(|m| rng.random_range(-1.0..1.0) * nu * mu.powi(m as i32))
        .collect();
    c[0] = nu;
    make_scalar_family(&c, mu).unwrap()
}

struct Run {
    r: f64,
    r0: f64,
    eta1: f64,
    norms: Vec<f64>,
    sums: Vec<f64>,
}

fn run_at_fraction(family: &ScalarFamily, fraction: f64) -> Run {
    let b = family.bounds();
    let inverse = LinearizedInverse::exact(family).unwrap();
    let radius = theorem1_radius(b.nu, b.mu, inverse.operator_norm(), Variant::Theorem).unwrap();
    // K_1^+ = 1/c_1 here, so |K_1^+ phi| = fraction * r
    let phi = DataVector::from_vec(vec![fraction * radius.r * family.coeffs()[0]]);
    let coeffs = inverse_coefficients(family, &inverse, &phi, ORDER).unwrap();
    Run {
        r: radius.r,
        r0: radius.r0,
        eta1: family.norm_x(coeffs.term(1)),
        norms: coeffs.term_norms().to_vec(),
        sums: partial_sums(&coeffs).iter().map(|s| s[0]).collect(),
    }
}

fn families() -> Vec<(String, ScalarFamily)> {
    let mut out = Vec::new();
    for (nu, mu) in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)] {
        out.push((format!("extremal nu={nu} mu={mu}"), extremal(nu, mu)));
        for seed in 0..3 {
            out.push((
                format!("random nu={nu} mu={mu} seed={seed}"),
                bounded_random(nu, mu, seed),
            ));
        }
    }
    out
}

#[test]
fn term_ratios_stay_below_sufficiency_ratio() {
    for (nu, mu) in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)] {
        let run = run_at_fraction(&extremal(nu, mu), 0.9);
        assert!(rel_err(run.eta1, 0.9 * run.r) <= 1e-12);
        let q = run.eta1 / run.r;
        for (m, w) in run.norms.windows(2).enumerate() {
            assert!(
                w[1] / w[0] <= q + 0.05,
                "nu={nu} mu={mu}: ratio {} at m={}",
                w[1] / w[0],
                m + 2
            );
        }
    }
}

#[test]
fn terms_obey_geometric_envelope() {
    // |K_m phi| <= r0 (|eta_1|/r)^m; random coefficients may cancel single terms
    for (name, family) in families() {
        let run = run_at_fraction(&family, 0.9);
        let q = run.eta1 / run.r;
        for (m, n) in run.norms.iter().enumerate() {
            assert!(
                *n <= run.r0 * q.powi(m as i32 + 1) * (1.0 + 1e-9),
                "{name} m={}",
                m + 1
            );
        }
    }
}

#[test]
fn series_sum_stays_in_image_ball() {
    for (name, family) in families() {
        let run = run_at_fraction(&family, 0.9);
        let sum = run.sums[ORDER - 1].abs();
        assert!(
            sum <= run.r0 * (1.0 + 1e-6),
            "{name}: {sum} vs r0 {}",
            run.r0
        );
    }
}

#[test]
fn tail_bound_dominates_observed_tail() {
    for (name, family) in families() {
        for fraction in [0.2, 0.6, 0.9] {
            let run = run_at_fraction(&family, fraction);
            let last = run.sums[ORDER - 1];
            for n in 1..=10 {
                let observed = (last - run.sums[n - 1]).abs();
                let bound = tail_bound(run.eta1, run.r, run.r0, n).unwrap();
                assert!(
                    observed <= bound,
                    "{name} fraction {fraction} N={n}: {observed} > {bound}"
                );
            }
        }
    }
}

#[test]
fn extremal_inverse_has_closed_form() {
    // nu eta / (1 - mu eta) = phi  =>  eta = phi / (nu + mu phi)
    for (nu, mu) in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)] {
        let family = extremal(nu, mu);
        let run = run_at_fraction(&family, 0.9);
        let phi = 0.9 * run.r * nu;
        assert!(rel_err(run.sums[ORDER - 1], phi / (nu + mu * phi)) <= 1e-14);
    }
}

#[test]
fn report_cases() {
    let family = extremal(1.0, 1.0);
    let inverse = LinearizedInverse::exact(&family).unwrap();

    let zero = build_report(
        &family,
        &inverse,
        &DataVector::zeros(1),
        ORDER,
        Variant::Theorem,
        None,
    )
    .unwrap();
    assert!(zero.converges);
    assert_eq!(zero.eta1_norm, 0.0);
    assert_eq!(zero.tail_bound, Some(0.0));
    assert!(zero.recon_bound.is_none());

    let r = zero.r;
    let phi = DataVector::from_vec(vec![0.9 * r]);
    let inside = build_report(&family, &inverse, &phi, ORDER, Variant::Theorem, None).unwrap();
    assert!(inside.converges);
    let coeffs = inverse_coefficients(&family, &inverse, &phi, ORDER).unwrap();
    assert_eq!(
        divergence_monitor(&coeffs, 1.0).trend,
        SeriesTrend::Contracting
    );

    let far = build_report(
        &family,
        &inverse,
        &DataVector::from_vec(vec![2.0]),
        ORDER,
        Variant::Theorem,
        None,
    )
    .unwrap();
    assert!(!far.converges);
    assert!(far.tail_bound.is_none());
}

#[test]
fn synthetic_report_with_exact_linearization() {
    let family = extremal(1.0, 1.0);
    let inverse = LinearizedInverse::exact(&family).unwrap();
    let truth = ibs::FieldVector::from_vec(vec![0.01]);
    let phi = ibs::forward_series(&family, &truth, ORDER).unwrap();
    let report =
        ibs::build_synthetic_report(&family, &inverse, &phi, &truth, ORDER, Variant::Theorem)
            .unwrap();
    assert_eq!(report.linearization_residual, Some(0.0));
    match report.recon_bound.unwrap() {
        ReconstructionBound::Applicable { bound, .. } => assert_eq!(bound, 0.0),
        other => panic!("expected applicable, got {other:?}"),
    }
}

// frozen from 50-digit evaluations of the closed forms
#[test]
fn formula_reference_values() {
    let tol = 1e-9;
    let (r, p) = bloch_radii(1.0).unwrap();
    assert!((r - 0.447213595499958).abs() <= tol && (p - 0.2360679774997897).abs() <= tol);
    let (r, p) = bloch_radii(10.0).unwrap();
    assert!((r - 0.04993761694389223).abs() <= tol && (p - 0.02498439450078573).abs() <= tol);
    let (r, p) = bloch_radii(1e-12).unwrap();
    assert!((r - 1.0).abs() <= tol && (p - 1.0).abs() <= tol);

    let t = theorem1_radius(1.0, 1.0, 1.5, Variant::Theorem).unwrap();
    assert_eq!(t.c, 2.0);
    assert!((t.r - 0.03112887414927483).abs() <= tol);
    assert!((t.r0 - 0.2480694691784169).abs() <= tol);
    let t = theorem1_radius(1.0, 1.0, 3.0, Variant::Theorem).unwrap();
    assert_eq!(t.c, 3.0);
    assert!((t.r - 0.02079728939614774).abs() <= tol);
    let t = theorem1_radius(0.5, 1.0, 1.0, Variant::Proposition).unwrap();
    assert_eq!(t.c, 1.0);
    assert!((t.r - 0.06155281280883027).abs() <= tol);

    assert_eq!(tail_bound(0.0, 1.0, 1.0, 7).unwrap(), 0.0);
    assert!((tail_bound(0.5, 1.0, 1.0, 1).unwrap() - 0.5).abs() <= tol);
    assert!((tail_bound(0.9, 1.0, 0.2, 5).unwrap() - 1.062882).abs() <= tol);

    let b = reconstruction_bound(1.0, 1.0, 1.0, 0.2, 0.1).unwrap();
    assert!((b.value().unwrap() - 0.2285714285714286).abs() <= tol);
    let b = reconstruction_bound(1.0, 1.0, 1.0, 0.0, 0.3).unwrap();
    assert!((b.value().unwrap() - 0.3).abs() <= tol);
    assert!(matches!(
        reconstruction_bound(1.0, 1.0, 1.0, 0.5, 0.1).unwrap(),
        ReconstructionBound::Inapplicable { .. }
    ));

    let (nu, mu) = ibs::diffuse::nu_mu_constants(1.0, 1.0, 2.0).unwrap();
    assert!((mu - 0.28209479177387814).abs() <= tol);
    assert!((nu - 0.04159844715273983).abs() <= tol);
    let (nu2, mu2) = ibs::diffuse::nu_mu_constants(2.0, 1.0, 2.0).unwrap();
    assert!(rel_err(nu2, 4.0 * nu) <= 1e-15 && rel_err(mu2, 4.0 * mu) <= 1e-15);
    assert_eq!(
        ibs::diffuse::nu_mu_constants(0.0, 1.0, 2.0).unwrap(),
        (0.0, 0.0)
    );
}
