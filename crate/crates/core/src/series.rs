//! Multilinear operator families and the forward Born series.
//!
//! A family is a sequence of maps `K_m : X^m -> Y`, each linear in every
//! slot, acting on finite-dimensional spaces whose norms are weighted
//! `l2` norms (`|v|^2 = sum_i w_i v_i^2`). The weights are quadrature weights
//! for the discretized `L2` spaces, so every bound below is stated in those
//! norms.

use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Weighted `l2` norm `(sum_i w_i v_i^2)^{1/2}`.
pub fn weighted_norm(values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * v * v)
        .sum::<f64>()
        .sqrt()
}

macro_rules! weighted_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub DVector<f64>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                Self(DVector::zeros(len))
            }

            pub fn from_vec(values: Vec<f64>) -> Self {
                Self(DVector::from_vec(values))
            }

            pub fn norm_with(&self, weights: &[f64]) -> f64 {
                weighted_norm(self.0.as_slice(), weights)
            }

            pub fn into_inner(self) -> DVector<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = DVector<f64>;

            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut DVector<f64> {
                &mut self.0
            }
        }

        impl From<DVector<f64>> for $name {
            fn from(values: DVector<f64>) -> Self {
                Self(values)
            }
        }
    };
}

weighted_vector!(
    /// A contrast `eta` sampled on the discretization of `X`.
    FieldVector
);
weighted_vector!(
    /// Data `phi` sampled on the discretization of `Y`.
    DataVector
);

/// Declared growth constants: `|K_m(e_1..e_m)| <= nu mu^{m-1} prod |e_i|`.
///
/// `slack` is the relative tolerance the family claims for sampled checks
/// (zero when the constants are exact).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundConstants {
    pub nu: f64,
    pub mu: f64,
    pub slack: f64,
}

impl BoundConstants {
    pub fn order_bound(&self, order: usize) -> f64 {
        self.nu * self.mu.powi(order as i32 - 1)
    }
}

pub trait OperatorFamily: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn max_order(&self) -> usize;
    fn bounds(&self) -> BoundConstants;
    fn weights_x(&self) -> &[f64];
    fn weights_y(&self) -> &[f64];

    /// Evaluates `K_m(args[0], .., args[m-1])` with `m = args.len()`.
    ///
    /// Callers guarantee `1 <= m <= max_order` and matching dimensions; use
    /// [`OperatorFamily::apply`] for the checked entry point.
    fn evaluate(&self, args: &[&FieldVector]) -> DataVector;

    fn apply(&self, args: &[&FieldVector]) -> Result<DataVector> {
        let order = args.len();
        if order == 0 || order > self.max_order() {
            return Err(Error::UnsupportedOrder {
                requested: order,
                max: self.max_order(),
            });
        }
        for arg in args {
            if arg.len() != self.dim_x() {
                return Err(Error::Dimension {
                    expected: self.dim_x(),
                    actual: arg.len(),
                });
            }
        }
        Ok(self.evaluate(args))
    }

    /// Dense matrix of `K_1` (`dim_y x dim_x`), one column per unit input.
    fn linear_matrix(&self) -> DMatrix<f64> {
        let (rows, cols) = (self.dim_y(), self.dim_x());
        let mut matrix = DMatrix::zeros(rows, cols);
        let mut unit = FieldVector::zeros(cols);
        for j in 0..cols {
            unit[j] = 1.0;
            let column = self.evaluate(&[&unit]);
            matrix.set_column(j, &column.0);
            unit[j] = 0.0;
        }
        matrix
    }

    fn norm_x(&self, v: &FieldVector) -> f64 {
        v.norm_with(self.weights_x())
    }

    fn norm_y(&self, v: &DataVector) -> f64 {
        v.norm_with(self.weights_y())
    }
}

impl<F: OperatorFamily + ?Sized> OperatorFamily for &F {
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_y(&self) -> usize {
        (**self).dim_y()
    }
    fn max_order(&self) -> usize {
        (**self).max_order()
    }
    fn bounds(&self) -> BoundConstants {
        (**self).bounds()
    }
    fn weights_x(&self) -> &[f64] {
        (**self).weights_x()
    }
    fn weights_y(&self) -> &[f64] {
        (**self).weights_y()
    }
    fn evaluate(&self, args: &[&FieldVector]) -> DataVector {
        (**self).evaluate(args)
    }
    fn linear_matrix(&self) -> DMatrix<f64> {
        (**self).linear_matrix()
    }
}

/// Partial sum `sum_{m=1}^{order} K_m(eta, .., eta)`.
///
/// Terms are evaluated in parallel and reduced in increasing `m`, so the
/// result does not depend on scheduling.
pub fn forward_series<F: OperatorFamily + ?Sized>(
    family: &F,
    eta: &FieldVector,
    order: usize,
) -> Result<DataVector> {
    let terms = forward_terms(family, eta, order)?;
    let mut sum = DataVector::zeros(family.dim_y());
    for term in &terms {
        sum.0 += &term.0;
    }
    Ok(sum)
}

/// The individual terms `K_m(eta, .., eta)` for `m = 1..=order`.
pub fn forward_terms<F: OperatorFamily + ?Sized>(
    family: &F,
    eta: &FieldVector,
    order: usize,
) -> Result<Vec<DataVector>> {
    if order == 0 || order > family.max_order() {
        return Err(Error::UnsupportedOrder {
            requested: order,
            max: family.max_order(),
        });
    }
    if eta.len() != family.dim_x() {
        return Err(Error::Dimension {
            expected: family.dim_x(),
            actual: eta.len(),
        });
    }
    Ok((1..=order)
        .into_par_iter()
        .map(|m| {
            let args = vec![eta; m];
            family.evaluate(&args)
        })
        .collect())
}

/// `nu sum_{m>order} mu^{m-1} |eta|^m`, the bound on the neglected forward terms.
pub fn forward_tail_bound(nu: f64, mu: f64, eta_norm: f64, order: usize) -> Result<f64> {
    if !(nu > 0.0 && mu > 0.0 && eta_norm >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "forward tail needs nu, mu > 0 and |eta| >= 0 (got {nu}, {mu}, {eta_norm})"
        )));
    }
    let q = mu * eta_norm;
    if q >= 1.0 {
        return Err(Error::DivergentTail(q));
    }
    Ok(nu * eta_norm * q.powi(order as i32) / (1.0 - q))
}

/// `K_m(e_1..e_m) = c_m e_1 ... e_m` on `X = Y = R`.
#[derive(Debug, Clone)]
pub struct ScalarFamily {
    coeffs: Vec<f64>,
    bounds: BoundConstants,
    unit_weight: [f64; 1],
}

impl ScalarFamily {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Scalar family with coefficients `c_1..c_M`; `nu = max_m |c_m| / mu^{m-1}`.
pub fn make_scalar_family(coeffs: &[f64], mu: f64) -> Result<ScalarFamily> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("no coefficients".into()));
    }
    if coeffs[0] == 0.0 {
        return Err(Error::NonInvertibleLinearization("c_1 = 0".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive, got {mu}"
        )));
    }
    let nu = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c.abs() / mu.powi(i as i32))
        .fold(0.0_f64, f64::max);
    Ok(ScalarFamily {
        coeffs: coeffs.to_vec(),
        bounds: BoundConstants { nu, mu, slack: 0.0 },
        unit_weight: [1.0],
    })
}

impl OperatorFamily for ScalarFamily {
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn max_order(&self) -> usize {
        self.coeffs.len()
    }
    fn bounds(&self) -> BoundConstants {
        self.bounds
    }
    fn weights_x(&self) -> &[f64] {
        &self.unit_weight
    }
    fn weights_y(&self) -> &[f64] {
        &self.unit_weight
    }
    fn evaluate(&self, args: &[&FieldVector]) -> DataVector {
        let product: f64 = args.iter().map(|a| a[0]).product();
        DataVector::from_vec(vec![self.coeffs[args.len() - 1] * product])
    }
}

/// One nonlinear order of a [`RandomMatrixFamily`]:
/// `y = scale * P (A_1 e_1 o A_2 e_2 o ... )` with `o` the entrywise product.
#[derive(Debug, Clone)]
struct HadamardTerm {
    factors: Vec<DMatrix<f64>>,
    projection: DMatrix<f64>,
    scale: f64,
}

/// Finite-dimensional oracle family built from seeded Gaussian matrices.
///
/// The constants are exact upper bounds: `mu = 1`, `nu = |K_1|_2`, and each
/// higher order is scaled so that `|P| prod |A_j|` equals `nu mu^{m-1}`
/// (using `|a o b| <= |a| |b|`), hence `slack = 0`.
#[derive(Debug, Clone)]
pub struct RandomMatrixFamily {
    k1: DMatrix<f64>,
    higher: Vec<HadamardTerm>,
    bounds: BoundConstants,
    weights_x: Vec<f64>,
    weights_y: Vec<f64>,
}

const MIN_K1_SINGULAR_VALUE: f64 = 0.1;

/// Declared growth constant of [`RandomMatrixFamily`].
pub const RANDOM_FAMILY_MU: f64 = 3.0;

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn spectral_norm(matrix: &DMatrix<f64>) -> f64 {
    matrix
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

pub fn make_random_matrix_family(
    dim_x: usize,
    dim_y: usize,
    max_order: usize,
    seed: u64,
) -> Result<RandomMatrixFamily> {
    if dim_x == 0 || dim_y < dim_x {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= dim_x <= dim_y (got {dim_x}, {dim_y})"
        )));
    }
    if max_order == 0 {
        return Err(Error::InvalidParameter("max_order must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k1 = loop {
        let candidate = gaussian_matrix(dim_y, dim_x, &mut rng);
        let smallest = candidate
            .singular_values()
            .iter()
            .fold(f64::INFINITY, |acc, &s| acc.min(s));
        if smallest >= MIN_K1_SINGULAR_VALUE {
            break candidate;
        }
    };
    let nu = spectral_norm(&k1);
    let mu = RANDOM_FAMILY_MU;
    let higher = (2..=max_order)
        .map(|m| {
            let factors: Vec<_> = (0..m)
                .map(|_| gaussian_matrix(dim_y, dim_x, &mut rng))
                .collect();
            let projection = gaussian_matrix(dim_y, dim_y, &mut rng);
            let raw =
                spectral_norm(&projection) * factors.iter().map(spectral_norm).product::<f64>();
            HadamardTerm {
                factors,
                projection,
                scale: nu * mu.powi(m as i32 - 1) / raw,
            }
        })
        .collect();
    Ok(RandomMatrixFamily {
        k1,
        higher,
        bounds: BoundConstants { nu, mu, slack: 0.0 },
        weights_x: vec![1.0; dim_x],
        weights_y: vec![1.0; dim_y],
    })
}

impl OperatorFamily for RandomMatrixFamily {
    fn dim_x(&self) -> usize {
        self.k1.ncols()
    }
    fn dim_y(&self) -> usize {
        self.k1.nrows()
    }
    fn max_order(&self) -> usize {
        self.higher.len() + 1
    }
    fn bounds(&self) -> BoundConstants {
        self.bounds
    }
    fn weights_x(&self) -> &[f64] {
        &self.weights_x
    }
    fn weights_y(&self) -> &[f64] {
        &self.weights_y
    }
    fn evaluate(&self, args: &[&FieldVector]) -> DataVector {
        if args.len() == 1 {
            return DataVector(&self.k1 * &args[0].0);
        }
        let term = &self.higher[args.len() - 2];
        let mut product = &term.factors[0] * &args[0].0;
        for (factor, arg) in term.factors.iter().zip(args).skip(1) {
            product.component_mul_assign(&(factor * &arg.0));
        }
        DataVector(&term.projection * product * term.scale)
    }
    fn linear_matrix(&self) -> DMatrix<f64> {
        self.k1.clone()
    }
}

/// Wraps a family and counts `evaluate` calls per order.
pub struct CountingFamily<F> {
    inner: F,
    counts: Vec<AtomicUsize>,
}

impl<F: OperatorFamily> CountingFamily<F> {
    pub fn new(inner: F) -> Self {
        let counts = (0..=inner.max_order())
            .map(|_| AtomicUsize::new(0))
            .collect();
        Self { inner, counts }
    }

    /// Number of evaluations at `order` so far.
    pub fn calls(&self, order: usize) -> usize {
        self.counts
            .get(order)
            .map_or(0, |c| c.load(Ordering::Relaxed))
    }

    pub fn reset(&self) {
        for c in &self.counts {
            c.store(0, Ordering::Relaxed);
        }
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: OperatorFamily> OperatorFamily for CountingFamily<F> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }
    fn max_order(&self) -> usize {
        self.inner.max_order()
    }
    fn bounds(&self) -> BoundConstants {
        self.inner.bounds()
    }
    fn weights_x(&self) -> &[f64] {
        self.inner.weights_x()
    }
    fn weights_y(&self) -> &[f64] {
        self.inner.weights_y()
    }
    fn evaluate(&self, args: &[&FieldVector]) -> DataVector {
        self.counts[args.len()].fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(args)
    }
    fn linear_matrix(&self) -> DMatrix<f64> {
        self.inner.linear_matrix()
    }
}

/// Gaussian vector normalized to unit weighted norm.
pub fn random_unit_vector<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> FieldVector {
    loop {
        let v = FieldVector(DVector::from_fn(weights.len(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        }));
        let norm = v.norm_with(weights);
        if norm > 0.0 {
            return FieldVector(v.0 / norm);
        }
    }
}

/// Largest relative deviation from linearity found over random probes of
/// every slot of `K_order`.
pub fn multilinearity_defect<F: OperatorFamily + ?Sized>(
    family: &F,
    order: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = family.weights_x();
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let args: Vec<FieldVector> = (0..order)
            .map(|_| random_unit_vector(w, &mut rng))
            .collect();
        let u = random_unit_vector(w, &mut rng);
        let v = random_unit_vector(w, &mut rng);
        let alpha: f64 = rng.random_range(-2.0..2.0);
        let beta: f64 = rng.random_range(-2.0..2.0);
        let mixed = FieldVector(&u.0 * alpha + &v.0 * beta);
        for slot in 0..order {
            let eval_with = |x: &FieldVector| -> Result<DataVector> {
                let refs: Vec<&FieldVector> = args
                    .iter()
                    .enumerate()
                    .map(|(i, a)| if i == slot { x } else { a })
                    .collect();
                family.apply(&refs)
            };
            let lhs = eval_with(&mixed)?;
            let rhs = eval_with(&u)?.0 * alpha + eval_with(&v)?.0 * beta;
            let scale = lhs.0.amax().max(rhs.amax()).max(f64::MIN_POSITIVE);
            worst = worst.max((&lhs.0 - &rhs).amax() / scale);
        }
    }
    Ok(worst)
}

/// Largest observed `|K_order(e_1..e_m)| / (nu mu^{m-1})` over random unit tuples.
pub fn sampled_bound_ratio<F: OperatorFamily + ?Sized>(
    family: &F,
    order: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = family.weights_x();
    let bound = family.bounds().order_bound(order);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let args: Vec<FieldVector> = (0..order)
            .map(|_| random_unit_vector(w, &mut rng))
            .collect();
        let refs: Vec<&FieldVector> = args.iter().collect();
        let out = family.apply(&refs)?;
        worst = worst.max(family.norm_y(&out) / bound);
    }
    Ok(worst)
}
