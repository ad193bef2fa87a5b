//! Inverse Born series.
//!
//! The memoized recursion computes the diagonal values `K^m(phi)` of the
//! inverse operators strictly in increasing order:
//!
//! ```text
//! K^1(phi) = K_1^+ phi
//! K^m(phi) = - sum_{n=2}^{m} sum_{i_1+..+i_n=m} K_1^+ K_n(K^{i_1}(phi), .., K^{i_n}(phi))
//! ```
//!
//! Only the stored vectors `K^j(phi)` are read back, never operators. The
//! classical recursion, which needs the inverse operators at mixed
//! arguments, is kept for cross-validation.

use rayon::prelude::*;
use serde::Serialize;

use crate::compositions::compositions;
use crate::error::{Error, Result};
use crate::linearized::LinearizedInverse;
use crate::series::{DataVector, FieldVector, OperatorFamily};

pub const DEFAULT_MAX_INVERSE_ORDER: usize = 12;
pub const DEFAULT_CLASSICAL_MAX_ORDER: usize = 8;

#[derive(Debug, Clone)]
pub struct InverseCoefficients {
    terms: Vec<FieldVector>,
    phi: DataVector,
    term_norms: Vec<f64>,
}

impl InverseCoefficients {
    /// `K^m(phi)` for `m >= 1`.
    pub fn term(&self, m: usize) -> &FieldVector {
        &self.terms[m - 1]
    }

    pub fn terms(&self) -> &[FieldVector] {
        &self.terms
    }

    pub fn phi(&self) -> &DataVector {
        &self.phi
    }

    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn term_norms(&self) -> &[f64] {
        &self.term_norms
    }
}

#[derive(Debug, Clone, Default)]
pub struct RecursionOptions {
    /// Cost ceiling on the requested order; `None` uses the default of 12.
    pub max_order: Option<usize>,
    /// Flips the sign of the second-order contribution. Only for checking
    /// that the validation suites catch a broken recursion.
    #[doc(hidden)]
    pub flip_second_order_sign: bool,
}

fn validate_inputs<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    phi: &DataVector,
    order: usize,
) -> Result<()> {
    if order == 0 {
        return Err(Error::UnsupportedOrder {
            requested: 0,
            max: family.max_order(),
        });
    }
    if phi.len() != family.dim_y() {
        return Err(Error::Dimension {
            expected: family.dim_y(),
            actual: phi.len(),
        });
    }
    if k1_inv.dim_x() != family.dim_x() || k1_inv.dim_y() != family.dim_y() {
        return Err(Error::Dimension {
            expected: family.dim_x() * family.dim_y(),
            actual: k1_inv.dim_x() * k1_inv.dim_y(),
        });
    }
    if order >= 2 && order > family.max_order() {
        return Err(Error::UnsupportedOrder {
            requested: order,
            max: family.max_order(),
        });
    }
    Ok(())
}

/// Memoized recursion with default options.
pub fn inverse_coefficients<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    phi: &DataVector,
    order: usize,
) -> Result<InverseCoefficients> {
    inverse_coefficients_with(family, k1_inv, phi, order, &RecursionOptions::default())
}

pub fn inverse_coefficients_with<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    phi: &DataVector,
    order: usize,
    options: &RecursionOptions,
) -> Result<InverseCoefficients> {
    let limit = options.max_order.unwrap_or(DEFAULT_MAX_INVERSE_ORDER);
    if order > limit {
        return Err(Error::CostGuard {
            requested: order,
            limit,
        });
    }
    validate_inputs(family, k1_inv, phi, order)?;

    let mut terms = Vec::with_capacity(order);
    terms.push(k1_inv.apply(phi));
    for m in 2..=order {
        let next = memo_term(family, k1_inv, &terms, m, options.flip_second_order_sign)?;
        terms.push(next);
    }
    let term_norms = terms.iter().map(|t| family.norm_x(t)).collect();
    Ok(InverseCoefficients {
        terms,
        phi: phi.clone(),
        term_norms,
    })
}

/// `K^m(phi)` from the stored lower-order terms (`terms[j-1] = K^j(phi)`).
///
/// Contributions for each `n` are formed independently, then summed in
/// increasing `n`; inside one `n` the compositions are visited
/// lexicographically. `K_1^+` is applied once to the accumulated data.
fn memo_term<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    terms: &[FieldVector],
    m: usize,
    flip_second_order_sign: bool,
) -> Result<FieldVector> {
    let partials: Vec<DataVector> = (2..=m)
        .into_par_iter()
        .map(|n| -> Result<DataVector> {
            let mut acc = DataVector::zeros(family.dim_y());
            for parts in compositions(m, n)? {
                let args: Vec<&FieldVector> = parts.iter().map(|&i| &terms[i - 1]).collect();
                acc.0 += family.evaluate(&args).0;
            }
            if flip_second_order_sign && n == 2 && m == 2 {
                acc.0.neg_mut();
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = DataVector::zeros(family.dim_y());
    for partial in &partials {
        total.0 += &partial.0;
    }
    let mut term = k1_inv.apply(&total);
    term.0.neg_mut();
    Ok(term)
}

/// Recomputes `K^m(phi)` from `coeffs.terms[..m-1]`; bit-identical to the stored term.
pub fn recompute_term<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    coeffs: &InverseCoefficients,
    m: usize,
) -> Result<FieldVector> {
    if m == 0 || m > coeffs.order() {
        return Err(Error::UnsupportedOrder {
            requested: m,
            max: coeffs.order(),
        });
    }
    if m == 1 {
        return Ok(k1_inv.apply(&coeffs.phi));
    }
    memo_term(family, k1_inv, &coeffs.terms[..m - 1], m, false)
}

/// Diagonal values `K^n(phi, .., phi)` from the classical recursion
///
/// ```text
/// K^n = - sum_{m=1}^{n-1} sum_{i_1+..+i_m=n} K^m o (K_{i_1} x .. x K_{i_m}) o (K_1^+)^{x n}
/// ```
///
/// where each `K^m` on the right is itself evaluated at mixed arguments by
/// the same expansion. Cost grows super-exponentially, so orders above
/// `max_order` (default 8) are refused.
pub fn classical_inverse_coefficients<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    phi: &DataVector,
    order: usize,
    max_order: Option<usize>,
) -> Result<InverseCoefficients> {
    let limit = max_order.unwrap_or(DEFAULT_CLASSICAL_MAX_ORDER);
    if order > limit {
        return Err(Error::CostGuard {
            requested: order,
            limit,
        });
    }
    validate_inputs(family, k1_inv, phi, order)?;
    let terms: Vec<FieldVector> = (1..=order)
        .into_par_iter()
        .map(|n| {
            let args = vec![phi; n];
            classical_operator(family, k1_inv, &args)
        })
        .collect();
    let term_norms = terms.iter().map(|t| family.norm_x(t)).collect();
    Ok(InverseCoefficients {
        terms,
        phi: phi.clone(),
        term_norms,
    })
}

/// Classical `K^n(args[0], .., args[n-1])` at arbitrary data arguments.
pub fn classical_operator<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    args: &[&DataVector],
) -> FieldVector {
    let n = args.len();
    if n == 1 {
        return k1_inv.apply(args[0]);
    }
    let lifted: Vec<FieldVector> = args.iter().map(|a| k1_inv.apply(a)).collect();
    let mut acc = FieldVector::zeros(family.dim_x());
    for m in 1..n {
        for parts in compositions(n, m).expect("1 <= m < n") {
            let mut offset = 0;
            let images: Vec<DataVector> = parts
                .iter()
                .map(|&len| {
                    let block: Vec<&FieldVector> = lifted[offset..offset + len].iter().collect();
                    offset += len;
                    family.evaluate(&block)
                })
                .collect();
            let image_refs: Vec<&DataVector> = images.iter().collect();
            acc.0 += classical_operator(family, k1_inv, &image_refs).0;
        }
    }
    acc.0.neg_mut();
    acc
}

/// Partial sum `eta^{(K)} = sum_{m=1}^{K} K^m(phi)`.
pub fn reconstruct(coeffs: &InverseCoefficients, order: usize) -> Result<FieldVector> {
    if order == 0 || order > coeffs.order() {
        return Err(Error::UnsupportedOrder {
            requested: order,
            max: coeffs.order(),
        });
    }
    let mut sum = FieldVector::zeros(coeffs.terms[0].len());
    for term in &coeffs.terms[..order] {
        sum.0 += &term.0;
    }
    Ok(sum)
}

/// All partial sums `eta^{(1)}, .., eta^{(N)}`, accumulated left to right.
pub fn partial_sums(coeffs: &InverseCoefficients) -> Vec<FieldVector> {
    let mut sums = Vec::with_capacity(coeffs.order());
    let mut running = FieldVector::zeros(coeffs.terms[0].len());
    for term in &coeffs.terms {
        running.0 += &term.0;
        sums.push(running.clone());
    }
    sums
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesTrend {
    Contracting,
    Diverging,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorVerdict {
    pub trend: SeriesTrend,
    /// Largest successive norm ratio over the last three orders.
    pub ratio: f64,
}

pub const DEFAULT_RATIO_THRESHOLD: f64 = 1.0;

pub fn divergence_monitor(coeffs: &InverseCoefficients, ratio_threshold: f64) -> MonitorVerdict {
    monitor_norms(&coeffs.term_norms, ratio_threshold)
}

/// Flags divergence when three consecutive norm ratios reach `ratio_threshold`.
pub fn monitor_norms(norms: &[f64], ratio_threshold: f64) -> MonitorVerdict {
    let ratios: Vec<f64> = norms
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    let mut run = 0;
    let mut diverging = false;
    for &r in &ratios {
        if r >= ratio_threshold {
            run += 1;
            if run >= 3 {
                diverging = true;
            }
        } else {
            run = 0;
        }
    }
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let ratio = tail.iter().fold(0.0_f64, |a, &r| a.max(r));
    MonitorVerdict {
        trend: if diverging {
            SeriesTrend::Diverging
        } else {
            SeriesTrend::Contracting
        },
        ratio,
    }
}
