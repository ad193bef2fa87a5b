//! Convergence radii and error bounds for the inverse series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::{inverse_coefficients, partial_sums};
use crate::linearized::LinearizedInverse;
use crate::series::{DataVector, FieldVector, OperatorFamily};

/// Which constant `C` enters the radius formula.
///
/// `Theorem` uses `C = max{2, |K_1^+| nu}`; `Proposition` uses the
/// diffuse-wave statement `C = max{1, |K_1^+| nu}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Theorem,
    Proposition,
}

impl Variant {
    pub fn floor(self) -> f64 {
        match self {
            Variant::Theorem => 2.0,
            Variant::Proposition => 1.0,
        }
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

/// Bloch radii `(r, P)` of a normalized holomorphic map bounded by `M`:
/// `r = 1/sqrt(4M^2+1)`, `P = 1/(2M + sqrt(4M^2+1))`.
pub fn bloch_radii(m: f64) -> Result<(f64, f64)> {
    require_positive("M", m)?;
    let root = (4.0 * m * m + 1.0).sqrt();
    Ok((1.0 / root, 1.0 / (2.0 * m + root)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusConstants {
    #[serde(rename = "C")]
    pub c: f64,
    pub r: f64,
    pub r0: f64,
}

/// `C`, the convergence radius `r = (sqrt(16C^2+1) - 4C)/(2 mu)` and the
/// image radius `r0 = 2 mu / sqrt(16C^2+1)`.
///
/// `r` is evaluated as `1 / (2 mu (sqrt(16C^2+1) + 4C))`, which avoids the
/// cancellation of the difference form at large `C`.
pub fn theorem1_radius(
    nu: f64,
    mu: f64,
    k1_norm: f64,
    variant: Variant,
) -> Result<RadiusConstants> {
    require_positive("nu", nu)?;
    require_positive("mu", mu)?;
    require_positive("|K_1^+|", k1_norm)?;
    let c = variant.floor().max(k1_norm * nu);
    let root = (16.0 * c * c + 1.0).sqrt();
    Ok(RadiusConstants {
        c,
        r: 1.0 / (2.0 * mu * (root + 4.0 * c)),
        r0: 2.0 * mu / root,
    })
}

/// `M (|eta_1|/r)^{N+1} / (1 - |eta_1|/r)`, the bound on `|eta^(inf) - eta^(N)|`.
pub fn tail_bound(eta1_norm: f64, r: f64, m: f64, order: usize) -> Result<f64> {
    require_positive("r", r)?;
    if !(eta1_norm >= 0.0) {
        return Err(Error::InvalidParameter(format!("|eta_1| = {eta1_norm}")));
    }
    if eta1_norm >= r {
        return Err(Error::OutsideRadius {
            value: eta1_norm,
            radius: r,
        });
    }
    let q = eta1_norm / r;
    Ok(m * q.powi(order as i32 + 1) / (1.0 - q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ReconstructionBound {
    Applicable {
        bound: f64,
        margin: f64,
    },
    /// The smallness condition on `Mcal` fails by `margin` (negative).
    Inapplicable {
        margin: f64,
    },
}

impl ReconstructionBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            ReconstructionBound::Applicable { bound, .. } => Some(*bound),
            ReconstructionBound::Inapplicable { .. } => None,
        }
    }
}

/// Largest admissible `Mcal`: `(1/mu)(1 - sqrt(x/(1+x)))` with `x = nu |K_1^+|`.
pub fn mcal_threshold(nu: f64, mu: f64, k1_norm: f64) -> Result<f64> {
    require_positive("nu", nu)?;
    require_positive("mu", mu)?;
    require_positive("|K_1^+|", k1_norm)?;
    let x = nu * k1_norm;
    Ok((1.0 - (x / (1.0 + x)).sqrt()) / mu)
}

/// `(1 - x/(1 - mu Mcal)^2 + x)^{-1} |(I - K_1^+ K_1) eta|` with `x = nu |K_1^+|`,
/// provided `Mcal` is below [`mcal_threshold`].
pub fn reconstruction_bound(
    nu: f64,
    mu: f64,
    k1_norm: f64,
    mcal: f64,
    linearization_residual: f64,
) -> Result<ReconstructionBound> {
    let threshold = mcal_threshold(nu, mu, k1_norm)?;
    if !(mcal >= 0.0 && linearization_residual >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Mcal and residual must be nonnegative (got {mcal}, {linearization_residual})"
        )));
    }
    let margin = threshold - mcal;
    if margin <= 0.0 {
        return Ok(ReconstructionBound::Inapplicable { margin });
    }
    let x = nu * k1_norm;
    let shrink = 1.0 - mu * mcal;
    let prefactor = 1.0 / (1.0 - x / (shrink * shrink) + x);
    Ok(ReconstructionBound::Applicable {
        bound: prefactor * linearization_residual,
        margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub nu: f64,
    pub mu: f64,
    pub k1_norm: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub r: f64,
    pub r0: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub eta1_norm: f64,
    pub converges: bool,
    pub order: usize,
    /// `None` when `eta1_norm >= r`.
    pub tail_bound: Option<f64>,
    /// `None` outside synthetic mode; serialized as inapplicable.
    #[serde(serialize_with = "serialize_recon_bound")]
    pub recon_bound: Option<ReconstructionBound>,
    #[serde(rename = "Mcal")]
    pub mcal: Option<f64>,
    pub linearization_residual: Option<f64>,
    pub variant: Variant,
}

fn serialize_recon_bound<S: serde::Serializer>(
    bound: &Option<ReconstructionBound>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    match bound {
        Some(b) => b.serialize(serializer),
        None => {
            let mut st = serializer.serialize_struct("ReconstructionBound", 2)?;
            st.serialize_field("status", "inapplicable")?;
            st.serialize_field("reason", "no ground truth")?;
            st.end()
        }
    }
}

/// Ground truth for synthetic runs: the true contrast and the computed
/// series sum standing in for `eta^(inf)`.
#[derive(Debug, Clone, Copy)]
pub struct Synthetic<'a> {
    pub truth: &'a FieldVector,
    pub series_sum: &'a FieldVector,
}

pub fn build_report<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    phi: &DataVector,
    order: usize,
    variant: Variant,
    synthetic: Option<Synthetic<'_>>,
) -> Result<ConvergenceReport> {
    if phi.len() != family.dim_y() {
        return Err(Error::Dimension {
            expected: family.dim_y(),
            actual: phi.len(),
        });
    }
    let bounds = family.bounds();
    let k1_norm = k1_inv.operator_norm();
    let radius = theorem1_radius(bounds.nu, bounds.mu, k1_norm, variant)?;
    let eta1_norm = family.norm_x(&k1_inv.apply(phi));
    let converges = eta1_norm < radius.r;
    let tail = if converges {
        Some(tail_bound(eta1_norm, radius.r, radius.r0, order)?)
    } else {
        None
    };

    let (recon_bound, mcal, residual) = match synthetic {
        Some(s) => {
            if s.truth.len() != family.dim_x() || s.series_sum.len() != family.dim_x() {
                return Err(Error::Dimension {
                    expected: family.dim_x(),
                    actual: s.truth.len(),
                });
            }
            let mcal = family.norm_x(s.truth).max(family.norm_x(s.series_sum));
            let residual = linearization_residual(family, k1_inv, s.truth);
            let bound = reconstruction_bound(bounds.nu, bounds.mu, k1_norm, mcal, residual)?;
            (Some(bound), Some(mcal), Some(residual))
        }
        None => (None, None, None),
    };

    Ok(ConvergenceReport {
        nu: bounds.nu,
        mu: bounds.mu,
        k1_norm,
        c: radius.c,
        r: radius.r,
        r0: radius.r0,
        m: radius.r0,
        eta1_norm,
        converges,
        order,
        tail_bound: tail,
        recon_bound,
        mcal,
        linearization_residual: residual,
        variant,
    })
}

/// `|(I - K_1^+ K_1) eta|_X`.
pub fn linearization_residual<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    eta: &FieldVector,
) -> f64 {
    let image = family.evaluate(&[eta]);
    let back = k1_inv.apply(&image);
    family.norm_x(&FieldVector(&eta.0 - &back.0))
}

/// Convenience for synthetic runs: recursion to `order`, then the report with
/// `eta^(order)` standing in for the series sum.
pub fn build_synthetic_report<F: OperatorFamily + ?Sized>(
    family: &F,
    k1_inv: &LinearizedInverse,
    phi: &DataVector,
    truth: &FieldVector,
    order: usize,
    variant: Variant,
) -> Result<ConvergenceReport> {
    let coeffs = inverse_coefficients(family, k1_inv, phi, order)?;
    let sum = partial_sums(&coeffs).pop().expect("order >= 1");
    build_report(
        family,
        k1_inv,
        phi,
        order,
        variant,
        Some(Synthetic {
            truth,
            series_sum: &sum,
        }),
    )
}
