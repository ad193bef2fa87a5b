//! The linearized inverse `K_1^+` in weighted inner products.
//!
//! With `W_x`, `W_y` the diagonal weight matrices, the weighted operator is
//! `K_w = W_y^{1/2} K_1 W_x^{-1/2}`. Singular values and the filtered inverse
//! are computed for `K_w`, then mapped back:
//! `K_1^+ = W_x^{-1/2} K_w^+ W_y^{1/2}`. Operator norms reported here are
//! therefore norms between the weighted spaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{DataVector, FieldVector, OperatorFamily};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudoinverseMethod {
    TruncatedSvd,
    Tikhonov,
}

/// Regularization of the pseudoinverse.
///
/// `parameter` is the relative cutoff `tau` in `(0, 1]` for truncated SVD
/// (singular values `>= tau * sigma_max` are kept) or `lambda > 0` for
/// Tikhonov (filter `sigma / (sigma^2 + lambda^2)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoinverseConfig {
    pub method: PseudoinverseMethod,
    pub parameter: f64,
}

impl PseudoinverseConfig {
    pub fn truncated_svd(tau: f64) -> Self {
        Self {
            method: PseudoinverseMethod::TruncatedSvd,
            parameter: tau,
        }
    }

    pub fn tikhonov(lambda: f64) -> Self {
        Self {
            method: PseudoinverseMethod::Tikhonov,
            parameter: lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            PseudoinverseMethod::TruncatedSvd => self.parameter > 0.0 && self.parameter <= 1.0,
            PseudoinverseMethod::Tikhonov => self.parameter > 0.0 && self.parameter.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad {:?} parameter {}",
                self.method, self.parameter
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Regularization {
    Exact,
    TruncatedSvd { tau: f64, kept_rank: usize },
    Tikhonov { lambda: f64 },
}

/// `K_1^+` as a dense `dim_x x dim_y` matrix.
#[derive(Debug, Clone)]
pub struct LinearizedInverse {
    matrix: DMatrix<f64>,
    operator_norm: f64,
    regularization: Regularization,
    singular_values: Vec<f64>,
}

fn weighted_operator(k1: &DMatrix<f64>, weights_x: &[f64], weights_y: &[f64]) -> DMatrix<f64> {
    let mut kw = k1.clone();
    for (j, w) in weights_x.iter().enumerate() {
        kw.column_mut(j).scale_mut(1.0 / w.sqrt());
    }
    for (i, w) in weights_y.iter().enumerate() {
        kw.row_mut(i).scale_mut(w.sqrt());
    }
    kw
}

fn unweight_inverse(
    mut inverse_w: DMatrix<f64>,
    weights_x: &[f64],
    weights_y: &[f64],
) -> DMatrix<f64> {
    for (i, w) in weights_x.iter().enumerate() {
        inverse_w.row_mut(i).scale_mut(1.0 / w.sqrt());
    }
    for (j, w) in weights_y.iter().enumerate() {
        inverse_w.column_mut(j).scale_mut(w.sqrt());
    }
    inverse_w
}

fn check_shape(k1: &DMatrix<f64>, weights_x: &[f64], weights_y: &[f64]) -> Result<()> {
    if k1.ncols() != weights_x.len() {
        return Err(Error::Dimension {
            expected: weights_x.len(),
            actual: k1.ncols(),
        });
    }
    if k1.nrows() != weights_y.len() {
        return Err(Error::Dimension {
            expected: weights_y.len(),
            actual: k1.nrows(),
        });
    }
    if weights_x.iter().chain(weights_y).any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }
    Ok(())
}

impl LinearizedInverse {
    /// Exact inverse of a square invertible `K_1`.
    pub fn exact<F: OperatorFamily + ?Sized>(family: &F) -> Result<Self> {
        Self::exact_from_matrix(
            &family.linear_matrix(),
            family.weights_x(),
            family.weights_y(),
        )
    }

    pub fn exact_from_matrix(
        k1: &DMatrix<f64>,
        weights_x: &[f64],
        weights_y: &[f64],
    ) -> Result<Self> {
        check_shape(k1, weights_x, weights_y)?;
        if !k1.is_square() {
            return Err(Error::NonInvertibleLinearization(format!(
                "K_1 is {}x{}, not square",
                k1.nrows(),
                k1.ncols()
            )));
        }
        let matrix = k1
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::NonInvertibleLinearization("K_1 is singular".into()))?;
        let mut singular_values: Vec<f64> = weighted_operator(k1, weights_x, weights_y)
            .singular_values()
            .iter()
            .copied()
            .collect();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        let smallest = *singular_values.last().unwrap();
        if !(smallest > 0.0) {
            return Err(Error::NonInvertibleLinearization("K_1 is singular".into()));
        }
        Ok(Self {
            matrix,
            operator_norm: 1.0 / smallest,
            regularization: Regularization::Exact,
            singular_values,
        })
    }

    /// Regularized pseudoinverse of the family's `K_1`.
    pub fn regularized<F: OperatorFamily + ?Sized>(
        family: &F,
        config: &PseudoinverseConfig,
    ) -> Result<Self> {
        Self::regularized_from_matrix(
            &family.linear_matrix(),
            family.weights_x(),
            family.weights_y(),
            config,
        )
    }

    /// Filtered pseudoinverse built from the eigendecomposition of the weighted
    /// normal matrix `K_w^T K_w = V diag(sigma^2) V^T`, using
    /// `K_w^+ = V diag(g(sigma) / sigma) V^T K_w^T` with `g` the filter.
    pub fn regularized_from_matrix(
        k1: &DMatrix<f64>,
        weights_x: &[f64],
        weights_y: &[f64],
        config: &PseudoinverseConfig,
    ) -> Result<Self> {
        check_shape(k1, weights_x, weights_y)?;
        config.validate()?;
        let kw = weighted_operator(k1, weights_x, weights_y);
        if kw.amax() == 0.0 {
            return Err(Error::NonInvertibleLinearization(
                "K_1 is identically zero".into(),
            ));
        }
        let gram = kw.tr_mul(&kw);
        let eigen = SymmetricEigen::new(gram);
        let sigma: Vec<f64> = eigen
            .eigenvalues
            .iter()
            .map(|&l| l.max(0.0).sqrt())
            .collect();
        let sigma_max = sigma.iter().fold(0.0_f64, |a, &s| a.max(s));

        // per-direction factor g(sigma)/sigma applied in the right singular basis
        let (factors, filtered, regularization): (Vec<f64>, Vec<f64>, Regularization) =
            match config.method {
                PseudoinverseMethod::TruncatedSvd => {
                    let cutoff = config.parameter * sigma_max;
                    let keep = |s: f64| s > 0.0 && s >= cutoff;
                    let factors = sigma
                        .iter()
                        .map(|&s| if keep(s) { 1.0 / (s * s) } else { 0.0 })
                        .collect();
                    let filtered = sigma
                        .iter()
                        .map(|&s| if keep(s) { 1.0 / s } else { 0.0 })
                        .collect();
                    let kept_rank = sigma.iter().filter(|&&s| keep(s)).count();
                    (
                        factors,
                        filtered,
                        Regularization::TruncatedSvd {
                            tau: config.parameter,
                            kept_rank,
                        },
                    )
                }
                PseudoinverseMethod::Tikhonov => {
                    let l2 = config.parameter * config.parameter;
                    let factors = sigma.iter().map(|&s| 1.0 / (s * s + l2)).collect();
                    let filtered = sigma.iter().map(|&s| s / (s * s + l2)).collect();
                    (
                        factors,
                        filtered,
                        Regularization::Tikhonov {
                            lambda: config.parameter,
                        },
                    )
                }
            };

        let v = &eigen.eigenvectors;
        let mut scaled_v = v.clone();
        for (j, f) in factors.iter().enumerate() {
            scaled_v.column_mut(j).scale_mut(*f);
        }
        let inverse_w = (scaled_v * v.transpose()) * kw.transpose();
        let operator_norm = filtered.iter().fold(0.0_f64, |a, &g| a.max(g));
        let mut singular_values = sigma;
        singular_values.sort_by(|a, b| b.total_cmp(a));

        Ok(Self {
            matrix: unweight_inverse(inverse_w, weights_x, weights_y),
            operator_norm,
            regularization,
            singular_values,
        })
    }

    pub fn apply(&self, phi: &DataVector) -> FieldVector {
        FieldVector(&self.matrix * &phi.0)
    }

    pub fn apply_raw(&self, phi: &DVector<f64>) -> DVector<f64> {
        &self.matrix * phi
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `|K_1^+|` between the weighted spaces.
    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }

    pub fn regularization(&self) -> &Regularization {
        &self.regularization
    }

    /// Weighted singular values of `K_1`, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn dim_x(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim_y(&self) -> usize {
        self.matrix.ncols()
    }
}
