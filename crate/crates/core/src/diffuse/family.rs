use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linearized::{LinearizedInverse, PseudoinverseConfig};
use crate::series::{BoundConstants, DataVector, FieldVector, OperatorFamily};

use super::bounds::DEFAULT_QUADRATURE_SLACK;
use super::geometry::{distance, Geometry, Point};
use super::green::green_unchecked;

pub const DEFAULT_DIFFUSE_MAX_ORDER: usize = 16;

/// Midpoint-rule discretization of the diffuse-wave forward operators.
///
/// `A[s, j] = G(x_s, z_j)`, `B[i, j] = G(z_i, z_j)` with the self-term on the
/// diagonal, `C[j, d] = G(z_j, y_d)`. Data are ordered source-major:
/// entry `s * n_detectors + d`.
#[derive(Debug, Clone)]
pub struct DiffuseFamily {
    k: f64,
    geometry: Geometry,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    max_order: usize,
    bounds: BoundConstants,
    weights_x: Vec<f64>,
    weights_y: Vec<f64>,
}

/// Cell average of `G(z, .)` over the sphere of volume `h^3` centred at `z`:
/// `[1 - exp(-k rho)(1 + k rho)] / (k^2 h^3)` with `rho = (3 h^3 / 4 pi)^{1/3}`.
pub fn self_term(k: f64, h: f64) -> f64 {
    let volume = h.powi(3);
    let rho = (3.0 * volume / (4.0 * PI)).cbrt();
    let x = k * rho;
    if x < 1e-3 {
        // 1 - e^{-x}(1+x) = x^2/2 - x^3/3 + x^4/8 - x^5/30 + ...
        rho * rho / (2.0 * volume) * (1.0 - 2.0 * x / 3.0 + x * x / 4.0 - x.powi(3) / 15.0)
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (k * k * volume)
    }
}

fn kernel_matrix(rows: &[Point], cols: &[Point], k: f64) -> DMatrix<f64> {
    let data: Vec<f64> = cols
        .par_iter()
        .flat_map_iter(|col| {
            rows.iter()
                .map(move |row| green_unchecked(k, distance(row, col)))
        })
        .collect();
    DMatrix::from_vec(rows.len(), cols.len(), data)
}

/// `(nu, mu)` of the diffuse-wave growth estimate:
/// `nu = k^2 |B_a|^{1/2} R/(16 pi a) log((R^2+a^2)/(R^2-a^2))`, `mu = k^2 sqrt(a/(4 pi))`.
pub fn nu_mu_constants(k: f64, a: f64, radius: f64) -> Result<(f64, f64)> {
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "k must be nonnegative, got {k}"
        )));
    }
    if !(a > 0.0) || !(radius > a) {
        return Err(Error::Geometry(format!(
            "need R > a > 0 (got R = {radius}, a = {a})"
        )));
    }
    let ball_volume = 4.0 * PI * a.powi(3) / 3.0;
    let surface = radius / (16.0 * PI * a)
        * ((radius * radius + a * a) / (radius * radius - a * a))
            .ln()
            .abs();
    let nu = k * k * ball_volume.sqrt() * surface;
    let mu = k * k * (a / (4.0 * PI)).sqrt();
    Ok((nu, mu))
}

pub fn assemble_family(geometry: &Geometry, k: f64) -> Result<DiffuseFamily> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "k must be nonnegative, got {k}"
        )));
    }
    let a = kernel_matrix(&geometry.sources, &geometry.voxel_centers, k);
    let mut b = kernel_matrix(&geometry.voxel_centers, &geometry.voxel_centers, k);
    let diag = self_term(k, geometry.h);
    for i in 0..b.nrows() {
        b[(i, i)] = diag;
    }
    let c = kernel_matrix(&geometry.voxel_centers, &geometry.detectors, k);
    DiffuseFamily::from_parts(geometry.clone(), k, a, b, c)
}

impl DiffuseFamily {
    pub(crate) fn from_parts(
        geometry: Geometry,
        k: f64,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Result<Self> {
        let (nv, ns, nd) = (
            geometry.n_voxels(),
            geometry.sources.len(),
            geometry.detectors.len(),
        );
        if a.shape() != (ns, nv) || b.shape() != (nv, nv) || c.shape() != (nv, nd) {
            return Err(Error::Dimension {
                expected: ns * nv + nv * nv + nv * nd,
                actual: a.len() + b.len() + c.len(),
            });
        }
        let (nu, mu) = nu_mu_constants(k, geometry.a(), geometry.radius())?;
        let weights_x = vec![geometry.voxel_weight(); nv];
        let weights_y = vec![geometry.source_weight * geometry.detector_weight; ns * nd];
        Ok(Self {
            k,
            geometry,
            a,
            b,
            c,
            max_order: DEFAULT_DIFFUSE_MAX_ORDER,
            bounds: BoundConstants {
                nu,
                mu,
                slack: DEFAULT_QUADRATURE_SLACK,
            },
            weights_x,
            weights_y,
        })
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order.max(1);
        self
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn source_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn volume_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn detector_matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Sources x detectors matrix of `K_m(args)`.
    pub fn apply_matrix(&self, args: &[&FieldVector]) -> DMatrix<f64> {
        let order = args.len();
        let vw = self.geometry.voxel_weight();
        let scale_columns = |w: &mut DMatrix<f64>, eta: &FieldVector| {
            for (j, mut col) in w.column_iter_mut().enumerate() {
                col *= vw * eta[j];
            }
        };
        let mut w = self.a.clone();
        scale_columns(&mut w, args[0]);
        for eta in &args[1..] {
            w = &w * &self.b;
            scale_columns(&mut w, eta);
        }
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        let prefactor = sign * self.k.powi(2 * order as i32);
        (w * &self.c) * prefactor
    }

    /// Data vector to sources x detectors matrix.
    pub fn data_matrix(&self, data: &DataVector) -> DMatrix<f64> {
        let nd = self.geometry.detectors.len();
        DMatrix::from_fn(self.geometry.sources.len(), nd, |s, d| data[s * nd + d])
    }

    fn flatten(&self, m: &DMatrix<f64>) -> DataVector {
        let (ns, nd) = m.shape();
        DataVector::from_vec((0..ns * nd).map(|i| m[(i / nd, i % nd)]).collect())
    }
}

impl OperatorFamily for DiffuseFamily {
    fn dim_x(&self) -> usize {
        self.geometry.n_voxels()
    }
    fn dim_y(&self) -> usize {
        self.geometry.sources.len() * self.geometry.detectors.len()
    }
    fn max_order(&self) -> usize {
        self.max_order
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
        self.flatten(&self.apply_matrix(args))
    }

    /// `K_1[(s, d), j] = k^2 h^3 A[s, j] C[j, d]`.
    fn linear_matrix(&self) -> DMatrix<f64> {
        let nd = self.geometry.detectors.len();
        let scale = self.k * self.k * self.geometry.voxel_weight();
        DMatrix::from_fn(self.dim_y(), self.dim_x(), |row, j| {
            scale * self.a[(row / nd, j)] * self.c[(j, row % nd)]
        })
    }
}

/// Weighted regularized pseudoinverse of the diffuse-wave `K_1`.
pub fn k1_pseudoinverse(
    family: &DiffuseFamily,
    config: &PseudoinverseConfig,
) -> Result<LinearizedInverse> {
    LinearizedInverse::regularized(family, config)
}
