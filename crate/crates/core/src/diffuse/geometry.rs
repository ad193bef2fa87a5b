use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

pub(crate) fn distance(x: &Point, y: &Point) -> f64 {
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

pub(crate) fn norm(x: &Point) -> f64 {
    distance(x, &[0.0; 3])
}

/// Inputs of [`build_geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Radius of the ball containing the contrast.
    pub a: f64,
    /// Radius of the measurement sphere.
    #[serde(rename = "R")]
    pub radius: f64,
    pub voxels_per_axis: usize,
    pub n_sources: usize,
    pub n_detectors: usize,
    /// Place detectors on the same points as the sources.
    #[serde(default)]
    pub coincident: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub params: GeometryParams,
    pub voxel_centers: Vec<Point>,
    /// Voxel side length.
    pub h: f64,
    pub sources: Vec<Point>,
    pub detectors: Vec<Point>,
    pub source_weight: f64,
    pub detector_weight: f64,
}

impl Geometry {
    pub fn a(&self) -> f64 {
        self.params.a
    }

    pub fn radius(&self) -> f64 {
        self.params.radius
    }

    pub fn voxel_weight(&self) -> f64 {
        self.h.powi(3)
    }

    pub fn n_voxels(&self) -> usize {
        self.voxel_centers.len()
    }

    /// `|B_a| = 4 pi a^3 / 3`.
    pub fn ball_volume(&self) -> f64 {
        4.0 * PI * self.params.a.powi(3) / 3.0
    }
}

/// `count` near-uniform points on the sphere of radius `radius`, rotated
/// about the z axis by `azimuth`.
pub fn fibonacci_sphere(count: usize, radius: f64, azimuth: f64) -> Vec<Point> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let ring = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden * i as f64 + azimuth;
            let p = [ring * theta.cos(), ring * theta.sin(), z];
            // renormalize so |p| = radius to rounding
            let len = norm(&p);
            [
                radius * p[0] / len,
                radius * p[1] / len,
                radius * p[2] / len,
            ]
        })
        .collect()
}

pub fn build_geometry(params: GeometryParams) -> Result<Geometry> {
    let GeometryParams {
        a,
        radius,
        voxels_per_axis,
        n_sources,
        n_detectors,
        coincident,
    } = params;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Geometry(format!(
            "ball radius must be positive, got {a}"
        )));
    }
    if !(radius > a) || !radius.is_finite() {
        return Err(Error::Geometry(format!(
            "measurement radius {radius} must exceed ball radius {a}"
        )));
    }
    if voxels_per_axis < 2 {
        return Err(Error::Geometry("need at least 2 voxels per axis".into()));
    }
    if n_sources == 0 || n_detectors == 0 {
        return Err(Error::Geometry(
            "need at least one source and one detector".into(),
        ));
    }
    if coincident && n_sources != n_detectors {
        return Err(Error::Geometry(
            "coincident sources and detectors need equal counts".into(),
        ));
    }

    let h = 2.0 * a / voxels_per_axis as f64;
    let coord = |i: usize| -a + (i as f64 + 0.5) * h;
    let mut voxel_centers = Vec::new();
    for ix in 0..voxels_per_axis {
        for iy in 0..voxels_per_axis {
            for iz in 0..voxels_per_axis {
                let p = [coord(ix), coord(iy), coord(iz)];
                if norm(&p) < a {
                    voxel_centers.push(p);
                }
            }
        }
    }

    let sources = fibonacci_sphere(n_sources, radius, 0.0);
    let detectors = if coincident {
        sources.clone()
    } else {
        fibonacci_sphere(n_detectors, radius, PI)
    };
    let area = 4.0 * PI * radius * radius;
    Ok(Geometry {
        params,
        voxel_centers,
        h,
        sources,
        detectors,
        source_weight: area / n_sources as f64,
        detector_weight: area / n_detectors as f64,
    })
}
