//! Run configuration (TOML).

use std::path::{Path, PathBuf};

use ibs::diffuse::{
    assemble_family, build_geometry, DiffuseFamily, GeometryParams, MatrixCache, Point,
};
use ibs::{
    make_random_matrix_family, make_scalar_family, FieldVector, LinearizedInverse, OperatorFamily,
    PseudoinverseConfig, RandomMatrixFamily, ScalarFamily, Variant,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    DiffuseWave,
    Scalar,
    RandomMatrix,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DiffuseWave => "diffuse-wave",
            ModelKind::Scalar => "scalar",
            ModelKind::RandomMatrix => "random-matrix",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default = "default_forward_order")]
    pub forward_order: usize,
    #[serde(default = "default_inverse_order")]
    pub inverse_order: usize,
    /// Raises the cost ceiling of the inverse recursion above 12.
    pub max_inverse_order: Option<usize>,
    #[serde(default)]
    pub variant: Variant,
    pub output_dir: Option<PathBuf>,
    pub diffuse: Option<DiffuseSection>,
    #[serde(default)]
    pub inclusion: Vec<Inclusion>,
    /// Absent: exact inverse for the oracle models, truncated SVD at 1e-3 for diffuse-wave.
    pub pseudoinverse: Option<PseudoinverseConfig>,
    pub scalar: Option<ScalarSection>,
    pub random_matrix: Option<RandomMatrixSection>,
}

fn default_forward_order() -> usize {
    8
}

fn default_inverse_order() -> usize {
    6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseSection {
    pub k: f64,
    pub a: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub voxels_per_axis: usize,
    pub n_sources: usize,
    pub n_detectors: usize,
    #[serde(default)]
    pub coincident: bool,
    pub cache_dir: Option<PathBuf>,
}

/// Ball of constant contrast painted onto every voxel whose center it contains.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inclusion {
    pub center: [f64; 3],
    pub radius: f64,
    pub contrast: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSection {
    pub coefficients: Vec<f64>,
    #[serde(default = "one")]
    pub mu: f64,
    /// True contrast used by `simulate`.
    #[serde(default)]
    pub eta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMatrixSection {
    pub dim_x: usize,
    pub dim_y: usize,
    pub max_order: usize,
    #[serde(default)]
    pub seed: u64,
    /// True contrast used by `simulate`; zeros when absent.
    #[serde(default)]
    pub eta: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate().map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.forward_order == 0 || self.inverse_order == 0 {
            return Err("orders must be at least 1".into());
        }
        if let Some(p) = &self.pseudoinverse {
            p.validate().map_err(|e| e.to_string())?;
        }
        if let Some(i) = self.inclusion.iter().find(|i| !(i.radius > 0.0)) {
            return Err(format!(
                "inclusion radius must be positive, got {}",
                i.radius
            ));
        }
        let section = |present: bool, name: &str| {
            if present {
                Ok(())
            } else {
                Err(format!(
                    "model {} needs a [{name}] table",
                    self.model.name()
                ))
            }
        };
        match self.model {
            ModelKind::DiffuseWave => section(self.diffuse.is_some(), "diffuse"),
            ModelKind::Scalar => section(self.scalar.is_some(), "scalar"),
            ModelKind::RandomMatrix => {
                section(self.random_matrix.is_some(), "random_matrix")?;
                let rm = self.random_matrix.as_ref().unwrap();
                if !rm.eta.is_empty() && rm.eta.len() != rm.dim_x {
                    return Err(format!(
                        "random_matrix.eta needs {} entries, got {}",
                        rm.dim_x,
                        rm.eta.len()
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// A concrete operator family together with the points its components live on.
pub enum Model {
    Diffuse(DiffuseFamily),
    Scalar(ScalarFamily),
    RandomMatrix(RandomMatrixFamily),
}

impl Model {
    pub fn build(config: &RunConfig) -> CliResult<Self> {
        Ok(match config.model {
            ModelKind::DiffuseWave => {
                let d = config.diffuse.as_ref().expect("validated");
                let params = GeometryParams {
                    a: d.a,
                    radius: d.radius,
                    voxels_per_axis: d.voxels_per_axis,
                    n_sources: d.n_sources,
                    n_detectors: d.n_detectors,
                    coincident: d.coincident,
                };
                let family = match &d.cache_dir {
                    Some(dir) => MatrixCache::new(dir).load_or_assemble(params, d.k)?,
                    None => assemble_family(&build_geometry(params)?, d.k)?,
                };
                Model::Diffuse(family)
            }
            ModelKind::Scalar => {
                let s = config.scalar.as_ref().expect("validated");
                Model::Scalar(make_scalar_family(&s.coefficients, s.mu)?)
            }
            ModelKind::RandomMatrix => {
                let r = config.random_matrix.as_ref().expect("validated");
                Model::RandomMatrix(make_random_matrix_family(
                    r.dim_x,
                    r.dim_y,
                    r.max_order,
                    r.seed,
                )?)
            }
        })
    }

    pub fn linearized_inverse(&self, config: &RunConfig) -> CliResult<LinearizedInverse> {
        let family = self.family();
        Ok(match (config.pseudoinverse, self) {
            (Some(p), _) => LinearizedInverse::regularized(family, &p)?,
            (None, Model::Diffuse(_)) => {
                LinearizedInverse::regularized(family, &PseudoinverseConfig::truncated_svd(1e-3))?
            }
            (None, _) => LinearizedInverse::exact(family)?,
        })
    }

    pub fn family(&self) -> &dyn OperatorFamily {
        match self {
            Model::Diffuse(f) => f,
            Model::Scalar(f) => f,
            Model::RandomMatrix(f) => f,
        }
    }

    /// Coordinates of the parameter components; oracle models use the origin.
    pub fn field_points(&self) -> Vec<Point> {
        match self {
            Model::Diffuse(f) => f.geometry().voxel_centers.clone(),
            _ => vec![[0.0; 3]; self.family().dim_x()],
        }
    }

    pub fn true_contrast(&self, config: &RunConfig) -> FieldVector {
        match self {
            Model::Diffuse(_) => FieldVector::from_vec(
                self.field_points()
                    .iter()
                    .map(|z| {
                        config
                            .inclusion
                            .iter()
                            .filter(|i| {
                                let d: f64 = (0..3).map(|a| (z[a] - i.center[a]).powi(2)).sum();
                                d.sqrt() < i.radius
                            })
                            .map(|i| i.contrast)
                            .sum()
                    })
                    .collect(),
            ),
            Model::Scalar(_) => FieldVector::from_vec(vec![config.scalar.as_ref().unwrap().eta]),
            Model::RandomMatrix(f) => {
                let eta = &config.random_matrix.as_ref().unwrap().eta;
                if eta.is_empty() {
                    FieldVector::zeros(f.dim_x())
                } else {
                    FieldVector::from_vec(eta.clone())
                }
            }
        }
    }
}
