//! `simulate`, `reconstruct` and `analyze`.

use std::path::{Path, PathBuf};

use ibs::{
    build_report, divergence_monitor, forward_series, inverse_coefficients_with, partial_sums,
    theorem1_radius, ConvergenceReport, DataVector, FieldVector, MonitorVerdict, RadiusConstants,
    RecursionOptions, Regularization, SeriesTrend, Synthetic, Variant,
};
use serde::Serialize;

use crate::config::{Model, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io;

/// Relative size of the next term below which the partial sums count as settled.
pub const PLATEAU_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub order: Option<usize>,
    pub variant: Option<Variant>,
    pub allow_divergence: bool,
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub struct SimulateOutput {
    pub data: PathBuf,
    pub sidecar: PathBuf,
    pub truth: PathBuf,
    pub series_parameter: f64,
}

pub fn simulate(
    config: &RunConfig,
    out: &Path,
    overrides: &Overrides,
) -> CliResult<SimulateOutput> {
    let model = Model::build(config)?;
    let family = model.family();
    let eta = model.true_contrast(config);
    let order = overrides.order.unwrap_or(config.forward_order);

    let series_parameter = family.bounds().mu * family.norm_x(&eta);
    if series_parameter >= 1.0 {
        eprintln!("warning: mu |eta| = {series_parameter:.6} >= 1, the forward series may diverge");
        if !overrides.allow_divergence {
            return Err(CliError::Diverging(
                "refusing to simulate with mu |eta| >= 1 without --override-divergence".into(),
            ));
        }
    }
    if matches!(model, Model::Diffuse(_)) && eta.iter().any(|&v| v < -1.0) {
        eprintln!("warning: contrast below -1 makes the absorption negative");
    }

    let phi = forward_series(family, &eta, order)?;
    create_dir(out)?;
    let data = out.join("data.csv");
    let sidecar = io::sidecar_path(&data);
    let truth = io::truth_path(&data);
    io::write_data(&data, &model, &phi)?;
    io::write_sidecar(&sidecar, &model)?;
    io::write_field(&truth, &model.field_points(), &eta)?;
    Ok(SimulateOutput {
        data,
        sidecar,
        truth,
        series_parameter,
    })
}

fn load_data(model: &Model, data: &Path) -> CliResult<DataVector> {
    let sidecar = io::sidecar_path(data);
    if sidecar.exists() {
        io::check_sidecar(&sidecar, model)?;
    } else {
        return Err(CliError::Usage(format!(
            "missing geometry sidecar {}",
            sidecar.display()
        )));
    }
    io::read_data(data, model)
}

/// Smallest `K` whose next term is negligible against `eta^(K)`; the last order otherwise.
pub fn plateau_order(term_norms: &[f64], sum_norms: &[f64]) -> usize {
    (1..term_norms.len())
        .find(|&k| term_norms[k] <= PLATEAU_TOLERANCE * sum_norms[k - 1])
        .unwrap_or(term_norms.len())
}

#[derive(Debug, Serialize)]
pub struct TruthComparison {
    pub errors_by_order: Vec<f64>,
    pub plateau_error: f64,
}

#[derive(Debug, Serialize)]
pub struct ReconstructReport {
    pub model: &'static str,
    pub inverse_order: usize,
    pub regularization: Regularization,
    pub term_norms: Vec<f64>,
    pub partial_sum_norms: Vec<f64>,
    pub monitor: MonitorVerdict,
    pub plateau_order: usize,
    pub convergence: ConvergenceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthComparison>,
}

pub fn reconstruct(
    config: &RunConfig,
    data: &Path,
    out: &Path,
    overrides: &Overrides,
) -> CliResult<ReconstructReport> {
    let model = Model::build(config)?;
    let family = model.family();
    let phi = load_data(&model, data)?;
    let k1_inv = model.linearized_inverse(config)?;
    let order = overrides.order.unwrap_or(config.inverse_order);
    let variant = overrides.variant.unwrap_or(config.variant);
    let options = RecursionOptions {
        max_order: config.max_inverse_order,
        ..Default::default()
    };

    let coeffs = inverse_coefficients_with(family, &k1_inv, &phi, order, &options)?;
    let sums = partial_sums(&coeffs);
    let sum_norms: Vec<f64> = sums.iter().map(|s| family.norm_x(s)).collect();
    let term_norms = coeffs.term_norms().to_vec();
    let plateau = plateau_order(&term_norms, &sum_norms);
    let monitor = divergence_monitor(&coeffs, ibs::inverse::DEFAULT_RATIO_THRESHOLD);

    let truth_file = io::truth_path(data);
    let truth = if truth_file.exists() {
        Some(io::read_field(&truth_file, &model.field_points())?)
    } else {
        None
    };
    let last = sums.last().expect("order >= 1");
    let synthetic = truth.as_ref().map(|t| Synthetic {
        truth: t,
        series_sum: last,
    });
    let convergence = build_report(family, &k1_inv, &phi, order, variant, synthetic)?;
    let comparison = truth.as_ref().map(|t| {
        let errors_by_order: Vec<f64> = sums
            .iter()
            .map(|s| family.norm_x(&FieldVector(&s.0 - &t.0)))
            .collect();
        TruthComparison {
            plateau_error: errors_by_order[plateau - 1],
            errors_by_order,
        }
    });

    create_dir(out)?;
    io::write_reconstruction(
        &out.join("reconstruction.csv"),
        &model.field_points(),
        &sums,
    )?;
    let report = ReconstructReport {
        model: config.model.name(),
        inverse_order: order,
        regularization: k1_inv.regularization().clone(),
        term_norms,
        partial_sum_norms: sum_norms,
        monitor,
        plateau_order: plateau,
        convergence,
        truth: comparison,
    };
    write_json(&out.join("report.json"), &report)?;

    if report.monitor.trend == SeriesTrend::Diverging {
        eprintln!(
            "warning: inverse series terms grow (ratio {:.4}); partial sums are not meaningful",
            report.monitor.ratio
        );
        if !overrides.allow_divergence {
            return Err(CliError::Diverging(
                "inverse series diverging; outputs written, rerun with --override-divergence to accept".into(),
            ));
        }
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct VariantConstants {
    pub theorem: RadiusConstants,
    pub proposition: RadiusConstants,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub model: &'static str,
    pub nu: f64,
    pub mu: f64,
    pub k1_norm: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub r: f64,
    pub r0: f64,
    pub constants_by_variant: VariantConstants,
    pub regularization: Regularization,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta1_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converges: Option<bool>,
}

pub fn analyze(
    config: &RunConfig,
    data: Option<&Path>,
    overrides: &Overrides,
) -> CliResult<AnalyzeReport> {
    let model = Model::build(config)?;
    let family = model.family();
    let k1_inv = model.linearized_inverse(config)?;
    let bounds = family.bounds();
    let k1_norm = k1_inv.operator_norm();
    let variant = overrides.variant.unwrap_or(config.variant);
    let radius = |v| theorem1_radius(bounds.nu, bounds.mu, k1_norm, v);
    let selected = radius(variant)?;
    let (eta1_norm, converges) = match data {
        Some(path) => {
            let phi = load_data(&model, path)?;
            let eta1 = family.norm_x(&k1_inv.apply(&phi));
            (Some(eta1), Some(eta1 < selected.r))
        }
        None => (None, None),
    };
    Ok(AnalyzeReport {
        model: config.model.name(),
        nu: bounds.nu,
        mu: bounds.mu,
        k1_norm,
        c: selected.c,
        r: selected.r,
        r0: selected.r0,
        constants_by_variant: VariantConstants {
            theorem: radius(Variant::Theorem)?,
            proposition: radius(Variant::Proposition)?,
        },
        regularization: k1_inv.regularization().clone(),
        eta1_norm,
        converges,
    })
}
