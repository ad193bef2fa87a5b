//! CSV files exchanged between subcommands.

use std::path::{Path, PathBuf};

use ibs::diffuse::Point;
use ibs::{DataVector, FieldVector};
use serde::{Deserialize, Serialize};

use crate::config::Model;
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize, Deserialize)]
struct DataRow {
    source_index: usize,
    detector_index: usize,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRow {
    pub kind: String,
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EtaRow {
    x: f64,
    y: f64,
    z: f64,
    eta: f64,
}

/// `data.csv` -> `data.geometry.csv`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let stem = data.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    data.with_file_name(format!("{stem}.geometry.csv"))
}

pub fn truth_path(data: &Path) -> PathBuf {
    data.with_file_name("eta_true.csv")
}

fn writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::io(path, e))
}

/// Shape of the data: (rows, columns) of the source x detector table.
fn data_shape(model: &Model) -> (usize, usize) {
    match model {
        Model::Diffuse(f) => (f.geometry().sources.len(), f.geometry().detectors.len()),
        _ => (model.family().dim_y(), 1),
    }
}

pub fn write_data(path: &Path, model: &Model, phi: &DataVector) -> CliResult<()> {
    let (_, nd) = data_shape(model);
    let mut w = writer(path)?;
    for (i, value) in phi.iter().enumerate() {
        w.serialize(DataRow {
            source_index: i / nd,
            detector_index: i % nd,
            value: *value,
        })
        .map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_data(path: &Path, model: &Model) -> CliResult<DataVector> {
    let (ns, nd) = data_shape(model);
    let rows: Vec<DataRow> = read_rows(path)?;
    if rows.len() != ns * nd {
        return Err(CliError::Usage(format!(
            "{}: expected {} data rows for this configuration, found {}",
            path.display(),
            ns * nd,
            rows.len()
        )));
    }
    let mut values = vec![0.0; ns * nd];
    let mut seen = vec![false; ns * nd];
    for row in rows {
        if row.source_index >= ns || row.detector_index >= nd {
            return Err(CliError::Usage(format!(
                "{}: index ({}, {}) outside {ns} x {nd}",
                path.display(),
                row.source_index,
                row.detector_index
            )));
        }
        let i = row.source_index * nd + row.detector_index;
        if std::mem::replace(&mut seen[i], true) {
            return Err(CliError::Usage(format!(
                "{}: duplicate entry ({}, {})",
                path.display(),
                row.source_index,
                row.detector_index
            )));
        }
        values[i] = row.value;
    }
    Ok(DataVector::from_vec(values))
}

pub fn sidecar_rows(model: &Model) -> Vec<SidecarRow> {
    let rows = |kind: &str, points: &[Point]| -> Vec<SidecarRow> {
        points
            .iter()
            .enumerate()
            .map(|(index, p)| SidecarRow {
                kind: kind.into(),
                index,
                x: p[0],
                y: p[1],
                z: p[2],
            })
            .collect()
    };
    match model {
        Model::Diffuse(f) => {
            let g = f.geometry();
            let mut out = rows("source", &g.sources);
            out.extend(rows("detector", &g.detectors));
            out.extend(rows("voxel", &g.voxel_centers));
            out
        }
        _ => {
            let family = model.family();
            let mut out = rows("parameter", &vec![[0.0; 3]; family.dim_x()]);
            out.extend(rows("datum", &vec![[0.0; 3]; family.dim_y()]));
            out
        }
    }
}

pub fn write_sidecar(path: &Path, model: &Model) -> CliResult<()> {
    let mut w = writer(path)?;
    for row in sidecar_rows(model) {
        w.serialize(row).map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

/// Checks that the data were produced for the same geometry as `model`.
pub fn check_sidecar(path: &Path, model: &Model) -> CliResult<()> {
    let found: Vec<SidecarRow> = read_rows(path)?;
    let expected = sidecar_rows(model);
    let mismatch = |detail: String| {
        CliError::Usage(format!(
            "{}: geometry mismatch with config: {detail}",
            path.display()
        ))
    };
    if found.len() != expected.len() {
        return Err(mismatch(format!(
            "{} points, expected {}",
            found.len(),
            expected.len()
        )));
    }
    for (f, e) in found.iter().zip(&expected) {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
        if f.kind != e.kind
            || f.index != e.index
            || !(close(f.x, e.x) && close(f.y, e.y) && close(f.z, e.z))
        {
            return Err(mismatch(format!("{} {} differs", e.kind, e.index)));
        }
    }
    Ok(())
}

pub fn write_field(path: &Path, points: &[Point], eta: &FieldVector) -> CliResult<()> {
    let mut w = writer(path)?;
    for (p, v) in points.iter().zip(eta.iter()) {
        w.serialize(EtaRow {
            x: p[0],
            y: p[1],
            z: p[2],
            eta: *v,
        })
        .map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_field(path: &Path, points: &[Point]) -> CliResult<FieldVector> {
    let rows: Vec<EtaRow> = read_rows(path)?;
    if rows.len() != points.len() {
        return Err(CliError::Usage(format!(
            "{}: expected {} values, found {}",
            path.display(),
            points.len(),
            rows.len()
        )));
    }
    Ok(FieldVector::from_vec(rows.iter().map(|r| r.eta).collect()))
}

/// `index,x,y,z,order_1,...,order_K`.
pub fn write_reconstruction(path: &Path, points: &[Point], sums: &[FieldVector]) -> CliResult<()> {
    let mut w = writer(path)?;
    let mut header = vec!["index".to_string(), "x".into(), "y".into(), "z".into()];
    header.extend((1..=sums.len()).map(|k| format!("order_{k}")));
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for (j, p) in points.iter().enumerate() {
        let mut record = vec![
            j.to_string(),
            p[0].to_string(),
            p[1].to_string(),
            p[2].to_string(),
        ];
        record.extend(sums.iter().map(|s| s[j].to_string()));
        w.write_record(&record).map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}
