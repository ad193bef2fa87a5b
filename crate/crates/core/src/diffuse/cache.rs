//! Flat binary matrix files.
//!
//! Layout: rows and columns as little-endian `u64`, then `rows * cols`
//! little-endian `f64` values in row-major order.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::family::DiffuseFamily;
use super::geometry::{build_geometry, GeometryParams};

pub fn write_matrix(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&(matrix.nrows() as u64).to_le_bytes())?;
    out.write_all(&(matrix.ncols() as u64).to_le_bytes())?;
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            out.write_all(&matrix[(i, j)].to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut input = BufReader::new(fs::File::open(path)?);
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        input.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Io(format!("{}: trailing bytes", path.display())));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Hex SHA-256 of the parameters that determine the kernel matrices.
pub fn cache_key(params: &GeometryParams, k: f64) -> String {
    let canonical = format!(
        "diffuse-v1;k={:?};a={:?};R={:?};vpa={};ns={};nd={};coincident={}",
        k,
        params.a,
        params.radius,
        params.voxels_per_axis,
        params.n_sources,
        params.n_detectors,
        params.coincident
    );
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory of assembled kernel matrices keyed by [`cache_key`].
#[derive(Debug, Clone)]
pub struct MatrixCache {
    dir: PathBuf,
}

impl MatrixCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn paths(&self, key: &str) -> [PathBuf; 3] {
        ["A", "B", "C"].map(|name| self.dir.join(format!("{key}-{name}.bin")))
    }

    /// Loads the family from the cache, assembling and storing it on a miss.
    pub fn load_or_assemble(&self, params: GeometryParams, k: f64) -> Result<DiffuseFamily> {
        let geometry = build_geometry(params)?;
        let key = cache_key(&params, k);
        let [pa, pb, pc] = self.paths(&key);
        if pa.exists() && pb.exists() && pc.exists() {
            let a = read_matrix(&pa)?;
            let b = read_matrix(&pb)?;
            let c = read_matrix(&pc)?;
            return DiffuseFamily::from_parts(geometry, k, a, b, c);
        }
        let family = super::family::assemble_family(&geometry, k)?;
        fs::create_dir_all(&self.dir)?;
        write_matrix(&pa, family.source_matrix())?;
        write_matrix(&pb, family.volume_matrix())?;
        write_matrix(&pc, family.detector_matrix())?;
        Ok(family)
    }
}
