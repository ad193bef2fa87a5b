use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::geometry::{distance, Point};

/// `exp(-k|x-y|) / (4 pi |x-y|)`.
pub fn green(k: f64, x: &Point, y: &Point) -> Result<f64> {
    let d = distance(x, y);
    if d == 0.0 {
        return Err(Error::Singular);
    }
    Ok(green_unchecked(k, d))
}

/// Green's function at distance `d > 0`.
#[inline]
pub fn green_unchecked(k: f64, d: f64) -> f64 {
    (-k * d).exp() / (4.0 * PI * d)
}
