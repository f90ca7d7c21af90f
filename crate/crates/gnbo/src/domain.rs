//! Box domains for search spaces.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{GnboError, Result};

/// Axis-aligned box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(GnboError::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(GnboError::InvalidConfig("bounds require lower < upper elementwise".into()));
        }
        Ok(Bounds { lower, upper })
    }

    /// Cube `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Bounds::new(vec![lo; dim], vec![hi; dim]).expect("valid cube bounds")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(k, &v)| v >= self.lower[k] && v <= self.upper[k])
    }

    /// Map a unit-cube point into the box.
    pub fn from_unit(&self, u: &[f64]) -> Array1<f64> {
        Array1::from_iter(
            u.iter().enumerate().map(|(k, &v)| self.lower[k] + v * self.width(k)),
        )
    }

    /// Map a point in the box to the unit cube.
    pub fn to_unit(&self, x: &[f64]) -> Array1<f64> {
        Array1::from_iter(
            x.iter().enumerate().map(|(k, &v)| (v - self.lower[k]) / self.width(k)),
        )
    }

    /// Clamp onto the box.
    pub fn project(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
    }
}
