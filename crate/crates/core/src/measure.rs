//! Probability and signed measures on the spatial lattice.
//!
//! A measure is stored through its density against the trapezoid weights, so
//! the mass at node `j` is `density[j] * w[j]`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::grid::Grid;

pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    density: Array1<f64>,
}

impl GridMeasure {
    /// Checks non-negativity and unit mass.
    pub fn new(grid: &Grid, density: Array1<f64>) -> Result<Self> {
        grid.check_len(density.len())?;
        if let Some(v) = density.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(MfgError::InvalidMeasure(format!("density value {v}")));
        }
        let mass = grid.integrate(density.view());
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(MfgError::InvalidMeasure(format!("mass {mass} differs from 1")));
        }
        Ok(Self { density })
    }

    /// Wraps solver output without re-checking it.
    pub(crate) fn from_raw(density: Array1<f64>) -> Self {
        Self { density }
    }

    /// Rescales a non-negative density to unit mass.
    pub fn normalized(grid: &Grid, values: Array1<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(MfgError::InvalidMeasure(format!("density value {v}")));
        }
        let mass = grid.integrate(values.view());
        if mass <= 0.0 {
            return Err(MfgError::InvalidMeasure("zero mass".into()));
        }
        Ok(Self {
            density: values / mass,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::normalized(grid, grid.nodes().mapv(f))
    }

    pub fn uniform(grid: &Grid) -> Self {
        Self {
            density: Array1::ones(grid.n_x()),
        }
    }

    /// Unit point mass at node `j`.
    pub fn delta(grid: &Grid, j: usize) -> Result<Self> {
        if j >= grid.n_x() {
            return Err(MfgError::InvalidMeasure(format!("node {j} outside grid")));
        }
        let mut density = Array1::zeros(grid.n_x());
        density[j] = 1.0 / grid.weights()[j];
        Ok(Self { density })
    }

    /// `(1 - s) * self + s * other`.
    pub fn mix(&self, other: &GridMeasure, s: f64) -> Result<Self> {
        if self.density.len() != other.density.len() {
            return Err(MfgError::GridMismatch {
                expected: self.density.len(),
                found: other.density.len(),
            });
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(MfgError::InvalidInput(format!("mixing weight {s}")));
        }
        Ok(Self {
            density: &self.density * (1.0 - s) + &other.density * s,
        })
    }

    pub fn density(&self) -> ArrayView1<'_, f64> {
        self.density.view()
    }

    pub fn into_density(self) -> Array1<f64> {
        self.density
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn mass(&self, grid: &Grid) -> f64 {
        grid.integrate(self.density.view())
    }

    pub fn masses(&self, grid: &Grid) -> Array1<f64> {
        &self.density * grid.weights()
    }

    pub fn signed_difference(&self, other: &GridMeasure) -> SignedGridMeasure {
        SignedGridMeasure {
            density: &self.density - &other.density,
        }
    }
}

/// Signed measure, typically a difference of two probability measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedGridMeasure {
    density: Array1<f64>,
}

impl SignedGridMeasure {
    pub fn new(grid: &Grid, density: Array1<f64>) -> Result<Self> {
        grid.check_len(density.len())?;
        if density.iter().any(|v| !v.is_finite()) {
            return Err(MfgError::InvalidMeasure("non-finite density".into()));
        }
        Ok(Self { density })
    }

    /// Point mass `weight` at node `j`.
    pub fn atom(grid: &Grid, j: usize, weight: f64) -> Result<Self> {
        if j >= grid.n_x() {
            return Err(MfgError::InvalidMeasure(format!("node {j} outside grid")));
        }
        let mut density = Array1::zeros(grid.n_x());
        density[j] = weight / grid.weights()[j];
        Ok(Self { density })
    }

    pub fn density(&self) -> ArrayView1<'_, f64> {
        self.density.view()
    }

    pub fn into_density(self) -> Array1<f64> {
        self.density
    }

    pub fn mass(&self, grid: &Grid) -> f64 {
        grid.integrate(self.density.view())
    }
}

impl From<GridMeasure> for SignedGridMeasure {
    fn from(m: GridMeasure) -> Self {
        Self { density: m.density }
    }
}
