use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::grid::Grid;
use crate::stencil;

/// Diffusion coefficient `a(x)` sampled at nodes, with its face averages and
/// the drift correction `b~ = a'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticCoefficient {
    values: Array1<f64>,
    faces: Array1<f64>,
    slope: Array1<f64>,
    lambda: f64,
    mu: f64,
}

impl EllipticCoefficient {
    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        Self::build(grid, Array1::from_elem(grid.n_x(), value), Array1::zeros(grid.n_x()))
    }

    /// `a(x) = a0 + a1 * x`.
    pub fn affine(grid: &Grid, a0: f64, a1: f64) -> Result<Self> {
        let values = grid.nodes().mapv(|x| a0 + a1 * x);
        Self::build(grid, values, Array1::from_elem(grid.n_x(), a1))
    }

    /// Tabulated nodal values; the slope is taken by finite differences.
    pub fn from_values(grid: &Grid, values: Array1<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        let slope = stencil::gradient(values.view(), grid.dx());
        Self::build(grid, values, slope)
    }

    fn build(grid: &Grid, values: Array1<f64>, slope: Array1<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MfgError::InvalidModel("non-finite diffusion coefficient".into()));
        }
        let lambda = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mu = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lambda <= 0.0 {
            return Err(MfgError::InvalidModel(format!(
                "diffusion coefficient not elliptic: min a = {lambda}"
            )));
        }
        let n = values.len();
        let faces = Array1::from_shape_fn(n - 1, |j| 0.5 * (values[j] + values[j + 1]));
        Ok(Self {
            values,
            faces,
            slope,
            lambda,
            mu,
        })
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    /// `a` at the midpoints `x_{j + 1/2}`.
    pub fn faces(&self) -> ArrayView1<'_, f64> {
        self.faces.view()
    }

    /// Drift correction `b~ = a'`.
    pub fn slope(&self) -> ArrayView1<'_, f64> {
        self.slope.view()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn max_slope(&self) -> f64 {
        self.slope.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
