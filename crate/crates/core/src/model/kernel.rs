use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::grid::Grid;
use crate::measure::GridMeasure;

/// Nonlocal coupling `F(x, m) = int k(x, y) dm(y)` sampled on the lattice,
/// `values[[i, j]] = k(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingKernel {
    values: Array2<f64>,
    cos_coeffs: Option<Vec<f64>>,
}

impl CouplingKernel {
    /// `k(x, y) = sum_n c_n cos(n pi x) cos(n pi y)`.
    pub fn from_cosine(grid: &Grid, coeffs: &[f64]) -> Self {
        let x = grid.nodes();
        let n = grid.n_x();
        let modes: Vec<Array1<f64>> = (0..coeffs.len())
            .map(|k| x.mapv(|x| (k as f64 * PI * x).cos()))
            .collect();
        let values = Array2::from_shape_fn((n, n), |(i, j)| {
            coeffs
                .iter()
                .zip(&modes)
                .map(|(c, m)| c * m[i] * m[j])
                .sum()
        });
        Self {
            values,
            cos_coeffs: Some(coeffs.to_vec()),
        }
    }

    pub fn from_fn(grid: &Grid, k: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n_x();
        let values = Array2::from_shape_fn((n, n), |(i, j)| k(grid.x(i), grid.x(j)));
        Self {
            values,
            cos_coeffs: None,
        }
    }

    pub fn from_values(grid: &Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n_x(), grid.n_x()) {
            return Err(MfgError::GridMismatch {
                expected: grid.n_x(),
                found: values.nrows(),
            });
        }
        Ok(Self {
            values,
            cos_coeffs: None,
        })
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::from_cosine(grid, &[])
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn cos_coeffs(&self) -> Option<&[f64]> {
        self.cos_coeffs.as_deref()
    }

    pub fn n_x(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// `x -> sum_j k(x, x_j) rho_j w_j` for any signed density.
    pub fn apply(&self, grid: &Grid, density: ArrayView1<f64>) -> Result<Array1<f64>> {
        grid.check_len(self.n_x())?;
        grid.check_len(density.len())?;
        let weighted = &density * grid.weights();
        Ok(self.values.dot(&weighted))
    }
}

impl CouplingKernel {
    /// Applies the kernel to every row of `densities`, using the cosine
    /// factorization when it is cheaper than the dense product.
    pub fn apply_levels(&self, grid: &Grid, densities: ArrayView2<f64>) -> Array2<f64> {
        let weighted = &densities * grid.weights();
        match &self.cos_coeffs {
            Some(c) if 4 * c.len() < self.n_x() => {
                let x = grid.nodes();
                let mut out = Array2::zeros(densities.dim());
                for (k, ck) in c.iter().enumerate() {
                    if *ck == 0.0 {
                        continue;
                    }
                    let mode = x.mapv(|x| (k as f64 * PI * x).cos());
                    let proj = weighted.dot(&mode) * *ck;
                    for (mut row, p) in out.outer_iter_mut().zip(proj.iter()) {
                        row.scaled_add(*p, &mode);
                    }
                }
                out
            }
            _ => weighted.dot(&self.values.t()),
        }
    }
}

/// Nodal values of `F(., m)`.
pub fn coupling_value(grid: &Grid, kernel: &CouplingKernel, m: &GridMeasure) -> Result<Array1<f64>> {
    kernel.apply(grid, m.density())
}

/// `dF/dm(x_i, m, x_j)`, which for a kernel coupling is `k(x_i, x_j)` for every `m`.
pub fn coupling_flat_derivative(kernel: &CouplingKernel, i: usize, j: usize) -> Result<f64> {
    let n = kernel.n_x();
    if i >= n || j >= n {
        return Err(MfgError::InvalidInput(format!("node pair ({i}, {j}) outside grid")));
    }
    Ok(kernel.values[[i, j]])
}
