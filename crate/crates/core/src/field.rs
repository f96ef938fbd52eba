use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::grid::Grid;

/// Values on every `(time level, node)` pair; row `n` is level `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    values: Array2<f64>,
}

impl SpaceTimeField {
    pub(crate) fn from_array_raw(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: Array2::zeros((grid.n_t(), grid.n_x())),
        }
    }

    pub fn from_array(grid: &Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n_t(), grid.n_x()) {
            return Err(MfgError::InvalidInput(format!(
                "field shape {:?} does not match grid ({}, {})",
                values.dim(),
                grid.n_t(),
                grid.n_x()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MfgError::InvalidInput("non-finite field value".into()));
        }
        Ok(Self { values })
    }

    /// Same spatial profile at every level.
    pub fn constant_in_time(grid: &Grid, profile: ArrayView1<f64>) -> Result<Self> {
        grid.check_len(profile.len())?;
        let mut values = Array2::zeros((grid.n_t(), grid.n_x()));
        for mut row in values.rows_mut() {
            row.assign(&profile);
        }
        Ok(Self { values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: Array2::from_shape_fn((grid.n_t(), grid.n_x()), |(n, j)| f(grid.time(n), grid.x(j))),
        }
    }

    pub fn level(&self, n: usize) -> ArrayView1<'_, f64> {
        self.values.row(n)
    }

    pub fn level_mut(&mut self, n: usize) -> ArrayViewMut1<'_, f64> {
        self.values.row_mut(n)
    }

    pub fn last(&self) -> ArrayView1<'_, f64> {
        self.values.row(self.values.nrows() - 1)
    }

    pub fn n_levels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_x(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.values
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled_add(&mut self, a: f64, other: &SpaceTimeField) {
        self.values.scaled_add(a, &other.values);
    }

    /// `(1 - s) * self + s * other`.
    pub fn blend(&self, other: &SpaceTimeField, s: f64) -> SpaceTimeField {
        SpaceTimeField {
            values: &self.values * (1.0 - s) + &other.values * s,
        }
    }

    pub fn sub(&self, other: &SpaceTimeField) -> SpaceTimeField {
        SpaceTimeField {
            values: &self.values - &other.values,
        }
    }

    pub fn scale(&self, a: f64) -> SpaceTimeField {
        SpaceTimeField {
            values: &self.values * a,
        }
    }

    /// Mass `sum_j f_j w_j` of each level.
    pub fn masses(&self, grid: &Grid) -> Array1<f64> {
        self.values.dot(grid.weights())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
