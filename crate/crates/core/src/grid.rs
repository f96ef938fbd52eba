//! Uniform space-time lattice on `[0, 1] x [t0, T]`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Node `j` sits at `x_j = j * dx` and level `n` at `t_n = t0 + n * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_x: usize,
    n_t: usize,
    t0: f64,
    t_end: f64,
    alpha: f64,
    dx: f64,
    dt: f64,
    #[serde(skip)]
    weights: Array1<f64>,
}

impl Grid {
    pub fn new(n_x: usize, n_t: usize, t0: f64, t_end: f64, alpha: f64) -> Result<Self> {
        if n_x < 3 {
            return Err(MfgError::InvalidGrid(format!("n_x = {n_x} < 3")));
        }
        if n_t < 2 {
            return Err(MfgError::InvalidGrid(format!("n_t = {n_t} < 2")));
        }
        if !(t0.is_finite() && t_end.is_finite() && t0 < t_end) {
            return Err(MfgError::InvalidGrid(format!(
                "time window [{t0}, {t_end}] is empty or not finite"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MfgError::InvalidGrid(format!("alpha = {alpha} not in (0, 1)")));
        }
        let dx = 1.0 / (n_x - 1) as f64;
        let dt = (t_end - t0) / (n_t - 1) as f64;
        Ok(Self {
            n_x,
            n_t,
            t0,
            t_end,
            alpha,
            dx,
            dt,
            weights: trapezoid_weights(n_x, dx),
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.n_x {
            1.0
        } else {
            j as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n_x, |j| self.x(j))
    }

    pub fn time(&self, n: usize) -> f64 {
        if n + 1 == self.n_t {
            self.t_end
        } else {
            self.t0 + n as f64 * self.dt
        }
    }

    /// Trapezoid quadrature weights, summing to one.
    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn integrate(&self, f: ArrayView1<f64>) -> f64 {
        f.dot(&self.weights)
    }

    /// `sum_j f_j g_j w_j`.
    pub fn pairing(&self, f: ArrayView1<f64>, g: ArrayView1<f64>) -> f64 {
        f.iter()
            .zip(g.iter())
            .zip(self.weights.iter())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_x {
            return Err(MfgError::GridMismatch {
                expected: self.n_x,
                found: len,
            });
        }
        Ok(())
    }

    /// Same spatial lattice on `[t_level, T]`.
    pub fn restrict_from(&self, level: usize) -> Result<Grid> {
        if level + 1 >= self.n_t {
            return Err(MfgError::InvalidGrid(format!(
                "cannot restrict to level {level} of {}",
                self.n_t
            )));
        }
        Grid::new(self.n_x, self.n_t - level, self.time(level), self.t_end, self.alpha)
    }

    /// Same spatial lattice on `[t0, T]`, keeping the time step as close as possible.
    pub fn with_start(&self, t0: f64) -> Result<Grid> {
        if !(t0 < self.t_end) {
            return Err(MfgError::InvalidGrid(format!("t0 = {t0} is not before T")));
        }
        let steps = ((self.t_end - t0) / self.dt).round().max(1.0) as usize;
        Grid::new(self.n_x, steps + 1, t0, self.t_end, self.alpha)
    }
}

pub(crate) fn trapezoid_weights(n: usize, h: f64) -> Array1<f64> {
    let mut w = Array1::from_elem(n, h);
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}
