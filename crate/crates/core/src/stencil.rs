//! Finite-difference stencils on the uniform spatial lattice.

use ndarray::{Array1, ArrayView1};

/// Centered difference with reflected ghost nodes, so it vanishes at both ends.
pub fn centered_gradient(f: ArrayView1<f64>, dx: f64) -> Array1<f64> {
    let n = f.len();
    let mut g = Array1::zeros(n);
    for j in 1..n - 1 {
        g[j] = (f[j + 1] - f[j - 1]) / (2.0 * dx);
    }
    g
}

/// Second difference with reflected ghost nodes.
pub fn ghost_laplacian(f: ArrayView1<f64>, dx: f64) -> Array1<f64> {
    let n = f.len();
    let h2 = dx * dx;
    let mut g = Array1::zeros(n);
    g[0] = 2.0 * (f[1] - f[0]) / h2;
    g[n - 1] = 2.0 * (f[n - 2] - f[n - 1]) / h2;
    for j in 1..n - 1 {
        g[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) / h2;
    }
    g
}

/// Centered in the interior and one-sided second order at the ends. Needs `n >= 3`.
pub fn gradient(f: ArrayView1<f64>, dx: f64) -> Array1<f64> {
    let n = f.len();
    let mut g = Array1::zeros(n);
    for j in 1..n - 1 {
        g[j] = (f[j + 1] - f[j - 1]) / (2.0 * dx);
    }
    g[0] = boundary_slope_left(f, dx);
    g[n - 1] = boundary_slope_right(f, dx);
    g
}

pub fn boundary_slope_left(f: ArrayView1<f64>, dx: f64) -> f64 {
    (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
}

pub fn boundary_slope_right(f: ArrayView1<f64>, dx: f64) -> f64 {
    let n = f.len();
    (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx)
}

/// Fourth-order one-sided slope at `x = 0`. Needs `n >= 5`.
pub fn boundary_slope4_left(f: ArrayView1<f64>, dx: f64) -> f64 {
    (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * dx)
}

/// Fourth-order one-sided slope at `x = 1`. Needs `n >= 5`.
pub fn boundary_slope4_right(f: ArrayView1<f64>, dx: f64) -> f64 {
    let n = f.len();
    (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / (12.0 * dx)
}

/// Centered in the interior; fourth-order one-sided at the ends when `n >= 5`,
/// second order otherwise. Needs `n >= 3`.
pub fn gradient_sharp_ends(f: ArrayView1<f64>, dx: f64) -> Array1<f64> {
    let n = f.len();
    let mut g = gradient(f, dx);
    if n >= 5 {
        g[0] = boundary_slope4_left(f, dx);
        g[n - 1] = boundary_slope4_right(f, dx);
    }
    g
}

/// Centered in the interior and one-sided at the ends. Needs `n >= 4` for the
/// second-order end stencil, otherwise the end values copy the interior.
pub fn second_derivative(f: ArrayView1<f64>, dx: f64) -> Array1<f64> {
    let n = f.len();
    let h2 = dx * dx;
    let mut g = Array1::zeros(n);
    for j in 1..n - 1 {
        g[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) / h2;
    }
    if n >= 4 {
        g[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
        g[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    } else {
        g[0] = g[1];
        g[n - 1] = g[n - 2];
    }
    g
}

/// Discrete zero-slope test at both ends: the first difference must be
/// dominated by the second difference, up to `O(dx^2)` and rounding.
pub fn neumann_compatible(f: ArrayView1<f64>, dx: f64) -> bool {
    let n = f.len();
    if n < 3 {
        return false;
    }
    let scale = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let slack = 10.0 * dx * dx * scale + 1e-14 * (1.0 + scale);
    let left = (f[1] - f[0]).abs() <= (f[2] - 2.0 * f[1] + f[0]).abs() + slack;
    let right =
        (f[n - 2] - f[n - 1]).abs() <= (f[n - 3] - 2.0 * f[n - 2] + f[n - 1]).abs() + slack;
    left && right
}
