use std::f64::consts::PI;
use std::fmt::Debug;

/// Hamiltonian `H(x, p)` with its first two derivatives in `p`.
pub trait Hamiltonian: Debug + Send + Sync {
    fn h(&self, x: f64, p: f64) -> f64;
    fn h_p(&self, x: f64, p: f64) -> f64;
    fn h_pp(&self, x: f64, p: f64) -> f64;
    /// Bound on `|H_p|`.
    fn lip_p(&self) -> f64;
    /// Bound on `H_pp`.
    fn hpp_upper(&self) -> f64;
}

/// `H(x, p) = sqrt(1 + p^2) - 1 + V(x)` with `V(x) = sum_n v_n cos(n pi x)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sqrt1p {
    pub potential: Vec<f64>,
}

impl Sqrt1p {
    pub fn new(potential: Vec<f64>) -> Self {
        Self { potential }
    }

    fn potential_at(&self, x: f64) -> f64 {
        cosine_series(&self.potential, x)
    }
}

impl Hamiltonian for Sqrt1p {
    fn h(&self, x: f64, p: f64) -> f64 {
        p * p / ((1.0 + p * p).sqrt() + 1.0) + self.potential_at(x)
    }

    fn h_p(&self, _x: f64, p: f64) -> f64 {
        p / (1.0 + p * p).sqrt()
    }

    fn h_pp(&self, _x: f64, p: f64) -> f64 {
        (1.0 + p * p).powf(-1.5)
    }

    fn lip_p(&self) -> f64 {
        1.0
    }

    fn hpp_upper(&self) -> f64 {
        1.0
    }
}

/// `H = 0`, which decouples the backward equation from the measure's drift.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroHamiltonian;

impl Hamiltonian for ZeroHamiltonian {
    fn h(&self, _x: f64, _p: f64) -> f64 {
        0.0
    }

    fn h_p(&self, _x: f64, _p: f64) -> f64 {
        0.0
    }

    fn h_pp(&self, _x: f64, _p: f64) -> f64 {
        0.0
    }

    fn lip_p(&self) -> f64 {
        0.0
    }

    fn hpp_upper(&self) -> f64 {
        0.0
    }
}

pub fn cosine_series(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| c * (n as f64 * PI * x).cos())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sqrt1p_derivatives_match_differences() {
        let h = Sqrt1p::new(vec![0.0, 0.2]);
        let d = 1e-5;
        for p in [-3.0, -0.4, 0.0, 0.7, 5.0] {
            let fd = (h.h(0.3, p + d) - h.h(0.3, p - d)) / (2.0 * d);
            assert_abs_diff_eq!(fd, h.h_p(0.3, p), epsilon = 1e-9);
            let fd2 = (h.h_p(0.3, p + d) - h.h_p(0.3, p - d)) / (2.0 * d);
            assert_abs_diff_eq!(fd2, h.h_pp(0.3, p), epsilon = 1e-9);
            assert!(h.h_p(0.3, p).abs() < 1.0);
        }
        assert_abs_diff_eq!(h.h(0.0, 0.0), 0.2);
    }
}
