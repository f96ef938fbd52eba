//! Distances and norms: Wasserstein-1, dictionary dual norms, discrete Hölder
//! norms and space-time Lebesgue norms.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::grid::Grid;
use crate::measure::GridMeasure;
use crate::stencil;

/// Wasserstein-1 distance, treating node `j` as an atom of mass `m_j w_j`.
pub fn wasserstein1(grid: &Grid, m1: &GridMeasure, m2: &GridMeasure) -> Result<f64> {
    grid.check_len(m1.len())?;
    grid.check_len(m2.len())?;
    Ok(kantorovich_norm(grid, (&m1.density() - &m2.density()).view()))
}

/// `int |cumulative mass of rho|`, which equals `d_1` for zero-mass `rho`.
pub fn kantorovich_norm(grid: &Grid, rho: ArrayView1<f64>) -> f64 {
    let w = grid.weights();
    let mut cumulative = 0.0;
    let mut total = 0.0;
    for j in 0..rho.len() - 1 {
        cumulative += rho[j] * w[j];
        total += cumulative.abs();
    }
    total * grid.dx()
}

/// Supported regularity orders `0`, `alpha`, `1 + alpha`, `2 + alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderOrder {
    Zero,
    Alpha,
    OnePlusAlpha,
    TwoPlusAlpha,
}

impl HolderOrder {
    pub fn from_value(order: f64, alpha: f64) -> Result<Self> {
        let candidates = [
            (0.0, Self::Zero),
            (alpha, Self::Alpha),
            (1.0 + alpha, Self::OnePlusAlpha),
            (2.0 + alpha, Self::TwoPlusAlpha),
        ];
        candidates
            .iter()
            .find(|(v, _)| (v - order).abs() < 1e-12)
            .map(|(_, o)| *o)
            .ok_or(MfgError::UnsupportedOrder(order))
    }

    pub fn value(self, alpha: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Alpha => alpha,
            Self::OnePlusAlpha => 1.0 + alpha,
            Self::TwoPlusAlpha => 2.0 + alpha,
        }
    }

    fn derivatives(self) -> usize {
        match self {
            Self::Zero | Self::Alpha => 0,
            Self::OnePlusAlpha => 1,
            Self::TwoPlusAlpha => 2,
        }
    }
}

/// Pieces of a discrete Hölder norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderComponents {
    /// `sup |D^k f|` for `k = 0, 1, 2`, zero beyond the order.
    pub sups: [f64; 3],
    /// Hölder quotient of the top derivative, zero for order `0`.
    pub quotient: f64,
}

impl HolderComponents {
    pub fn total(&self) -> f64 {
        self.sups.iter().sum::<f64>() + self.quotient
    }
}

pub fn holder_components(grid: &Grid, field: ArrayView1<f64>, order: HolderOrder) -> Result<HolderComponents> {
    grid.check_len(field.len())?;
    let dx = grid.dx();
    let mut sups = [0.0; 3];
    let mut top = field.to_owned();
    sups[0] = sup_abs(top.view());
    if order.derivatives() >= 1 {
        top = stencil::gradient(field, dx);
        sups[1] = sup_abs(top.view());
    }
    if order.derivatives() >= 2 {
        top = stencil::second_derivative(field, dx);
        sups[2] = sup_abs(top.view());
    }
    let quotient = if order == HolderOrder::Zero {
        0.0
    } else {
        holder_quotient(grid.nodes().view(), top.view(), grid.alpha(), 2.0 * dx * (1.0 - 1e-9))
    };
    Ok(HolderComponents { sups, quotient })
}

pub fn discrete_holder_norm(grid: &Grid, field: ArrayView1<f64>, order: HolderOrder) -> Result<f64> {
    Ok(holder_components(grid, field, order)?.total())
}

/// Two-variable proxy `||k||_{order_x, order_y}`: the larger of the order
/// `order_x` norms of the columns `k(., y_j)` and the order `order_y` norms of
/// the rows `k(x_i, .)`. No cross-variable modulus is included.
pub fn kernel_holder_norm(grid: &Grid, kernel: ArrayView2<f64>, order_x: HolderOrder, order_y: HolderOrder) -> Result<f64> {
    grid.check_len(kernel.nrows())?;
    grid.check_len(kernel.ncols())?;
    let mut worst = 0.0_f64;
    for col in kernel.columns() {
        worst = worst.max(discrete_holder_norm(grid, col, order_x)?);
    }
    for row in kernel.rows() {
        worst = worst.max(discrete_holder_norm(grid, row, order_y)?);
    }
    Ok(worst)
}

/// `max |f_i - f_k| / |x_i - x_k|^exponent` over pairs at distance at least `min_sep`.
pub fn holder_quotient(points: ArrayView1<f64>, values: ArrayView1<f64>, exponent: f64, min_sep: f64) -> f64 {
    let n = points.len();
    let mut best = 0.0_f64;
    for i in 0..n {
        for k in i + 1..n {
            let d = (points[k] - points[i]).abs();
            if d >= min_sep && d > 0.0 {
                best = best.max((values[k] - values[i]).abs() / d.powf(exponent));
            }
        }
    }
    best
}

fn sup_abs(f: ArrayView1<f64>) -> f64 {
    f.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `(sum_n sum_j |f|^p w_j tau_n)^(1/p)` with `p = 3 / (2 + alpha)` and
/// trapezoid weights `tau_n` in time. Rows of `field` are time levels.
pub fn lp_spacetime_norm(grid: &Grid, field: ArrayView2<f64>, alpha: f64) -> Result<f64> {
    let (n_t, n_x) = field.dim();
    grid.check_len(n_x)?;
    if n_t != grid.n_t() {
        return Err(MfgError::InvalidInput(format!(
            "field has {n_t} levels, grid has {}",
            grid.n_t()
        )));
    }
    let p = 3.0 / (2.0 + alpha);
    let w = grid.weights();
    let mut total = 0.0;
    for (n, row) in field.outer_iter().enumerate() {
        let tau = if n == 0 || n + 1 == n_t { 0.5 * grid.dt() } else { grid.dt() };
        let s: f64 = row.iter().zip(w.iter()).map(|(f, w)| f.abs().powf(p) * w).sum();
        total += tau * s;
    }
    Ok(total.powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub label: String,
    pub values: Array1<f64>,
    pub norm: f64,
    /// One-sided slopes at `x = 0` and `x = 1`.
    pub boundary_slopes: [f64; 2],
    pub neumann: bool,
}

/// Finite family of test functions used to estimate negative-order norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDictionary {
    pub order: HolderOrder,
    pub n_x: usize,
    entries: Vec<DictionaryEntry>,
    /// `values * w / norm`, one row per entry.
    #[serde(skip)]
    scaled: Option<Array2<f64>>,
}

const NEUMANN_SLOPE_TOL: f64 = 1e-10;

impl TestDictionary {
    pub fn empty(grid: &Grid, order: HolderOrder) -> Self {
        Self {
            order,
            n_x: grid.n_x(),
            entries: Vec::new(),
            scaled: None,
        }
    }

    /// `cos(n pi x)` for `n = 0..=max_mode`.
    pub fn cosines(grid: &Grid, max_mode: usize, order: HolderOrder) -> Result<Self> {
        let mut dict = Self::empty(grid, order);
        for n in 0..=max_mode {
            let k = n as f64 * PI;
            dict.push_with_slopes(grid, format!("cos{n}"), grid.nodes().mapv(|x| (k * x).cos()), [0.0, 0.0])?;
        }
        Ok(dict)
    }

    /// Cosines up to mode 32 and 16 random combinations of the first eight modes.
    pub fn standard(grid: &Grid, order: HolderOrder, seed: u64) -> Result<Self> {
        let mut dict = Self::cosines(grid, 32, order)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in 0..16 {
            let coeffs: Vec<f64> = (0..=8).map(|n| rng.gen_range(-1.0..1.0) / (1.0 + n as f64)).collect();
            let values = grid.nodes().mapv(|x| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(n, c)| c * (n as f64 * PI * x).cos())
                    .sum()
            });
            dict.push_with_slopes(grid, format!("mix{r}"), values, [0.0, 0.0])?;
        }
        Ok(dict)
    }

    /// Adds a test function, taking its boundary slopes from finite differences.
    pub fn push(&mut self, grid: &Grid, label: impl Into<String>, values: Array1<f64>) -> Result<()> {
        let slopes = [
            stencil::boundary_slope_left(values.view(), grid.dx()),
            stencil::boundary_slope_right(values.view(), grid.dx()),
        ];
        self.push_with_slopes(grid, label, values, slopes)
    }

    /// Adds a test function with known boundary slopes.
    pub fn push_with_slopes(
        &mut self,
        grid: &Grid,
        label: impl Into<String>,
        values: Array1<f64>,
        boundary_slopes: [f64; 2],
    ) -> Result<()> {
        if grid.n_x() != self.n_x {
            return Err(MfgError::GridMismatch {
                expected: self.n_x,
                found: grid.n_x(),
            });
        }
        let norm = discrete_holder_norm(grid, values.view(), self.order)?;
        if !(norm > 0.0) {
            return Err(MfgError::InvalidInput("test function with zero norm".into()));
        }
        let neumann = boundary_slopes.iter().all(|s| s.abs() <= NEUMANN_SLOPE_TOL);
        self.entries.push(DictionaryEntry {
            label: label.into(),
            values,
            norm,
            boundary_slopes,
            neumann,
        });
        self.scaled = None;
        Ok(())
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Caches the weighted, normalized entries for repeated evaluation.
    pub fn prepare(&mut self, grid: &Grid) {
        self.scaled = Some(self.scaled_matrix(grid));
    }

    fn scaled_matrix(&self, grid: &Grid) -> Array2<f64> {
        let w = grid.weights();
        Array2::from_shape_fn((self.entries.len(), self.n_x), |(k, j)| {
            let e = &self.entries[k];
            e.values[j] * w[j] / e.norm
        })
    }
}

/// `max_k |<rho, phi_k>| / ||phi_k||`, a lower bound of the true dual norm.
pub fn dual_norm(grid: &Grid, rho: ArrayView1<f64>, dict: &TestDictionary) -> Result<f64> {
    if dict.is_empty() {
        return Err(MfgError::InvalidInput("empty test dictionary".into()));
    }
    grid.check_len(rho.len())?;
    grid.check_len(dict.n_x)?;
    let products = match &dict.scaled {
        Some(s) => s.dot(&rho),
        None => dict.scaled_matrix(grid).dot(&rho),
    };
    Ok(sup_abs(products.view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Grid {
        Grid::new(n, 3, 0.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn deltas_at_fifth_and_seven_tenths() {
        let g = grid(101);
        let a = GridMeasure::delta(&g, 20).unwrap();
        let b = GridMeasure::delta(&g, 70).unwrap();
        assert_abs_diff_eq!(wasserstein1(&g, &a, &b).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(wasserstein1(&g, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn uniform_against_midpoint_delta() {
        let g = grid(101);
        let u = GridMeasure::uniform(&g);
        let d = GridMeasure::delta(&g, 50).unwrap();
        assert_abs_diff_eq!(wasserstein1(&g, &u, &d).unwrap(), 0.25, epsilon = 1e-12);
        assert!(wasserstein1(&grid(51), &u, &d).is_err());
    }

    #[test]
    fn holder_orders() {
        let g = grid(41);
        assert_eq!(HolderOrder::from_value(1.5, 0.5).unwrap(), HolderOrder::OnePlusAlpha);
        assert!(matches!(HolderOrder::from_value(1.0, 0.5), Err(MfgError::UnsupportedOrder(_))));
        let c = Array1::from_elem(41, 3.0);
        for o in [HolderOrder::Zero, HolderOrder::Alpha, HolderOrder::OnePlusAlpha, HolderOrder::TwoPlusAlpha] {
            assert_abs_diff_eq!(discrete_holder_norm(&g, c.view(), o).unwrap(), 3.0, epsilon = 1e-12);
        }
        let x = g.nodes();
        assert_abs_diff_eq!(
            discrete_holder_norm(&g, x.view(), HolderOrder::OnePlusAlpha).unwrap(),
            2.0,
            epsilon = 1e-10
        );
        let cos = x.mapv(|x| (PI * x).cos());
        assert_abs_diff_eq!(discrete_holder_norm(&g, cos.view(), HolderOrder::Zero).unwrap(), 1.0);
    }

    #[test]
    fn kernel_norm_takes_each_direction_separately() {
        let g = grid(41);
        let x = g.nodes();
        let cos = x.mapv(|x| (PI * x).cos());
        let separable = Array2::from_shape_fn((41, 41), |(i, _)| cos[i]);
        let mixed = kernel_holder_norm(&g, separable.view(), HolderOrder::TwoPlusAlpha, HolderOrder::OnePlusAlpha).unwrap();
        let along_x = discrete_holder_norm(&g, cos.view(), HolderOrder::TwoPlusAlpha).unwrap();
        assert_abs_diff_eq!(mixed, along_x, epsilon = 1e-12);
        let swapped = kernel_holder_norm(&g, separable.view(), HolderOrder::Zero, HolderOrder::TwoPlusAlpha).unwrap();
        assert_abs_diff_eq!(swapped, 1.0, epsilon = 1e-12);
        assert!(kernel_holder_norm(&grid(21), separable.view(), HolderOrder::Zero, HolderOrder::Zero).is_err());
    }

    #[test]
    fn holder_quotient_skips_neighbours() {
        let g = grid(11);
        let mut f = Array1::zeros(11);
        f[5] = 1.0;
        let q = holder_components(&g, f.view(), HolderOrder::Alpha).unwrap().quotient;
        assert_abs_diff_eq!(q, 1.0 / (0.2_f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn lp_norm_of_unit_field() {
        let g = Grid::new(11, 21, 0.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(lp_spacetime_norm(&g, Array2::ones((21, 11)).view(), 0.5).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(lp_spacetime_norm(&g, Array2::zeros((21, 11)).view(), 0.5).unwrap(), 0.0);
        assert!(lp_spacetime_norm(&g, Array2::zeros((20, 11)).view(), 0.5).is_err());
    }

    #[test]
    fn dual_norm_examples() {
        let g = grid(41);
        let dict = TestDictionary::standard(&g, HolderOrder::OnePlusAlpha, 7).unwrap();
        assert_eq!(dict.len(), 49);
        assert!(dict.entries().iter().all(|e| e.neumann));
        assert_eq!(dual_norm(&g, Array1::zeros(41).view(), &dict).unwrap(), 0.0);
        let d = GridMeasure::delta(&g, 9).unwrap();
        assert_eq!(dual_norm(&g, d.signed_difference(&d).density(), &dict).unwrap(), 0.0);

        let rho = g.nodes().mapv(|x| (PI * x).cos());
        let single = TestDictionary::cosines(&g, 1, HolderOrder::OnePlusAlpha).unwrap();
        let norm_cos = single.entries()[1].norm;
        assert_abs_diff_eq!(dual_norm(&g, rho.view(), &single).unwrap(), 0.5 / norm_cos, epsilon = 1e-14);
        assert!(dual_norm(&g, rho.view(), &dict).unwrap() >= 0.5 / norm_cos - 1e-15);
        assert!(dual_norm(&g, rho.view(), &TestDictionary::empty(&g, HolderOrder::Alpha)).is_err());
    }

    #[test]
    fn pushed_entries_flag_slopes() {
        let g = grid(41);
        let mut dict = TestDictionary::empty(&g, HolderOrder::OnePlusAlpha);
        dict.push(&g, "x", g.nodes()).unwrap();
        assert!(!dict.entries()[0].neumann);
        dict.push(&g, "const", Array1::ones(41)).unwrap();
        assert!(dict.entries()[1].neumann);
        assert!(dict.push(&g, "zero", Array1::zeros(41)).is_err());
    }
}
