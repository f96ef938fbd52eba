//! Linearization of the coupled system around a solved baseline, the
//! fundamental kernel `K = dU/dm` and its intrinsic derivative.
//!
//! The linear system is the exact derivative of the discrete scheme, so the
//! kernel is the exact Jacobian of the discrete map `m0 -> u(t0)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::field::SpaceTimeField;
use crate::grid::Grid;
use crate::measure::GridMeasure;
use crate::metrics::{discrete_holder_norm, dual_norm, HolderOrder, TestDictionary};
use crate::mfg::MfgSolution;
use crate::model::MfgModel;
use crate::parabolic::{divergence_source, hamiltonian_drift, BackwardOperator};
use crate::stencil;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedOptions {
    pub damping: f64,
    /// Stop once `sup_t` of the dual norm between successive `rho` paths drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub dictionary_seed: u64,
}

impl Default for LinearizedOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-11,
            max_iter: 400,
            dictionary_seed: 17,
        }
    }
}

/// Data of the general linear system: terminal `z_T`, initial signed density
/// `rho0`, source `h` of the backward equation and flux `c` of the forward one.
#[derive(Debug, Clone)]
pub struct GeneralLinearizedData {
    pub z_terminal: Array1<f64>,
    pub rho0: Array1<f64>,
    pub h: Option<SpaceTimeField>,
    pub c: Option<SpaceTimeField>,
}

impl GeneralLinearizedData {
    pub fn initial(rho0: Array1<f64>) -> Self {
        Self {
            z_terminal: Array1::zeros(rho0.len()),
            rho0,
            h: None,
            c: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedSolution {
    pub z: SpaceTimeField,
    pub rho: SpaceTimeField,
    /// `||z_T||_{2+a} + ||rho0||_{-(1+a)} + sup_t ||h||_a + ||c||_{L^1}`.
    pub m_constant: f64,
    pub iterations: usize,
    pub final_gap: f64,
    /// `max_n |mass(rho^n) - mass(rho^0)|`.
    pub mass_drift: f64,
    /// `sum dt int m~ H_pp |D z|^2`.
    pub energy: f64,
}

/// Baseline-dependent pieces shared by every solve around one MFG solution.
#[derive(Debug, Clone)]
pub struct LinearizedSystem<'a> {
    model: &'a MfgModel,
    op: BackwardOperator,
    /// `P^T (w m^n)`, the mass seen by the drift at step `n`.
    smoothed: Array2<f64>,
    /// `H_pp(x, D_c u^{n+1})` at step `n`.
    hpp: Array2<f64>,
    dictionary: TestDictionary,
}

impl<'a> LinearizedSystem<'a> {
    pub fn new(model: &'a MfgModel, baseline: &MfgSolution, options: &LinearizedOptions) -> Result<Self> {
        let grid = &model.grid;
        if baseline.grid.n_x() != grid.n_x() || baseline.grid.n_t() != grid.n_t() {
            return Err(MfgError::GridMismatch {
                expected: grid.n_x(),
                found: baseline.grid.n_x(),
            });
        }
        let op = BackwardOperator::new(grid, &model.a, hamiltonian_drift(model, &baseline.u))?;
        let (n_t, n_x) = (grid.n_t(), grid.n_x());
        let w = grid.weights();
        let mut smoothed = Array2::zeros((n_t, n_x));
        let mut hpp = Array2::zeros((n_t, n_x));
        let h = model.hamiltonian.as_ref();
        for n in 0..n_t - 1 {
            smoothed
                .row_mut(n)
                .assign(&op.implicit_solve_transpose((&baseline.m.level(n) * w).view()));
            let p = stencil::centered_gradient(baseline.u.level(n + 1), grid.dx());
            for j in 0..n_x {
                hpp[[n, j]] = h.h_pp(grid.x(j), p[j]);
            }
        }
        let mut dictionary = TestDictionary::standard(grid, HolderOrder::OnePlusAlpha, options.dictionary_seed)?;
        dictionary.prepare(grid);
        Ok(Self {
            model,
            op,
            smoothed,
            hpp,
            dictionary,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.model.grid
    }

    pub fn dictionary(&self) -> &TestDictionary {
        &self.dictionary
    }

    /// Backward sweep for `z` given the whole `rho` path.
    fn backward(&self, rho: ArrayView2<f64>, data: &GeneralLinearizedData) -> Array2<f64> {
        let grid = self.grid();
        let (n_t, n_x) = (grid.n_t(), grid.n_x());
        let dt = grid.dt();
        let source = self.model.f.apply_levels(grid, rho);
        let mut z = Array2::zeros((n_t, n_x));
        let terminal = self.model.g.apply(grid, rho.row(n_t - 1)).expect("shape checked") + &data.z_terminal;
        z.row_mut(n_t - 1).assign(&terminal);
        for n in (0..n_t - 1).rev() {
            let mut zn = self.op.backward_step(n + 1, z.row(n + 1));
            zn.scaled_add(dt, &source.row(n));
            if let Some(h) = &data.h {
                zn.scaled_add(dt, &h.level(n));
            }
            z.row_mut(n).assign(&zn);
        }
        z
    }

    /// Forward sweep for `rho` with the flux generated by `z` plus the external one.
    fn forward(&self, z: ArrayView2<f64>, data: &GeneralLinearizedData) -> Array2<f64> {
        let grid = self.grid();
        let (n_t, n_x) = (grid.n_t(), grid.n_x());
        let dt = grid.dt();
        let w = grid.weights();
        let mut rho = Array2::zeros((n_t, n_x));
        rho.row_mut(0).assign(&data.rho0);
        let mut nu = &data.rho0 * w;
        for n in 0..n_t - 1 {
            nu = self.op.forward_step(n + 1, nu.view());
            let dz = stencil::centered_gradient(z.row(n + 1), grid.dx());
            let mut flux = &self.smoothed.row(n) / w * &self.hpp.row(n) * &dz;
            if let Some(c) = &data.c {
                flux += &c.level(n);
            }
            nu.scaled_add(dt, &divergence_source(grid, flux.view()));
            rho.row_mut(n + 1).assign(&(&nu / w));
        }
        rho
    }

    /// `sup_t` dual norm of a path difference.
    fn path_gap(&self, diff: ArrayView2<f64>) -> f64 {
        diff.outer_iter()
            .map(|row| dual_norm(self.grid(), row, &self.dictionary).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    pub fn solve(&self, data: &GeneralLinearizedData, options: &LinearizedOptions) -> Result<LinearizedSolution> {
        let grid = self.grid();
        let n_x = grid.n_x();
        grid.check_len(data.z_terminal.len())?;
        grid.check_len(data.rho0.len())?;
        for f in [&data.h, &data.c].into_iter().flatten() {
            if f.n_levels() != grid.n_t() || f.n_x() != n_x {
                return Err(MfgError::GridMismatch {
                    expected: n_x,
                    found: f.n_x(),
                });
            }
        }
        if !(options.damping > 0.0 && options.damping <= 1.0) {
            return Err(MfgError::InvalidInput(format!("damping {}", options.damping)));
        }

        let z0 = self.backward(Array2::zeros((grid.n_t(), n_x)).view(), data);
        let mut rho = self.forward(z0.view(), data);
        let mut gap = f64::INFINITY;
        let mut iterations = 0;
        while iterations < options.max_iter {
            iterations += 1;
            let z = self.backward(rho.view(), data);
            let fresh = self.forward(z.view(), data);
            let mut next = &rho * (1.0 - options.damping) + &fresh * options.damping;
            next.row_mut(0).assign(&data.rho0);
            gap = self.path_gap((&next - &rho).view());
            rho = next;
            if gap < options.tol {
                break;
            }
        }
        if !(gap < options.tol) {
            return Err(MfgError::NonConvergence {
                iterations,
                last_gap: gap,
                gap_history: vec![gap],
            });
        }
        let z = self.backward(rho.view(), data);
        let rho = SpaceTimeField::from_array_raw(rho);
        let masses = rho.masses(grid);
        let mass_drift = masses.iter().map(|m| (m - masses[0]).abs()).fold(0.0, f64::max);
        let energy = self.energy(z.view());
        Ok(LinearizedSolution {
            z: SpaceTimeField::from_array_raw(z),
            m_constant: self.m_constant(data)?,
            rho,
            iterations,
            final_gap: gap,
            mass_drift,
            energy,
        })
    }

    fn energy(&self, z: ArrayView2<f64>) -> f64 {
        let grid = self.grid();
        let mut total = 0.0;
        for n in 0..grid.n_t() - 1 {
            let dz = stencil::centered_gradient(z.row(n + 1), grid.dx());
            let e: f64 = (0..grid.n_x())
                .map(|j| self.smoothed[[n, j]] * self.hpp[[n, j]] * dz[j] * dz[j])
                .sum();
            total += grid.dt() * e;
        }
        total
    }

    fn m_constant(&self, data: &GeneralLinearizedData) -> Result<f64> {
        let grid = self.grid();
        let mut m = discrete_holder_norm(grid, data.z_terminal.view(), HolderOrder::TwoPlusAlpha)?
            + dual_norm(grid, data.rho0.view(), &self.dictionary)?;
        if let Some(h) = &data.h {
            let mut sup = 0.0_f64;
            for n in 0..grid.n_t() {
                sup = sup.max(discrete_holder_norm(grid, h.level(n), HolderOrder::Alpha)?);
            }
            m += sup;
        }
        if let Some(c) = &data.c {
            let n_t = grid.n_t();
            let l1: f64 = (0..n_t)
                .map(|n| {
                    let tau = if n == 0 || n + 1 == n_t { 0.5 } else { 1.0 };
                    tau * grid.dt() * grid.integrate(c.level(n).mapv(f64::abs).view())
                })
                .sum();
            m += l1;
        }
        Ok(m)
    }
}

pub fn solve_linearized_general(
    model: &MfgModel,
    baseline: &MfgSolution,
    data: &GeneralLinearizedData,
    options: &LinearizedOptions,
) -> Result<LinearizedSolution> {
    LinearizedSystem::new(model, baseline, options)?.solve(data, options)
}

/// Response `(v, mu)` of the system to an initial perturbation `mu0`.
pub fn solve_linearized_mfg(
    model: &MfgModel,
    baseline: &MfgSolution,
    mu0: ArrayView1<f64>,
    options: &LinearizedOptions,
) -> Result<LinearizedSolution> {
    solve_linearized_general(model, baseline, &GeneralLinearizedData::initial(mu0.to_owned()), options)
}

/// `K[[i, j]] = v(t0, x_i)` for a unit point mass at `y_j`, with solver statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalKernel {
    pub values: Array2<f64>,
    pub max_gap: f64,
    pub max_iterations: usize,
}

pub fn fundamental_kernel(model: &MfgModel, baseline: &MfgSolution, options: &LinearizedOptions) -> Result<FundamentalKernel> {
    let system = LinearizedSystem::new(model, baseline, options)?;
    let grid = &model.grid;
    let n = grid.n_x();
    let columns: Vec<Result<LinearizedSolution>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let delta = GridMeasure::delta(grid, j)?.into_density();
            system.solve(&GeneralLinearizedData::initial(delta), options)
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    let mut max_gap = 0.0_f64;
    let mut max_iterations = 0;
    for (j, col) in columns.into_iter().enumerate() {
        let col = col?;
        values.column_mut(j).assign(&col.z.level(0));
        max_gap = max_gap.max(col.final_gap);
        max_iterations = max_iterations.max(col.iterations);
    }
    Ok(FundamentalKernel {
        values,
        max_gap,
        max_iterations,
    })
}

/// `K(x, y) - int K(x, .) dm0`.
pub fn normalize_kernel(grid: &Grid, kernel: ArrayView2<f64>, m0: &GridMeasure) -> Result<Array2<f64>> {
    grid.check_len(kernel.ncols())?;
    grid.check_len(m0.len())?;
    let mean = kernel.dot(&m0.masses(grid));
    Ok(&kernel - &mean.insert_axis(Axis(1)))
}

/// `sum_j K(x, y_j) rho_j w_j`.
pub fn pair_kernel(grid: &Grid, kernel: ArrayView2<f64>, rho: ArrayView1<f64>) -> Result<Array1<f64>> {
    grid.check_len(rho.len())?;
    Ok(kernel.dot(&(&rho * grid.weights())))
}

/// Derivative in `y` of every row: centered inside, one-sided fourth order at
/// the walls (second order below five nodes).
pub fn intrinsic_derivative(grid: &Grid, kernel: ArrayView2<f64>) -> Result<Array2<f64>> {
    if kernel.ncols() < 3 {
        return Err(MfgError::InvalidInput(format!("{} y-nodes, need at least 3", kernel.ncols())));
    }
    grid.check_len(kernel.ncols())?;
    let mut out = Array2::zeros(kernel.dim());
    for (i, row) in kernel.outer_iter().enumerate() {
        out.row_mut(i).assign(&stencil::gradient_sharp_ends(row, grid.dx()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfg::{solve_mfg, MfgOptions};
    use crate::model::CouplingKernel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn baseline(model: &MfgModel) -> MfgSolution {
        let m0 = GridMeasure::from_fn(&model.grid, |x| 1.0 + 0.6 * (PI * x).cos()).unwrap();
        solve_mfg(model, &m0, &MfgOptions::with_tol(1e-12)).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let model = MfgModel::reference(21, 41).unwrap();
        let base = baseline(&model);
        let sol = solve_linearized_mfg(&model, &base, Array1::zeros(21).view(), &LinearizedOptions::default()).unwrap();
        assert_eq!(sol.z.sup_abs(), 0.0);
        assert_eq!(sol.rho.sup_abs(), 0.0);
    }

    #[test]
    fn decoupled_kernel_vanishes() {
        let mut model = MfgModel::reference(21, 41).unwrap();
        model.f = CouplingKernel::zero(&model.grid);
        model.g = CouplingKernel::zero(&model.grid);
        let base = baseline(&model);
        let k = fundamental_kernel(&model, &base, &LinearizedOptions::default()).unwrap();
        assert_eq!(k.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(k.max_iterations, 1);
    }

    #[test]
    fn mass_of_rho_is_conserved() {
        let model = MfgModel::reference(21, 41).unwrap();
        let base = baseline(&model);
        let g = &model.grid;
        let mu0 = g.nodes().mapv(|x| (PI * x).cos() + 0.3 * (2.0 * PI * x).cos());
        let sol = solve_linearized_mfg(&model, &base, mu0.view(), &LinearizedOptions::default()).unwrap();
        assert!(sol.mass_drift < 1e-13);
        assert_eq!(sol.rho.level(0), mu0.view());
        assert!(sol.energy >= 0.0);
    }

    #[test]
    fn normalized_kernel_has_zero_mean() {
        let g = Grid::new(21, 3, 0.0, 1.0, 0.5).unwrap();
        let k = Array2::from_shape_fn((21, 21), |(i, j)| (i * j) as f64 * 0.01 + 1.0);
        let m0 = GridMeasure::from_fn(&g, |x| 1.0 + x).unwrap();
        let kn = normalize_kernel(&g, k.view(), &m0).unwrap();
        let means = kn.dot(&m0.masses(&g));
        assert!(means.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn intrinsic_derivative_of_cosine() {
        let g = Grid::new(101, 3, 0.0, 1.0, 0.5).unwrap();
        let k = Array2::from_shape_fn((5, 101), |(_, j)| (PI * g.x(j)).cos());
        let d = intrinsic_derivative(&g, k.view()).unwrap();
        for j in 0..101 {
            assert_abs_diff_eq!(d[[2, j]], -PI * (PI * g.x(j)).sin(), epsilon = 2e-3);
        }
        let c = Array2::from_elem((3, 101), 2.5);
        assert!(intrinsic_derivative(&g, c.view()).unwrap().iter().all(|v| v.abs() < 1e-12));
        let narrow = Grid::new(3, 3, 0.0, 1.0, 0.5).unwrap();
        assert!(intrinsic_derivative(&narrow, Array2::zeros((3, 2)).view()).is_err());
    }
}
