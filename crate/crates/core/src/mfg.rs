//! Damped fixed-point iteration for the coupled backward/forward system and
//! the monotonicity diagnostics.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::field::SpaceTimeField;
use crate::grid::Grid;
use crate::measure::GridMeasure;
use crate::metrics::kantorovich_norm;
use crate::model::MfgModel;
use crate::parabolic::{
    coupling_path, hamiltonian_drift, solve_fokker_planck_forward, solve_hjb_backward, BackwardOperator,
};
use crate::stencil;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfgOptions {
    /// Weight `theta` of the new path in `(1 - theta) m^k + theta Phi(m^k)`.
    pub damping: f64,
    /// Stop once `sup_t d_1` between successive paths drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive non-decreasing gaps that trigger running averages.
    pub stall_window: usize,
}

impl Default for MfgOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-8,
            max_iter: 200,
            stall_window: 5,
        }
    }
}

impl MfgOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(MfgError::InvalidInput(format!("damping {} not in (0, 1]", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(MfgError::InvalidInput(format!("tolerance {} must be positive", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfgResiduals {
    /// `sup_t d_1` between the returned path and the density driven by the returned `u`.
    pub fokker_planck: f64,
    /// `max_n |mass(m^n) - mass(m^0)|`.
    pub mass_drift: f64,
    pub min_density: f64,
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfgSolution {
    pub grid: Grid,
    pub u: SpaceTimeField,
    /// Density path, one row per level.
    pub m: SpaceTimeField,
    pub iterations: usize,
    pub final_gap: f64,
    pub gap_history: Vec<f64>,
    pub fictitious_play: bool,
    pub residuals: MfgResiduals,
    /// Whether `m0` has zero slope at the walls; reported, not required.
    pub m0_compatible: bool,
}

impl MfgSolution {
    pub fn measure(&self, level: usize) -> GridMeasure {
        GridMeasure::from_raw(self.m.level(level).to_owned())
    }

    pub fn u0(&self) -> ArrayView1<'_, f64> {
        self.u.level(0)
    }
}

/// `Phi(beta)`: value function with couplings frozen along `beta`, and the
/// density path it drives from `beta(t0)`.
pub fn fixed_point_map(model: &MfgModel, beta: &SpaceTimeField) -> Result<(SpaceTimeField, SpaceTimeField)> {
    let g = terminal_value(model, beta.last())?;
    let u = solve_hjb_backward(model, beta, g.view())?;
    let m = density_driven_by(model, &u, beta.level(0))?;
    Ok((m, u))
}

/// Density path with drift `H_p(x, u_x) + b~` started from `m0`.
pub fn density_driven_by(model: &MfgModel, u: &SpaceTimeField, m0: ArrayView1<f64>) -> Result<SpaceTimeField> {
    let op = BackwardOperator::new(&model.grid, &model.a, hamiltonian_drift(model, u))?;
    solve_fokker_planck_forward(&op, &model.grid, m0, None)
}

/// `G(., m)` for a density.
pub fn terminal_value(model: &MfgModel, m: ArrayView1<f64>) -> Result<Array1<f64>> {
    model.g.apply(&model.grid, m)
}

/// `sup_t d_1(a(t), b(t))` over two density paths of equal mass.
pub fn path_distance(grid: &Grid, a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    (0..a.n_levels())
        .map(|n| kantorovich_norm(grid, (&a.level(n) - &b.level(n)).view()))
        .fold(0.0, f64::max)
}

fn check_cfl(model: &MfgModel) -> Result<()> {
    let cfl = model.cfl_number();
    if cfl > 1.0 + 1e-12 {
        return Err(MfgError::Cfl(cfl));
    }
    Ok(())
}

/// Default first guess: the density path driven by `u = 0`.
pub fn initial_path(model: &MfgModel, m0: &GridMeasure) -> Result<SpaceTimeField> {
    density_driven_by(model, &SpaceTimeField::zeros(&model.grid), m0.density())
}

pub fn solve_mfg(model: &MfgModel, m0: &GridMeasure, options: &MfgOptions) -> Result<MfgSolution> {
    model.grid.check_len(m0.len())?;
    check_cfl(model)?;
    let guess = initial_path(model, m0)?;
    solve_mfg_from(model, &guess, options)
}

/// Iterates from a given density path whose first level is `m0`.
pub fn solve_mfg_from(model: &MfgModel, guess: &SpaceTimeField, options: &MfgOptions) -> Result<MfgSolution> {
    options.check()?;
    check_cfl(model)?;
    let grid = &model.grid;
    if guess.n_levels() != grid.n_t() || guess.n_x() != grid.n_x() {
        return Err(MfgError::GridMismatch {
            expected: grid.n_x(),
            found: guess.n_x(),
        });
    }
    let mut m = guess.clone();
    let mut history = Vec::new();
    let mut averaging = false;
    for k in 1..=options.max_iter {
        let (phi, _) = fixed_point_map(model, &m)?;
        let weight = if averaging { 1.0 / (k as f64 + 1.0) } else { options.damping };
        let mut next = m.blend(&phi, weight);
        next.level_mut(0).assign(&guess.level(0));
        let gap = path_distance(grid, &m, &next);
        history.push(gap);
        m = next;
        if gap < options.tol {
            return finish(model, m, k, history, averaging);
        }
        if !averaging && stalled(&history, options.stall_window) {
            averaging = true;
        }
    }
    Err(MfgError::NonConvergence {
        iterations: options.max_iter,
        last_gap: history.last().copied().unwrap_or(f64::NAN),
        gap_history: history,
    })
}

fn stalled(history: &[f64], window: usize) -> bool {
    window > 0 && history.len() > window && history[history.len() - window - 1..].windows(2).all(|w| w[1] >= w[0])
}

fn finish(model: &MfgModel, m: SpaceTimeField, iterations: usize, history: Vec<f64>, averaging: bool) -> Result<MfgSolution> {
    let grid = &model.grid;
    let g = terminal_value(model, m.last())?;
    let u = solve_hjb_backward(model, &m, g.view())?;
    let driven = density_driven_by(model, &u, m.level(0))?;
    let masses = m.masses(grid);
    let mass_drift = masses.iter().map(|v| (v - masses[0]).abs()).fold(0.0, f64::max);
    let residuals = MfgResiduals {
        fokker_planck: path_distance(grid, &m, &driven),
        mass_drift,
        min_density: m.min(),
        cfl: model.cfl_number(),
    };
    Ok(MfgSolution {
        grid: grid.clone(),
        m0_compatible: stencil::neumann_compatible(m.level(0), grid.dx()),
        u,
        m,
        iterations,
        final_gap: *history.last().unwrap_or(&0.0),
        gap_history: history,
        fictitious_play: averaging,
        residuals,
    })
}

/// Terms of the discrete monotonicity identity
/// `lhs + coupling + terminal = rhs` with `rhs = int (u_1 - u_2)(t0) d(m_01 - m_02)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityGap {
    /// Sum of the two Bregman integrals.
    pub lhs: f64,
    pub rhs: f64,
    pub bregman: [f64; 2],
    /// Smallest Bregman integrand value encountered.
    pub min_integrand: f64,
    /// `sum dt int (F_1 - F_2) d(m_1 - m_2)`, non-negative for monotone `F`.
    pub coupling: f64,
    /// `int (G_1 - G_2) d(m_1(T) - m_2(T))`, non-negative for monotone `G`.
    pub terminal: f64,
    /// `|lhs + coupling + terminal - rhs|`.
    pub identity_defect: f64,
}

pub fn monotonicity_gap(model: &MfgModel, sol1: &MfgSolution, sol2: &MfgSolution) -> Result<MonotonicityGap> {
    let grid = &model.grid;
    for sol in [sol1, sol2] {
        if sol.grid.n_x() != grid.n_x() || sol.grid.n_t() != grid.n_t() {
            return Err(MfgError::GridMismatch {
                expected: grid.n_x(),
                found: sol.grid.n_x(),
            });
        }
    }
    let h = model.hamiltonian.as_ref();
    let dt = grid.dt();
    let n_t = grid.n_t();
    let w = grid.weights();
    let op = BackwardOperator::new(grid, &model.a, crate::parabolic::UpwindDrift::zero(grid))?;
    let f1 = coupling_path(model, &sol1.m)?;
    let f2 = coupling_path(model, &sol2.m)?;

    let mut bregman = [0.0; 2];
    let mut min_integrand = 0.0_f64;
    let mut coupling = 0.0;
    for n in 0..n_t - 1 {
        let p1 = stencil::centered_gradient(sol1.u.level(n + 1), grid.dx());
        let p2 = stencil::centered_gradient(sol2.u.level(n + 1), grid.dx());
        let smoothed = [
            op.implicit_solve_transpose((&sol1.m.level(n) * w).view()),
            op.implicit_solve_transpose((&sol2.m.level(n) * w).view()),
        ];
        for j in 0..grid.n_x() {
            let x = grid.x(j);
            let b1 = h.h(x, p2[j]) - h.h(x, p1[j]) - h.h_p(x, p1[j]) * (p2[j] - p1[j]);
            let b2 = h.h(x, p1[j]) - h.h(x, p2[j]) - h.h_p(x, p2[j]) * (p1[j] - p2[j]);
            min_integrand = min_integrand.min(b1).min(b2);
            bregman[0] += dt * smoothed[0][j] * b1;
            bregman[1] += dt * smoothed[1][j] * b2;
        }
        let dm = &sol1.m.level(n) - &sol2.m.level(n);
        let df = &f1.level(n) - &f2.level(n);
        coupling += dt * grid.pairing(dm.view(), df.view());
    }
    let dm_t = &sol1.m.last() - &sol2.m.last();
    let dg = &sol1.u.last() - &sol2.u.last();
    let terminal = grid.pairing(dm_t.view(), dg.view());
    let dm0 = &sol1.m.level(0) - &sol2.m.level(0);
    let du0 = &sol1.u.level(0) - &sol2.u.level(0);
    let rhs = grid.pairing(du0.view(), dm0.view());
    let lhs = bregman[0] + bregman[1];
    Ok(MonotonicityGap {
        lhs,
        rhs,
        bregman,
        min_integrand,
        coupling,
        terminal,
        identity_defect: (lhs + coupling + terminal - rhs).abs(),
    })
}
