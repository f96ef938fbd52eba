//! The master field `U(t0, x, m0) = u(t0, x)`, its measure derivatives, the
//! residual of the master equation, and the probes built on them.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::fit::{fit_rate, RateFit};
use crate::grid::Grid;
use crate::linearized::{
    fundamental_kernel, intrinsic_derivative, normalize_kernel, pair_kernel, GeneralLinearizedData,
    LinearizedOptions, LinearizedSystem,
};
use crate::measure::GridMeasure;
use crate::metrics::{holder_components, kantorovich_norm, wasserstein1, HolderComponents, HolderOrder};
use crate::mfg::{path_distance, solve_mfg, terminal_value, MfgOptions, MfgSolution};
use crate::model::{coupling_value, MfgModel};
use crate::stencil;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterOptions {
    pub mfg: MfgOptions,
    pub linearized: LinearizedOptions,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            mfg: MfgOptions::with_tol(1e-12),
            linearized: LinearizedOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterDiagnostics {
    pub n_x: usize,
    pub n_t: usize,
    pub iterations: usize,
    pub final_gap: f64,
    pub holder_u: HolderComponents,
    pub kernel_max_gap: Option<f64>,
    pub kernel_max_iterations: Option<usize>,
    /// `max_x |int K~(x, .) dm0|`.
    pub normalization_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSample {
    pub t0: f64,
    pub m0: GridMeasure,
    pub u: Array1<f64>,
    pub kernel: Option<Array2<f64>>,
    pub kernel_normalized: Option<Array2<f64>>,
    pub dm_u: Option<Array2<f64>>,
    pub dt_u: Option<Array1<f64>>,
    pub residual: Option<Array1<f64>>,
    pub diagnostics: MasterDiagnostics,
}

fn is_terminal(model: &MfgModel, t0: f64) -> bool {
    (t0 - model.grid.t_end()).abs() <= 1e-12 * (1.0 + model.grid.t_end().abs())
}

/// Model on `[t0, T]` over the same spatial lattice.
pub fn model_from(model: &MfgModel, t0: f64) -> Result<MfgModel> {
    if t0 < model.grid.t0() - 1e-12 || t0 > model.grid.t_end() {
        return Err(MfgError::InvalidInput(format!(
            "t0 = {t0} outside [{}, {}]",
            model.grid.t0(),
            model.grid.t_end()
        )));
    }
    if t0 == model.grid.t0() {
        return Ok(model.clone());
    }
    model.with_start(t0)
}

/// Solves the game from `(t0, m0)`; the returned model carries the time window used.
pub fn solve_from(model: &MfgModel, t0: f64, m0: &GridMeasure, options: &MasterOptions) -> Result<(MfgModel, MfgSolution)> {
    let local = model_from(model, t0)?;
    let sol = solve_mfg(&local, m0, &options.mfg)?;
    Ok((local, sol))
}

pub fn evaluate_master(model: &MfgModel, t0: f64, m0: &GridMeasure, options: &MasterOptions) -> Result<MasterSample> {
    model.grid.check_len(m0.len())?;
    if is_terminal(model, t0) {
        let u = terminal_value(model, m0.density())?;
        return sample_without_solve(model, t0, m0, u);
    }
    let (_, sol) = solve_from(model, t0, m0, options)?;
    sample_from_solution(model, t0, m0, &sol)
}

fn sample_without_solve(model: &MfgModel, t0: f64, m0: &GridMeasure, u: Array1<f64>) -> Result<MasterSample> {
    Ok(MasterSample {
        t0,
        m0: m0.clone(),
        diagnostics: MasterDiagnostics {
            n_x: model.grid.n_x(),
            n_t: 1,
            iterations: 0,
            final_gap: 0.0,
            holder_u: holder_components(&model.grid, u.view(), HolderOrder::TwoPlusAlpha)?,
            kernel_max_gap: None,
            kernel_max_iterations: None,
            normalization_defect: None,
        },
        u,
        kernel: None,
        kernel_normalized: None,
        dm_u: None,
        dt_u: None,
        residual: None,
    })
}

fn sample_from_solution(model: &MfgModel, t0: f64, m0: &GridMeasure, sol: &MfgSolution) -> Result<MasterSample> {
    let u = sol.u0().to_owned();
    let mut sample = sample_without_solve(model, t0, m0, u)?;
    sample.diagnostics.n_t = sol.grid.n_t();
    sample.diagnostics.iterations = sol.iterations;
    sample.diagnostics.final_gap = sol.final_gap;
    Ok(sample)
}

/// `U`, the kernel `K = dU/dm` (raw and normalized against `m0`) and `D_m U = D_y K`.
pub fn flat_derivative_field(model: &MfgModel, t0: f64, m0: &GridMeasure, options: &MasterOptions) -> Result<MasterSample> {
    if is_terminal(model, t0) {
        return Err(MfgError::InvalidInput("kernel requested at the terminal time".into()));
    }
    let (local, sol) = solve_from(model, t0, m0, options)?;
    let mut sample = sample_from_solution(model, t0, m0, &sol)?;
    let kernel = fundamental_kernel(&local, &sol, &options.linearized)?;
    attach_kernel(&model.grid, &mut sample, kernel.values, kernel.max_gap, kernel.max_iterations)?;
    Ok(sample)
}

fn attach_kernel(grid: &Grid, sample: &mut MasterSample, k: Array2<f64>, gap: f64, iterations: usize) -> Result<()> {
    let normalized = normalize_kernel(grid, k.view(), &sample.m0)?;
    let defect = normalized
        .dot(&sample.m0.masses(grid))
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    sample.dm_u = Some(intrinsic_derivative(grid, k.view())?);
    sample.kernel = Some(k);
    sample.kernel_normalized = Some(normalized);
    sample.diagnostics.kernel_max_gap = Some(gap);
    sample.diagnostics.kernel_max_iterations = Some(iterations);
    sample.diagnostics.normalization_defect = Some(defect);
    Ok(())
}

/// `(U(t0 + dt_probe) - U(t0)) / dt_probe`, with `dt_probe` defaulting to the grid step.
pub fn time_derivative_master(
    model: &MfgModel,
    t0: f64,
    m0: &GridMeasure,
    dt_probe: Option<f64>,
    options: &MasterOptions,
) -> Result<Array1<f64>> {
    let step = dt_probe.unwrap_or(model_from(model, t0)?.grid.dt());
    if !(step > 0.0) {
        return Err(MfgError::InvalidInput(format!("probe step {step}")));
    }
    let t1 = t0 + step;
    if t1 > model.grid.t_end() + 1e-12 {
        return Err(MfgError::InvalidInput(format!("probe time {t1} past T")));
    }
    let t1 = t1.min(model.grid.t_end());
    let u0 = evaluate_master(model, t0, m0, options)?.u;
    let u1 = evaluate_master(model, t1, m0, options)?.u;
    Ok((u1 - u0) / step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterResidual {
    pub sample: MasterSample,
    pub sup: f64,
    pub l2: f64,
    /// `|a U_x . nu|` at `x = 0` and `x = 1`, with the one-sided slope of
    /// the intrinsic derivative.
    pub boundary_x: [f64; 2],
    /// `max_x |a D_m U(x, y) . nu(y)|` over `y` in `{0, 1}`.
    pub boundary_y: f64,
}

/// Pointwise residual of the master equation at `(t0, ., m0)`.
pub fn master_residual(model: &MfgModel, t0: f64, m0: &GridMeasure, options: &MasterOptions) -> Result<MasterResidual> {
    let grid = &model.grid;
    let mut sample = flat_derivative_field(model, t0, m0, options)?;
    let dt_u = time_derivative_master(model, t0, m0, None, options)?;
    let h = model.hamiltonian.as_ref();
    let a = model.a.values();
    let n = grid.n_x();
    let dx = grid.dx();
    let u = sample.u.view();
    let ux = stencil::centered_gradient(u, dx);
    let uxx = stencil::ghost_laplacian(u, dx);
    let dm_u = sample.dm_u.as_ref().expect("attached above");
    let dy_dm_u = intrinsic_derivative(grid, dm_u.view())?;
    let masses = m0.masses(grid);
    let f = coupling_value(grid, &model.f, m0)?;
    let drift: Array1<f64> = Array1::from_shape_fn(n, |j| h.h_p(grid.x(j), ux[j]));
    let diffusion_weights = &masses * &a;
    let transport_weights = &masses * &drift;
    let measure_diffusion = dy_dm_u.dot(&diffusion_weights);
    let measure_transport = dm_u.dot(&transport_weights);
    let residual = Array1::from_shape_fn(n, |i| {
        -dt_u[i] - a[i] * uxx[i] + h.h(grid.x(i), ux[i]) - measure_diffusion[i] + measure_transport[i] - f[i]
    });
    let sup = residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let l2 = grid.integrate(residual.mapv(|v| v * v).view()).sqrt();
    let slopes = stencil::gradient_sharp_ends(u, dx);
    let boundary_x = [(a[0] * slopes[0]).abs(), (a[n - 1] * slopes[n - 1]).abs()];
    let boundary_y = (0..n)
        .map(|i| (a[0] * dm_u[[i, 0]]).abs().max((a[n - 1] * dm_u[[i, n - 1]]).abs()))
        .fold(0.0, f64::max);
    sample.dt_u = Some(dt_u);
    sample.residual = Some(residual);
    Ok(MasterResidual {
        sample,
        sup,
        l2,
        boundary_x,
        boundary_y,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub level: usize,
    pub t: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConsistency {
    pub rows: Vec<FlowRow>,
    pub max: f64,
}

/// Re-solves from `(t_k, m(t_k))` at the given levels of the baseline from
/// `(t0, m0)` and compares `U(t_k, ., m(t_k))` with `u(t_k, .)`.
pub fn probe_flow_consistency(
    model: &MfgModel,
    t0: f64,
    m0: &GridMeasure,
    levels: &[usize],
    options: &MasterOptions,
) -> Result<FlowConsistency> {
    let (local, base) = solve_from(model, t0, m0, options)?;
    let last = local.grid.n_t() - 1;
    if let Some(bad) = levels.iter().find(|l| **l > last) {
        return Err(MfgError::InvalidInput(format!("level {bad} beyond {last}")));
    }
    let rows: Vec<Result<FlowRow>> = levels
        .par_iter()
        .map(|&k| {
            let mk = base.measure(k);
            let fresh = if k == last {
                terminal_value(&local, mk.density())?
            } else {
                let sub = local.restrict_from(k)?;
                solve_mfg(&sub, &mk, &options.mfg)?.u0().to_owned()
            };
            let error = (&fresh - &base.u.level(k)).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            Ok(FlowRow {
                level: k,
                t: local.grid.time(k),
                error,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let max = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok(FlowConsistency { rows, max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRow {
    pub d1: f64,
    pub skipped: bool,
    pub note: Option<String>,
    /// `||U_1 - U_2||_inf / d1`.
    pub sup_ratio: f64,
    /// `||D(U_1 - U_2)||_inf / d1`.
    pub gradient_ratio: f64,
    /// `(sup + gradient + second derivative + Hölder quotient) / d1`.
    pub c2a_ratio: f64,
    /// Second-derivative Hölder quotient over `d1`.
    pub quotient_ratio: f64,
    /// `sup_t d1(m_1(t), m_2(t)) / d1`.
    pub flow_ratio: f64,
}

pub fn probe_lipschitz(
    model: &MfgModel,
    t0: f64,
    pairs: &[(GridMeasure, GridMeasure)],
    options: &MasterOptions,
) -> Result<Vec<LipschitzRow>> {
    let grid = &model.grid;
    pairs
        .par_iter()
        .map(|(a, b)| {
            let d1 = wasserstein1(grid, a, b)?;
            if d1 == 0.0 {
                return Ok(LipschitzRow {
                    d1,
                    skipped: true,
                    note: Some("identical measures".into()),
                    sup_ratio: 0.0,
                    gradient_ratio: 0.0,
                    c2a_ratio: 0.0,
                    quotient_ratio: 0.0,
                    flow_ratio: 0.0,
                });
            }
            let (local, s1) = solve_from(model, t0, a, options)?;
            let s2 = solve_mfg(&local, b, &options.mfg)?;
            let du = &s1.u0() - &s2.u0();
            let c: HolderComponents = holder_components(grid, du.view(), HolderOrder::TwoPlusAlpha)?;
            Ok(LipschitzRow {
                d1,
                skipped: false,
                note: None,
                sup_ratio: c.sups[0] / d1,
                gradient_ratio: c.sups[1] / d1,
                c2a_ratio: c.total() / d1,
                quotient_ratio: c.quotient / d1,
                flow_ratio: path_distance(&local.grid, &s1.m, &s2.m) / d1,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub s: f64,
    pub d1: f64,
    pub remainder: f64,
    /// `||<K, m_s - m0>||_inf`.
    pub linear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderProbe {
    pub rows: Vec<RemainderRow>,
    pub fit: Option<RateFit>,
    pub degenerate: bool,
    pub kernel_max_gap: f64,
}

/// Remainders below this, relative to `|U|`, count as rounding noise.
const DEGENERATE_REMAINDER: f64 = 1e-13;

/// Fits `log r(s)` against `log d1(m_s, m0)` where
/// `r(s) = ||U(m_s) - U(m0) - <K(m0), m_s - m0>||_inf` and `m_s = (1 - s) m0 + s m1`.
pub fn probe_remainder_order(
    model: &MfgModel,
    t0: f64,
    m0: &GridMeasure,
    m1: &GridMeasure,
    s_ladder: &[f64],
    options: &MasterOptions,
) -> Result<RemainderProbe> {
    if s_ladder.len() < 3 {
        return Err(MfgError::InvalidInput(format!("{} ladder points, need 3", s_ladder.len())));
    }
    if s_ladder.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) || s_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(MfgError::InvalidInput("ladder must decrease inside (0, 1]".into()));
    }
    let grid = &model.grid;
    let base = flat_derivative_field(model, t0, m0, options)?;
    let kernel = base.kernel.as_ref().expect("attached");
    let rows: Vec<Result<RemainderRow>> = s_ladder
        .par_iter()
        .map(|&s| {
            let ms = m0.mix(m1, s)?;
            let us = evaluate_master(model, t0, &ms, options)?.u;
            let direction = &ms.density() - &m0.density();
            let lin = pair_kernel(grid, kernel.view(), direction.view())?;
            let r = &us - &base.u - &lin;
            Ok(RemainderRow {
                s,
                d1: kantorovich_norm(grid, direction.view()),
                remainder: sup(r.view()),
                linear: sup(lin.view()),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let floor = DEGENERATE_REMAINDER * (1.0 + sup(base.u.view()));
    let degenerate = rows.iter().all(|r| r.remainder <= floor);
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.d1, r.remainder)).collect();
    let fit = if degenerate { None } else { fit_rate(&points).ok() };
    Ok(RemainderProbe {
        rows,
        fit,
        degenerate,
        kernel_max_gap: base.diagnostics.kernel_max_gap.unwrap_or(0.0),
    })
}

/// Cross-check of `D_m U(., y_j)` at interior nodes against a direct linear
/// solve whose initial datum is the discrete derivative of a point mass.
/// Returns `max |D_m U - v|` per node.
pub fn dipole_check(model: &MfgModel, t0: f64, m0: &GridMeasure, nodes: &[usize], options: &MasterOptions) -> Result<Vec<(usize, f64)>> {
    let sample = flat_derivative_field(model, t0, m0, options)?;
    let (local, sol) = solve_from(model, t0, m0, options)?;
    let system = LinearizedSystem::new(&local, &sol, &options.linearized)?;
    let grid = &model.grid;
    let n = grid.n_x();
    let w = grid.weights();
    let dm_u = sample.dm_u.as_ref().expect("attached");
    nodes
        .iter()
        .map(|&j| {
            if j == 0 || j + 1 >= n {
                return Err(MfgError::InvalidInput(format!("node {j} is not interior")));
            }
            let mut eta = Array1::zeros(n);
            eta[j + 1] = 1.0 / (2.0 * grid.dx() * w[j + 1]);
            eta[j - 1] = -1.0 / (2.0 * grid.dx() * w[j - 1]);
            let v = system.solve(&GeneralLinearizedData::initial(eta), &options.linearized)?;
            let err = (&v.z.level(0) - &dm_u.column(j)).iter().fold(0.0_f64, |m, e| m.max(e.abs()));
            Ok((j, err))
        })
        .collect()
}

fn sup(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn metadata_line(grid: &Grid, t0: f64) -> String {
    format!(
        "# n_x={},n_t={},t0={},T={},alpha={}",
        grid.n_x(),
        grid.n_t(),
        t0,
        grid.t_end(),
        grid.alpha()
    )
}

fn io_error(e: std::io::Error) -> MfgError {
    MfgError::InvalidInput(format!("io: {e}"))
}

fn write_vector(path: &Path, header: &str, grid: &Grid, name: &str, v: ArrayView1<f64>) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_error)?;
    writeln!(f, "{header}").map_err(io_error)?;
    writeln!(f, "x,{name}").map_err(io_error)?;
    for (j, value) in v.iter().enumerate() {
        writeln!(f, "{:.17e},{:.17e}", grid.x(j), value).map_err(io_error)?;
    }
    Ok(())
}

/// Dense matrix with a metadata comment line; rows are `x` nodes, columns `y` nodes.
pub fn write_matrix(path: &Path, header: &str, m: ArrayView2<f64>) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_error)?;
    writeln!(f, "{header}").map_err(io_error)?;
    for row in m.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{}", line.join(",")).map_err(io_error)?;
    }
    Ok(())
}

impl MasterSample {
    /// Writes `U.csv`, `K.csv`, `DmU.csv`, `residual.csv` (when present) and `diagnostics.json`.
    pub fn write_dir(&self, dir: &Path, grid: &Grid) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_error)?;
        let header = metadata_line(grid, self.t0);
        write_vector(&dir.join("U.csv"), &header, grid, "U", self.u.view())?;
        if let Some(k) = &self.kernel {
            write_matrix(&dir.join("K.csv"), &header, k.view())?;
        }
        if let Some(d) = &self.dm_u {
            write_matrix(&dir.join("DmU.csv"), &header, d.view())?;
        }
        if let Some(r) = &self.residual {
            write_vector(&dir.join("residual.csv"), &header, grid, "residual", r.view())?;
        }
        let text = serde_json::to_string_pretty(&self.diagnostics)
            .map_err(|e| MfgError::InvalidInput(format!("json: {e}")))?;
        fs::write(dir.join("diagnostics.json"), text).map_err(io_error)
    }
}
