use ndarray::{Array1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CouplingKernel, MfgModel};
use crate::grid::Grid;
use crate::metrics::{kernel_holder_norm, HolderOrder};
use crate::stencil::neumann_compatible;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

const P_RANGE: f64 = 10.0;
const P_SAMPLES: usize = 201;
const FD_STEP: f64 = 1e-5;

/// Sampled checks of ellipticity, convexity and growth of `H`, monotonicity
/// of the couplings on `n_random_pairs` random pairs of measures, and the
/// zero-slope condition of the kernels at the walls.
pub fn validate_hypotheses(model: &MfgModel, n_random_pairs: usize, seed: u64) -> ValidationReport {
    let grid = &model.grid;
    let mut checks = Vec::new();

    checks.push(HypothesisCheck {
        name: "ellipticity".into(),
        passed: model.a.lambda() > 0.0 && model.a.mu().is_finite(),
        worst: model.a.lambda(),
        detail: format!("lambda = {}, mu = {}", model.a.lambda(), model.a.mu()),
    });

    let h = model.hamiltonian.as_ref();
    let mut min_hpp = f64::INFINITY;
    let mut max_hpp = f64::NEG_INFINITY;
    let mut max_hp = 0.0_f64;
    let mut fd_defect = 0.0_f64;
    for j in 0..grid.n_x() {
        let x = grid.x(j);
        for k in 0..P_SAMPLES {
            let p = -P_RANGE + 2.0 * P_RANGE * k as f64 / (P_SAMPLES - 1) as f64;
            let hpp = h.h_pp(x, p);
            min_hpp = min_hpp.min(hpp);
            max_hpp = max_hpp.max(hpp);
            max_hp = max_hp.max(h.h_p(x, p).abs());
            let d1 = (h.h(x, p + FD_STEP) - h.h(x, p - FD_STEP)) / (2.0 * FD_STEP);
            let d2 = (h.h_p(x, p + FD_STEP) - h.h_p(x, p - FD_STEP)) / (2.0 * FD_STEP);
            let scale = 1.0 + h.h(x, p).abs();
            fd_defect = fd_defect
                .max((d1 - h.h_p(x, p)).abs() / scale)
                .max((d2 - hpp).abs() / (1.0 + hpp.abs()));
        }
    }
    checks.push(HypothesisCheck {
        name: "convexity".into(),
        passed: min_hpp > 0.0 && max_hpp <= h.hpp_upper() * (1.0 + 1e-12),
        worst: min_hpp,
        detail: format!("H_pp in [{min_hpp:e}, {max_hpp:e}], declared upper {}", h.hpp_upper()),
    });
    checks.push(HypothesisCheck {
        name: "lipschitz".into(),
        passed: max_hp <= h.lip_p() * (1.0 + 1e-12) + 1e-14,
        worst: max_hp,
        detail: format!("max |H_p| = {max_hp}, declared {}", h.lip_p()),
    });
    checks.push(HypothesisCheck {
        name: "derivatives".into(),
        passed: fd_defect < 1e-6,
        worst: fd_defect,
        detail: "relative mismatch of H_p and H_pp against centered differences".into(),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Array1<f64>> = (0..n_random_pairs)
        .map(|_| random_density(grid, &mut rng) - random_density(grid, &mut rng))
        .collect();
    for (name, kernel) in [("monotonicity_F", &model.f), ("monotonicity_G", &model.g)] {
        let worst = probes
            .iter()
            .map(|rho| quadratic_form(grid, kernel, rho))
            .fold(f64::INFINITY, f64::min);
        let worst = if probes.is_empty() { 0.0 } else { worst };
        checks.push(HypothesisCheck {
            name: name.into(),
            passed: worst >= -1e-12,
            worst,
            detail: format!("min of int int k d(rho) d(rho) over {n_random_pairs} pairs"),
        });
    }

    let dx = grid.dx();
    let rows_ok = |k: &CouplingKernel| k.values().axis_iter(Axis(0)).all(|r| neumann_compatible(r, dx));
    let cols_ok = |k: &CouplingKernel| k.values().axis_iter(Axis(1)).all(|c| neumann_compatible(c, dx));
    let f_ok = rows_ok(&model.f);
    let g_ok = rows_ok(&model.g) && cols_ok(&model.g);
    checks.push(HypothesisCheck {
        name: "neumann_F".into(),
        passed: f_ok,
        worst: if f_ok { 0.0 } else { 1.0 },
        detail: "zero slope of k_F(x, .) at the walls".into(),
    });
    checks.push(HypothesisCheck {
        name: "neumann_G".into(),
        passed: g_ok,
        worst: if g_ok { 0.0 } else { 1.0 },
        detail: "zero slope of k_G in both variables at the walls".into(),
    });

    for (name, kernel) in [("regularity_F", &model.f), ("regularity_G", &model.g)] {
        let norm = kernel_holder_norm(grid, kernel.values(), HolderOrder::Alpha, HolderOrder::TwoPlusAlpha)
            .unwrap_or(f64::INFINITY);
        checks.push(HypothesisCheck {
            name: name.into(),
            passed: norm.is_finite(),
            worst: norm,
            detail: "discrete C^a in x and C^(2+a) in y norm of the kernel".into(),
        });
    }

    ValidationReport { checks }
}

fn quadratic_form(grid: &Grid, kernel: &CouplingKernel, rho: &Array1<f64>) -> f64 {
    let w = rho * grid.weights();
    w.dot(&kernel.values().dot(&w))
}

/// Smooth random positive density with unit mass.
pub(crate) fn random_density(grid: &Grid, rng: &mut impl Rng) -> Array1<f64> {
    let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let shift: f64 = rng.gen_range(0.0..1.0);
    let v = grid.nodes().mapv(|x| {
        let s: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c * ((n + 1) as f64 * std::f64::consts::PI * (x + shift)).sin())
            .sum();
        s.exp()
    });
    let mass = grid.integrate(v.view());
    v / mass
}
