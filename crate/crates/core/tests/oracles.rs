//! Closed-form and cross-solver oracles for the schemes.

use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use mfgmaster_core::linearized::{solve_linearized_general, solve_linearized_mfg, GeneralLinearizedData, LinearizedOptions};
use mfgmaster_core::master::{evaluate_master, time_derivative_master, MasterOptions};
use mfgmaster_core::metrics::{lp_spacetime_norm, wasserstein1};
use mfgmaster_core::mfg::{density_driven_by, path_distance, solve_mfg, solve_mfg_from, MfgOptions};
use mfgmaster_core::model::{coupling_flat_derivative, coupling_value, CouplingKernel, EllipticCoefficient, Hamiltonian, Sqrt1p, ZeroHamiltonian};
use mfgmaster_core::parabolic::{
    hamiltonian_drift, numerical_hamiltonian, solve_fokker_planck_forward, solve_hjb_backward, solve_linear_backward,
    BackwardOperator, UpwindDrift,
};
use mfgmaster_core::{stencil, Grid, GridMeasure, MfgModel, SpaceTimeField};
use ndarray::{Array1, Array2};

fn heat_grid(n_x: usize, n_t: usize) -> Grid {
    Grid::new(n_x, n_t, 0.0, 0.1, 0.5).unwrap()
}

fn backward_heat_error(n_x: usize, n_t: usize) -> f64 {
    let grid = heat_grid(n_x, n_t);
    let a = EllipticCoefficient::constant(&grid, 1.0).unwrap();
    let op = BackwardOperator::new(&grid, &a, UpwindDrift::zero(&grid)).unwrap();
    let xi = grid.nodes().mapv(|x| (PI * x).cos());
    let phi = solve_linear_backward(&op, xi.view(), &SpaceTimeField::zeros(&grid)).unwrap();
    let exact = SpaceTimeField::from_fn(&grid, |t, x| (-PI * PI * (0.1 - t)).exp() * (PI * x).cos());
    phi.sub(&exact).sup_abs()
}

#[test]
fn backward_cosine_mode_error_quarters_under_joint_refinement() {
    let coarse = backward_heat_error(41, 101);
    let fine = backward_heat_error(81, 401);
    let ratio = coarse / fine;
    assert!(coarse < 1e-2, "{coarse}");
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

fn frozen_heat_error(n_x: usize, n_t: usize) -> f64 {
    let grid = heat_grid(n_x, n_t);
    let a = EllipticCoefficient::constant(&grid, 1.0).unwrap();
    let model = MfgModel::new(
        grid.clone(),
        a,
        Arc::new(ZeroHamiltonian),
        CouplingKernel::zero(&grid),
        CouplingKernel::zero(&grid),
    )
    .unwrap();
    let modes = [(1.0, 0.0), (0.3, 1.0), (0.2, 2.0), (-0.1, 3.0)];
    let m0 = grid.nodes().mapv(|x| modes.iter().map(|(c, k)| c * (k * PI * x).cos()).sum::<f64>());
    let u = SpaceTimeField::from_fn(&grid, |t, x| t * (PI * x).sin());
    let m = density_driven_by(&model, &u, m0.view()).unwrap();
    let exact = SpaceTimeField::from_fn(&grid, |t, x| {
        modes
            .iter()
            .map(|(c, k)| c * (-k * k * PI * PI * t).exp() * (k * PI * x).cos())
            .sum::<f64>()
    });
    m.sub(&exact).sup_abs()
}

#[test]
fn frozen_drift_density_is_the_heat_flow_of_each_mode() {
    let coarse = frozen_heat_error(41, 101);
    let fine = frozen_heat_error(81, 401);
    assert!(coarse < 5e-2, "{coarse}");
    assert!((3.5..4.5).contains(&(coarse / fine)), "{coarse} {fine}");
}

#[test]
fn forward_density_with_flux_source_matches_manufactured_solution() {
    // mu = 1 + e^{-t} cos(pi x) solves mu_t - mu_xx = (c)_x with c = (pi^2 - 1)/pi e^{-t} sin(pi x).
    let err = |n_x: usize, n_t: usize| {
        let grid = heat_grid(n_x, n_t);
        let a = EllipticCoefficient::constant(&grid, 1.0).unwrap();
        let op = BackwardOperator::new(&grid, &a, UpwindDrift::zero(&grid)).unwrap();
        let k = (PI * PI - 1.0) / PI;
        let c = SpaceTimeField::from_fn(&grid, |t, x| k * (-t).exp() * (PI * x).sin());
        let mu0 = grid.nodes().mapv(|x| 1.0 + (PI * x).cos());
        let mu = solve_fokker_planck_forward(&op, &grid, mu0.view(), Some(&c)).unwrap();
        let exact = SpaceTimeField::from_fn(&grid, |t, x| 1.0 + (-t).exp() * (PI * x).cos());
        mu.sub(&exact).sup_abs()
    };
    let coarse = err(41, 101);
    let fine = err(81, 401);
    assert!(coarse < 1e-2);
    assert!(coarse / fine > 3.0, "{coarse} {fine}");
}

fn sqrt1p_decoupled(n_x: usize, n_t: usize) -> MfgModel {
    let grid = Grid::new(n_x, n_t, 0.0, 1.0, 0.5).unwrap();
    let a = EllipticCoefficient::constant(&grid, 1.0).unwrap();
    MfgModel::new(
        grid.clone(),
        a,
        Arc::new(Sqrt1p::default()),
        CouplingKernel::zero(&grid),
        CouplingKernel::zero(&grid),
    )
    .unwrap()
}

#[test]
fn small_terminal_data_follow_the_linearized_equation() {
    let model = sqrt1p_decoupled(41, 81);
    let grid = &model.grid;
    let m = SpaceTimeField::constant_in_time(grid, GridMeasure::uniform(grid).density()).unwrap();
    let zero_u = SpaceTimeField::zeros(grid);
    let op = BackwardOperator::new(grid, &model.a, hamiltonian_drift(&model, &zero_u)).unwrap();
    let shape = grid.nodes().mapv(|x| (PI * x).cos());
    let phi = solve_linear_backward(&op, shape.view(), &SpaceTimeField::zeros(grid)).unwrap();
    let defect = |eps: f64| {
        let u = solve_hjb_backward(&model, &m, (&shape * eps).view()).unwrap();
        u.sub(&phi.scale(eps)).sup_abs()
    };
    let (d1, d2) = (defect(1e-3), defect(5e-4));
    assert!(d1 < 1e-5, "{d1}");
    assert!((3.5..4.5).contains(&(d1 / d2)), "{d1} {d2}");
}

/// Remainder data of the linearized system built from two solutions of the
/// scheme: with `(z, rho) = (u1 - u2 - v, m1 - m2 - mu)` the source `h`
/// carries the second-order part of the numerical Hamiltonian and `c` the
/// second-order part of the transport flux.
#[test]
fn remainder_pair_solves_the_general_linear_system() {
    let model = MfgModel::reference(31, 61).unwrap();
    let grid = model.grid.clone();
    let (n_t, n_x) = (grid.n_t(), grid.n_x());
    let dt = grid.dt();
    let w = grid.weights().clone();
    let opts = MfgOptions::with_tol(1e-13);
    let m01 = GridMeasure::from_fn(&grid, |x| 1.0 + 0.4 * (PI * x).cos()).unwrap();
    let m02 = GridMeasure::from_fn(&grid, |x| 1.0 + 0.3 * (PI * x).cos() + 0.1 * (2.0 * PI * x).cos()).unwrap();
    let s1 = solve_mfg(&model, &m01, &opts).unwrap();
    let s2 = solve_mfg(&model, &m02, &opts).unwrap();
    let lin = LinearizedOptions {
        tol: 1e-13,
        max_iter: 1000,
        ..LinearizedOptions::default()
    };
    let mu0 = &m01.density() - &m02.density();
    let v = solve_linearized_mfg(&model, &s2, mu0.view(), &lin).unwrap();

    let h = model.hamiltonian.as_ref();
    let op2 = BackwardOperator::new(&grid, &model.a, hamiltonian_drift(&model, &s2.u)).unwrap();
    let du = s1.u.sub(&s2.u);
    let mut h_data = Array2::zeros((n_t, n_x));
    let mut c_data = Array2::zeros((n_t, n_x));
    for n in 0..n_t - 1 {
        let (u1, u2, d) = (s1.u.level(n + 1), s2.u.level(n + 1), du.level(n + 1));
        let lambda_d = (&d - &op2.apply_explicit(n + 1, d)) / dt;
        let r = numerical_hamiltonian(&model, u1) - numerical_hamiltonian(&model, u2) - lambda_d;
        h_data.row_mut(n).assign(&-op2.implicit_solve(r.view()));

        let p1 = stencil::centered_gradient(u1, grid.dx());
        let p2 = stencil::centered_gradient(u2, grid.dx());
        let pd = stencil::centered_gradient(d, grid.dx());
        let sm1 = op2.implicit_solve_transpose((&s1.m.level(n) * &w).view());
        let sm2 = op2.implicit_solve_transpose((&s2.m.level(n) * &w).view());
        for j in 0..n_x {
            let x = grid.x(j);
            c_data[[n, j]] = ((h.h_p(x, p1[j]) - h.h_p(x, p2[j])) * sm1[j] - h.h_pp(x, p2[j]) * sm2[j] * pd[j]) / w[j];
        }
    }
    let data = GeneralLinearizedData {
        z_terminal: Array1::zeros(n_x),
        rho0: Array1::zeros(n_x),
        h: Some(SpaceTimeField::from_array(&grid, h_data).unwrap()),
        c: Some(SpaceTimeField::from_array(&grid, c_data).unwrap()),
    };
    let zr = solve_linearized_general(&model, &s2, &data, &lin).unwrap();

    let z_expected = du.sub(&v.z);
    let rho_expected = s1.m.sub(&s2.m).sub(&v.rho);
    let size = z_expected.sup_abs();
    assert!(size > 1e-7, "remainder too small to test: {size}");
    assert!(zr.z.sub(&z_expected).sup_abs() < 1e-6 * size, "{} vs {size}", zr.z.sub(&z_expected).sup_abs());
    assert!(zr.rho.sub(&rho_expected).sup_abs() < 1e-6 * rho_expected.sup_abs());
    // The linear part is much larger than the remainder.
    assert!(v.z.sup_abs() > 20.0 * size);
}

#[test]
fn decoupled_general_system_is_the_linear_backward_solve() {
    let model = sqrt1p_decoupled(21, 41);
    let grid = &model.grid;
    let baseline = solve_mfg(&model, &GridMeasure::uniform(grid), &MfgOptions::default()).unwrap();
    let h = SpaceTimeField::from_fn(grid, |t, x| t * (2.0 * PI * x).cos());
    let z_t = grid.nodes().mapv(|x| (PI * x).cos());
    let data = GeneralLinearizedData {
        z_terminal: z_t.clone(),
        rho0: Array1::zeros(grid.n_x()),
        h: Some(h.clone()),
        c: None,
    };
    let sol = solve_linearized_general(&model, &baseline, &data, &LinearizedOptions::default()).unwrap();
    let op = BackwardOperator::new(grid, &model.a, hamiltonian_drift(&model, &baseline.u)).unwrap();
    let direct = solve_linear_backward(&op, z_t.view(), &h).unwrap();
    assert!(sol.z.sub(&direct).sup_abs() < 1e-13);
}

/// `G(x, m) = 0.3 cos(pi x)` for every probability `m` and `F = 0`, so `U`
/// does not depend on `m` and `dU/dt = -a G_xx + H(x, G_x)` at `T`.
fn measure_free_model(n_x: usize, n_t: usize) -> MfgModel {
    let grid = Grid::new(n_x, n_t, 0.0, 1.0, 0.5).unwrap();
    let a = EllipticCoefficient::constant(&grid, 1.0).unwrap();
    let g = CouplingKernel::from_fn(&grid, |x, _| 0.3 * (PI * x).cos());
    MfgModel::new(grid.clone(), a, Arc::new(Sqrt1p::default()), CouplingKernel::zero(&grid), g).unwrap()
}

#[test]
fn time_derivative_near_the_terminal_time() {
    let err = |n_x: usize, n_t: usize| {
        let model = measure_free_model(n_x, n_t);
        let grid = &model.grid;
        let m0 = GridMeasure::from_fn(grid, |x| 1.0 + 0.5 * x).unwrap();
        let t0 = grid.time(n_t - 2);
        let dtu = time_derivative_master(&model, t0, &m0, None, &MasterOptions::default()).unwrap();
        let h = Sqrt1p::default();
        let exact = grid.nodes().mapv(|x| 0.3 * PI * PI * (PI * x).cos() + h.h(x, -0.3 * PI * (PI * x).sin()));
        (&dtu - &exact).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    };
    let coarse = err(41, 401);
    let fine = err(81, 1601);
    assert!(coarse < 0.1, "{coarse}");
    assert!(coarse / fine > 1.6, "{coarse} {fine}");
}

#[test]
fn halving_the_probe_halves_the_one_sided_error() {
    let model = MfgModel::reference(31, 161).unwrap();
    let grid = &model.grid;
    let opts = MasterOptions::default();
    let m0 = GridMeasure::from_fn(grid, |x| 1.0 + 0.5 * (PI * x).cos()).unwrap();
    let t0 = 0.5;
    let probe = |k: usize| time_derivative_master(&model, t0, &m0, Some(k as f64 * grid.dt()), &opts).unwrap();
    let (d8, d4, d2) = (probe(8), probe(4), probe(2));
    let extrapolated = &d2 * 2.0 - &d4;
    let e = |d: &Array1<f64>| (d - &extrapolated).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let ratio = e(&d8) / e(&d4);
    assert!((1.7..2.5).contains(&ratio), "ratio {ratio}");
    let u = evaluate_master(&model, t0, &m0, &opts).unwrap().u;
    assert!(u.iter().all(|v| v.is_finite()));
}

#[test]
fn cosine_kernel_couplings() {
    let grid = Grid::new(41, 3, 0.0, 1.0, 0.5).unwrap();
    let k = CouplingKernel::from_cosine(&grid, &[0.0, 1.0]);
    let f = coupling_value(&grid, &k, &GridMeasure::uniform(&grid)).unwrap();
    assert!(f.iter().all(|v| v.abs() < 1e-14), "{f:?}");

    let slope = |n: usize| {
        let g = Grid::new(n, 3, 0.0, 1.0, 0.5).unwrap();
        let k = CouplingKernel::from_cosine(&g, &[0.0, 1.0]);
        (coupling_flat_derivative(&k, 3, 1).unwrap() - coupling_flat_derivative(&k, 3, 0).unwrap()).abs()
    };
    let (h1, h2) = (slope(21), slope(41));
    let ratio = h1 / h2;
    assert!(h1 > 0.0 && (3.5..4.5).contains(&ratio), "{h1} {h2}");
}

#[test]
fn density_differences_are_controlled_by_the_initial_distance() {
    let model = MfgModel::reference(31, 61).unwrap();
    let grid = &model.grid;
    let opts = MfgOptions::with_tol(1e-12);
    let base = GridMeasure::from_fn(grid, |x| 1.0 + 0.5 * (PI * x).cos()).unwrap();
    let base_sol = solve_mfg(&model, &base, &opts).unwrap();
    for center in [0.2, 0.5, 0.8] {
        let bump = GridMeasure::from_fn(grid, |x| (-(x - center) * (x - center) / 0.02).exp() + 0.1).unwrap();
        let other = base.mix(&bump, 0.1).unwrap();
        let sol = solve_mfg(&model, &other, &opts).unwrap();
        let d1 = wasserstein1(grid, &base, &other).unwrap();
        let lp = lp_spacetime_norm(grid, sol.m.sub(&base_sol.m).values(), grid.alpha()).unwrap();
        let ratio = lp / d1;
        assert!(ratio.is_finite() && ratio > 0.0, "{ratio}");
    }
}

#[test]
fn monotone_short_horizon_gaps_decrease_and_guesses_agree() {
    let mut model = MfgModel::reference(41, 41).unwrap();
    model = model.with_grid(Grid::new(41, 41, 0.0, 0.2, 0.5).unwrap()).unwrap();
    let grid = &model.grid;
    let m0 = GridMeasure::from_fn(grid, |x| (-(x - 0.3) * (x - 0.3) / 0.02).exp() + 0.2).unwrap();
    let opts = MfgOptions::with_tol(1e-11);
    let first = solve_mfg(&model, &m0, &opts).unwrap();
    assert!(first.gap_history.windows(2).all(|w| w[1] < w[0]), "{:?}", first.gap_history);
    let frozen = SpaceTimeField::constant_in_time(grid, m0.density()).unwrap();
    let second = solve_mfg_from(&model, &frozen, &opts).unwrap();
    assert!(first.u.sub(&second.u).sup_abs() <= 10.0 * opts.tol);
    assert!(path_distance(grid, &first.m, &second.m) <= 10.0 * opts.tol);
}

#[test]
fn master_value_is_uniformly_regular_over_random_measures() {
    use mfgmaster_core::metrics::{discrete_holder_norm, HolderOrder};
    let model = MfgModel::reference(31, 61).unwrap();
    let grid = &model.grid;
    let mut worst = 0.0_f64;
    for k in 0..20 {
        let c = k as f64 / 19.0;
        let m0 = GridMeasure::from_fn(grid, |x| (-(x - c) * (x - c) / 0.01).exp() + 0.05 * (k % 3) as f64).unwrap();
        let u = evaluate_master(&model, 0.0, &m0, &MasterOptions::default()).unwrap().u;
        worst = worst.max(discrete_holder_norm(grid, u.view(), HolderOrder::TwoPlusAlpha).unwrap());
    }
    assert!(worst.is_finite() && worst > 0.0);
}

#[test]
fn affine_coefficient_slope_is_exact() {
    let grid = Grid::new(17, 3, 0.0, 1.0, 0.5).unwrap();
    let a = EllipticCoefficient::affine(&grid, 1.0, 0.25).unwrap();
    for v in a.slope() {
        assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-13);
    }
}

#[test]
fn kernel_regularity_is_uniform_over_baselines() {
    use mfgmaster_core::linearized::fundamental_kernel;
    use mfgmaster_core::metrics::{kernel_holder_norm, HolderOrder};
    let model = MfgModel::reference(21, 41).unwrap();
    let grid = &model.grid;
    let norms: Vec<f64> = [0.1, 0.5, 0.9]
        .iter()
        .map(|c| {
            let m0 = GridMeasure::from_fn(grid, |x| (-(x - c) * (x - c) / 0.02).exp() + 0.1).unwrap();
            let base = solve_mfg(&model, &m0, &MfgOptions::with_tol(1e-12)).unwrap();
            let k = fundamental_kernel(&model, &base, &LinearizedOptions::default()).unwrap();
            kernel_holder_norm(grid, k.values.view(), HolderOrder::TwoPlusAlpha, HolderOrder::OnePlusAlpha).unwrap()
        })
        .collect();
    let (lo, hi) = norms.iter().fold((f64::MAX, 0.0_f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(lo > 0.0 && hi.is_finite());
    assert!(hi <= 2.0 * lo, "{norms:?}");
}
