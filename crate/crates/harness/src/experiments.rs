//! One runner per experiment kind. Each returns an [`Outcome`] whose checks
//! use only bounds named in its params struct.

use std::f64::consts::PI;

use mfgmaster_core::linearized::{pair_kernel, GeneralLinearizedData, LinearizedOptions, LinearizedSystem};
use mfgmaster_core::master::{
    dipole_check, flat_derivative_field, master_residual, probe_flow_consistency, probe_lipschitz,
    probe_remainder_order, solve_from, MasterOptions,
};
use mfgmaster_core::metrics::{holder_components, kantorovich_norm, kernel_holder_norm, wasserstein1, HolderOrder};
use mfgmaster_core::mfg::{monotonicity_gap, path_distance, solve_mfg, solve_mfg_from, MfgOptions, MfgSolution};
use mfgmaster_core::model::{EllipticCoefficient, ModelSpec};
use mfgmaster_core::parabolic::{
    assemble_backward_operator, duality_defect, solve_fokker_planck_forward, solve_linear_backward,
    BackwardOperator, UpwindDrift,
};
use mfgmaster_core::{fit_rate, Grid, GridMeasure, MfgError, MfgModel, SpaceTimeField};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    DualityParams, Experiment, ExperimentParams, FlowParams, HolderTimeParams, LipschitzParams, MasterResidualParams,
    MfgSolveParams, MonotonicityParams, NeumannParams, OracleParams, RemainderParams, Rung,
};
use crate::measures::{random_measure, random_zero_mean, MeasureSpec};
use crate::report::{Bound, Outcome};

type Step = std::result::Result<(), MfgError>;

/// Runs one experiment. Solver errors end the experiment and are reported
/// through [`Outcome::error`].
pub fn run_experiment(model: &ModelSpec, seed: u64, experiment: &Experiment) -> Outcome {
    let kind = experiment.params.kind();
    let mut o = Outcome::new(&experiment.name, kind.name(), seed);
    let result = match &experiment.params {
        ExperimentParams::OracleConvergence(p) => oracle_convergence(&mut o, model, p),
        ExperimentParams::Duality(p) => duality(&mut o, model, seed, p),
        ExperimentParams::MfgSolve(p) => mfg_solve(&mut o, model, p),
        ExperimentParams::Monotonicity(p) => monotonicity(&mut o, model, seed, p),
        ExperimentParams::Lipschitz(p) => lipschitz(&mut o, model, seed, p),
        ExperimentParams::RemainderOrder(p) => remainder_order(&mut o, model, p),
        ExperimentParams::MasterResidual(p) => master_residual_ladder(&mut o, model, p),
        ExperimentParams::Neumann(p) => neumann(&mut o, model, seed, p),
        ExperimentParams::FlowConsistency(p) => flow_consistency(&mut o, model, p),
        ExperimentParams::HolderTime(p) => holder_time(&mut o, model, p),
    };
    if let Err(e) = result {
        o.fail(e.to_string());
    }
    o
}

fn rung_label((n_x, n_t): Rung) -> String {
    format!("{n_x}x{n_t}")
}

fn model_on(spec: &ModelSpec, (n_x, n_t): Rung) -> mfgmaster_core::Result<MfgModel> {
    let mut s = spec.clone();
    s.n_x = n_x;
    s.n_t = n_t;
    MfgModel::from_spec(&s)
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn master_options(tol: f64, linearized_tol: f64) -> MasterOptions {
    MasterOptions {
        mfg: MfgOptions::with_tol(tol),
        linearized: LinearizedOptions {
            tol: linearized_tol,
            ..LinearizedOptions::default()
        },
    }
}

fn record_solution(o: &mut Outcome, parameter: &str, sol: &MfgSolution) {
    o.record(parameter, "iterations", sol.iterations as f64);
    o.record(parameter, "final_gap", sol.final_gap);
    o.record(parameter, "fictitious_play", if sol.fictitious_play { 1.0 } else { 0.0 });
    o.record(parameter, "fokker_planck_residual", sol.residuals.fokker_planck);
    o.record(parameter, "cfl", sol.residuals.cfl);
}

fn oracle_convergence(o: &mut Outcome, model: &ModelSpec, p: &OracleParams) -> Step {
    let k = p.mode as f64 * PI;
    let lambda = p.diffusion * k * k;
    let mut backward = Vec::new();
    let mut forward = Vec::new();
    for &rung in &p.ladder {
        let grid = Grid::new(rung.0, rung.1, 0.0, p.t_end, model.alpha)?;
        let a = EllipticCoefficient::constant(&grid, p.diffusion)?;
        let op = BackwardOperator::new(&grid, &a, UpwindDrift::zero(&grid))?;
        let xi = grid.nodes().mapv(|x| (k * x).cos());
        let phi = solve_linear_backward(&op, xi.view(), &SpaceTimeField::zeros(&grid))?;
        let exact_phi = SpaceTimeField::from_fn(&grid, |t, x| (-lambda * (p.t_end - t)).exp() * (k * x).cos());
        let eb = phi.sub(&exact_phi).sup_abs();

        let mu0 = grid.nodes().mapv(|x| 1.0 + p.amplitude * (k * x).cos());
        let mu = solve_fokker_planck_forward(&op, &grid, mu0.view(), None)?;
        let exact_mu = SpaceTimeField::from_fn(&grid, |t, x| 1.0 + p.amplitude * (-lambda * t).exp() * (k * x).cos());
        let ef = mu.sub(&exact_mu).sup_abs();

        let label = rung_label(rung);
        o.record(&label, "dx", grid.dx());
        o.record(&label, "dt", grid.dt());
        o.record(&label, "backward_error", eb);
        o.record(&label, "forward_error", ef);
        backward.push((grid.dx(), grid.dt(), eb));
        forward.push((grid.dx(), grid.dt(), ef));
    }
    for (name, errs) in [("backward", &backward), ("forward", &forward)] {
        let space: Vec<_> = errs.iter().map(|(dx, _, e)| (*dx, *e)).collect();
        let time: Vec<_> = errs.iter().map(|(_, dt, e)| (*dt, *e)).collect();
        let fs = fit_rate(&space)?;
        let ft = fit_rate(&time)?;
        o.check("fit", format!("{name}_space_order"), fs.slope, Bound::AtLeast(p.min_space_order), "min_space_order");
        o.check("fit", format!("{name}_time_order"), ft.slope, Bound::AtLeast(p.min_time_order), "min_time_order");
        o.fit(&format!("{name}_space"), fs);
        o.fit(&format!("{name}_time"), ft);
    }
    Ok(())
}

fn random_field<R: Rng>(grid: &Grid, rng: &mut R, amplitude: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((grid.n_t(), grid.n_x()), || rng.gen_range(-amplitude..=amplitude))
}

fn duality(o: &mut Outcome, model: &ModelSpec, seed: u64, p: &DualityParams) -> Step {
    let base = model_on(model, (p.n_x, p.n_t))?;
    let grid = &base.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut worst_cfl = 0.0_f64;
    for _ in 0..p.tuples {
        let b = random_field(grid, &mut rng, p.drift_amplitude);
        let psi = SpaceTimeField::from_array(grid, random_field(grid, &mut rng, 1.0))?;
        let c = SpaceTimeField::from_array(grid, random_field(grid, &mut rng, 1.0))?;
        let xi = Array1::from_shape_simple_fn(grid.n_x(), || rng.gen_range(-1.0..=1.0));
        let mu0 = Array1::from_shape_simple_fn(grid.n_x(), || rng.gen_range(-1.0..=1.0));
        let op = assemble_backward_operator(&base.a, b.view(), grid)?;
        let phi = solve_linear_backward(&op, xi.view(), &psi)?;
        let mu = solve_fokker_planck_forward(&op, grid, mu0.view(), Some(&c))?;
        worst = worst.max(duality_defect(grid, &mu, &phi, &psi, Some(&c)));
        worst_cfl = worst_cfl.max(op.cfl());
    }
    let label = rung_label((p.n_x, p.n_t));
    o.record(&label, "tuples", p.tuples as f64);
    o.record(&label, "max_cfl", worst_cfl);
    o.check(&label, "max_duality_defect", worst, Bound::AtMost(p.max_defect), "max_defect");
    Ok(())
}

fn conservation_checks(o: &mut Outcome, parameter: &str, sol: &MfgSolution, max_drift: f64, min_density: f64) {
    o.check(parameter, "mass_drift", sol.residuals.mass_drift, Bound::AtMost(max_drift), "max_mass_drift");
    o.check(parameter, "min_density", sol.residuals.min_density, Bound::AtLeast(min_density), "min_density");
}

fn mfg_solve(o: &mut Outcome, spec: &ModelSpec, p: &MfgSolveParams) -> Step {
    let model = MfgModel::from_spec(spec)?;
    let m0 = p.m0.build(&model.grid)?;
    let opts = MfgOptions {
        damping: p.damping,
        tol: p.tol,
        max_iter: p.max_iter,
        ..MfgOptions::default()
    };
    o.note("tol", p.tol);
    o.note("max_iter", p.max_iter);
    let first = match solve_mfg(&model, &m0, &opts) {
        Ok(sol) => sol,
        Err(MfgError::NonConvergence {
            iterations,
            last_gap,
            gap_history,
        }) => {
            o.record("picard", "iterations", iterations as f64);
            o.note("gap_history", gap_history);
            o.check("picard", "final_gap", last_gap, Bound::AtMost(p.tol), "tol");
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    record_solution(o, "picard", &first);
    o.note("iterations", first.iterations);
    o.note("gap_history", &first.gap_history);
    o.check("picard", "converged_gap", first.final_gap, Bound::AtMost(p.tol), "tol");
    conservation_checks(o, "picard", &first, p.max_mass_drift, p.min_density);
    if p.compare_initializations {
        let frozen = SpaceTimeField::constant_in_time(&model.grid, m0.density())?;
        let second = solve_mfg_from(&model, &frozen, &opts)?;
        record_solution(o, "frozen_start", &second);
        o.note("iterations_frozen_start", second.iterations);
        conservation_checks(o, "frozen_start", &second, p.max_mass_drift, p.min_density);
        let du = first.u.sub(&second.u).sup_abs();
        let dm = path_distance(&model.grid, &first.m, &second.m);
        o.check("initialization", "u_difference", du, Bound::AtMost(p.max_init_difference), "max_init_difference");
        o.check("initialization", "m_difference", dm, Bound::AtMost(p.max_init_difference), "max_init_difference");
    }
    Ok(())
}

fn monotonicity(o: &mut Outcome, spec: &ModelSpec, seed: u64, p: &MonotonicityParams) -> Step {
    let model = MfgModel::from_spec(spec)?;
    let grid = &model.grid;
    let opts = MfgOptions::with_tol(p.tol);
    let slack = p.slack_factor * (grid.dx() * grid.dx() + grid.dt());
    o.record("config", "slack", slack);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(GridMeasure, GridMeasure)> = (0..p.pairs)
        .map(|_| Ok((random_measure(grid, &mut rng)?, random_measure(grid, &mut rng)?)))
        .collect::<mfgmaster_core::Result<_>>()?;
    let mut iterations = Vec::new();
    for (i, (m1, m2)) in pairs.iter().enumerate() {
        let label = format!("pair{i}");
        let s1 = solve_mfg(&model, m1, &opts)?;
        let s2 = solve_mfg(&model, m2, &opts)?;
        iterations.push((s1.iterations, s2.iterations));
        let g = monotonicity_gap(&model, &s1, &s2)?;
        o.record(&label, "d1", wasserstein1(grid, m1, m2)?);
        o.record(&label, "lhs", g.lhs);
        o.record(&label, "rhs", g.rhs);
        o.record(&label, "coupling", g.coupling);
        o.record(&label, "terminal", g.terminal);
        o.record(&label, "identity_defect", g.identity_defect);
        o.record(&label, "min_integrand", g.min_integrand);
        o.check(&label, "lhs_minus_rhs", g.lhs - g.rhs, Bound::AtMost(slack), "slack_factor");
        o.check(&label, "bregman_1", g.bregman[0], Bound::AtLeast(p.min_bregman), "min_bregman");
        o.check(&label, "bregman_2", g.bregman[1], Bound::AtLeast(p.min_bregman), "min_bregman");
        for (k, s) in [(1, &s1), (2, &s2)] {
            conservation_checks(o, &format!("{label}_m{k}"), s, p.max_mass_drift, p.min_density);
        }
    }
    o.note("iterations", iterations);
    Ok(())
}

/// Pairs `(base, (1 - s) base + s nu_k)` with `nu_k` a bump and `s` chosen so
/// that `d1` is log-uniform in `[min_d1, max_d1]`.
pub fn lipschitz_pairs(grid: &Grid, seed: u64, p: &LipschitzParams) -> mfgmaster_core::Result<Vec<(GridMeasure, GridMeasure)>> {
    let base = p.base.build(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p.pairs)
        .map(|_| {
            let center = rng.gen_range(p.bump_centers.0..=p.bump_centers.1);
            let target = rng.gen_range(p.min_d1.ln()..=p.max_d1.ln()).exp();
            let nu = MeasureSpec::Gaussian {
                center,
                width: p.bump_width,
                floor: 0.0,
            }
            .build(grid)?;
            let full = wasserstein1(grid, &base, &nu)?;
            let s = target / full;
            if !(s > 0.0 && s <= 1.0) {
                return Err(MfgError::InvalidInput(format!("bump at {center} too close to the base for d1 = {target}")));
            }
            Ok((base.clone(), base.mix(&nu, s)?))
        })
        .collect()
}

fn lipschitz(o: &mut Outcome, spec: &ModelSpec, seed: u64, p: &LipschitzParams) -> Step {
    let model = MfgModel::from_spec(spec)?;
    let pairs = lipschitz_pairs(&model.grid, seed, p)?;
    let opts = master_options(p.tol, LinearizedOptions::default().tol);
    let rows = probe_lipschitz(&model, p.t0, &pairs, &opts)?;
    let mut families: [(&str, Vec<f64>); 4] =
        [("sup_ratio", vec![]), ("gradient_ratio", vec![]), ("c2a_ratio", vec![]), ("flow_ratio", vec![])];
    for (i, r) in rows.iter().enumerate() {
        let label = format!("pair{i}");
        o.check(&label, "d1", r.d1, Bound::Within(p.min_d1, p.max_d1), "min_d1/max_d1");
        if r.skipped {
            o.record(&label, "skipped", 1.0);
            continue;
        }
        for (name, vals) in families.iter_mut() {
            let v = match *name {
                "sup_ratio" => r.sup_ratio,
                "gradient_ratio" => r.gradient_ratio,
                "c2a_ratio" => r.c2a_ratio,
                _ => r.flow_ratio,
            };
            o.record(&label, *name, v);
            vals.push(v);
        }
    }
    for (name, vals) in &families {
        let s = spread(vals);
        match *name {
            "c2a_ratio" | "flow_ratio" => {
                o.check("spread", *name, s, Bound::AtMost(p.max_spread), "max_spread");
            }
            _ => o.record("spread", *name, s),
        }
    }
    Ok(())
}

fn remainder_order(o: &mut Outcome, spec: &ModelSpec, p: &RemainderParams) -> Step {
    let model = MfgModel::from_spec(spec)?;
    let m0 = p.m0.build(&model.grid)?;
    let m1 = p.m1.build(&model.grid)?;
    let opts = master_options(p.tol, p.linearized_tol);
    let probe = probe_remainder_order(&model, p.t0, &m0, &m1, &p.s_ladder, &opts)?;
    for r in &probe.rows {
        let label = format!("s={}", r.s);
        o.record(&label, "d1", r.d1);
        o.record(&label, "remainder", r.remainder);
        o.record(&label, "linear", r.linear);
    }
    o.record("kernel", "max_gap", probe.kernel_max_gap);
    o.record("fit", "degenerate", if probe.degenerate { 1.0 } else { 0.0 });
    if probe.degenerate {
        o.note("slope", "degenerate");
        return Ok(());
    }
    match probe.fit {
        Some(fit) => {
            o.check("fit", "slope", fit.slope, Bound::Within(p.min_slope, p.max_slope), "min_slope/max_slope");
            o.fit("remainder", fit);
        }
        None => o.fail("too few positive remainders to fit"),
    }
    Ok(())
}

fn master_residual_ladder(o: &mut Outcome, spec: &ModelSpec, p: &MasterResidualParams) -> Step {
    let opts = master_options(p.tol, p.linearized_tol);
    let mut points = Vec::new();
    for (i, &rung) in p.ladder.iter().enumerate() {
        let model = model_on(spec, rung)?;
        let m0 = p.m0.build(&model.grid)?;
        let r = master_residual(&model, p.t0, &m0, &opts)?;
        let label = rung_label(rung);
        o.record(&label, "dx", model.grid.dx());
        o.record(&label, "residual_sup", r.sup);
        o.record(&label, "residual_l2", r.l2);
        o.record(&label, "kernel_max_gap", r.sample.diagnostics.kernel_max_gap.unwrap_or(0.0));
        let bx = r.boundary_x[0].max(r.boundary_x[1]);
        if i + 1 == p.ladder.len() {
            o.check(&label, "boundary_u_x", bx, Bound::AtMost(p.max_boundary), "max_boundary");
            o.check(&label, "boundary_dm_u", r.boundary_y, Bound::AtMost(p.max_boundary), "max_boundary");
        } else {
            o.record(&label, "boundary_u_x", bx);
            o.record(&label, "boundary_dm_u", r.boundary_y);
        }
        points.push((model.grid.dx(), r.sup));
    }
    let fit = fit_rate(&points)?;
    o.check("fit", "residual_order", fit.slope, Bound::AtLeast(p.min_order), "min_order");
    o.fit("residual", fit);
    Ok(())
}

fn neumann(o: &mut Outcome, spec: &ModelSpec, seed: u64, p: &NeumannParams) -> Step {
    let model = MfgModel::from_spec(spec)?;
    let grid = &model.grid;
    let n = grid.n_x();
    let m0 = p.m0.build(grid)?;
    let opts = master_options(p.tol, p.linearized_tol);
    let sample = flat_derivative_field(&model, p.t0, &m0, &opts)?;
    let dm_u = sample.dm_u.as_ref().expect("kernel sample carries D_m U");
    let kernel = sample.kernel.as_ref().expect("kernel sample carries K");
    let a = model.a.values();
    let walls = sup(dm_u.column(0).iter().map(|v| a[0] * v)).max(sup(dm_u.column(n - 1).iter().map(|v| a[n - 1] * v)));
    o.check("boundary", "dm_u_wall", walls, Bound::AtMost(p.max_boundary), "max_boundary");
    o.record("kernel", "max_gap", sample.diagnostics.kernel_max_gap.unwrap_or(0.0));
    o.record("kernel", "normalization_defect", sample.diagnostics.normalization_defect.unwrap_or(0.0));
    o.record(
        "kernel",
        "holder_2a_x_1a_y",
        kernel_holder_norm(grid, kernel.view(), HolderOrder::TwoPlusAlpha, HolderOrder::OnePlusAlpha)?,
    );
    let mut second_y = 0.0_f64;
    for row in kernel.rows() {
        second_y = second_y.max(holder_components(grid, row, HolderOrder::TwoPlusAlpha)?.sups[2]);
    }
    o.record("kernel", "second_difference_y", second_y);

    let nodes = if p.dipole_nodes.is_empty() { vec![n / 4, n / 2, 3 * n / 4] } else { p.dipole_nodes.clone() };
    for (j, err) in dipole_check(&model, p.t0, &m0, &nodes, &opts)? {
        o.check(format!("node{j}"), "dipole_error", err, Bound::AtMost(p.max_dipole_error), "max_dipole_error");
    }

    if p.representation_samples > 0 {
        let (local, sol) = solve_from(&model, p.t0, &m0, &opts)?;
        let system = LinearizedSystem::new(&local, &sol, &opts.linearized)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = p.representation_factor * p.linearized_tol;
        for i in 0..p.representation_samples {
            let mu0 = random_zero_mean(grid, &mut rng)?;
            let v = system.solve(&GeneralLinearizedData::initial(mu0.clone()), &opts.linearized)?;
            let paired = pair_kernel(grid, kernel.view(), mu0.view())?;
            let err = sup((&v.z.level(0) - &paired).iter().cloned());
            let label = format!("sample{i}");
            o.record(&label, "mu0_kantorovich", kantorovich_norm(grid, mu0.view()));
            o.check(&label, "representation_error", err, Bound::AtMost(bound), "representation_factor*linearized_tol");
        }
    }
    Ok(())
}

/// `k` levels spread evenly strictly inside `(0, last)`.
pub fn interior_levels(last: usize, k: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = (1..=k)
        .map(|i| ((i as f64) * last as f64 / (k + 1) as f64).round() as usize)
        .filter(|&l| l > 0 && l < last)
        .collect();
    levels.dedup();
    levels
}

fn flow_consistency(o: &mut Outcome, spec: &ModelSpec, p: &FlowParams) -> Step {
    let model = MfgModel::from_spec(spec)?;
    let m0 = p.m0.build(&model.grid)?;
    let opts = master_options(p.tol, LinearizedOptions::default().tol);
    let last = model.grid.with_start(p.t0)?.n_t() - 1;
    let levels = interior_levels(last, p.interior_times);
    let flow = probe_flow_consistency(&model, p.t0, &m0, &levels, &opts)?;
    let bound = p.tolerance_factor * p.tol;
    for r in &flow.rows {
        o.check(format!("t={}", r.t), "flow_error", r.error, Bound::AtMost(bound), "tolerance_factor*tol");
    }
    o.record("all", "max_flow_error", flow.max);
    Ok(())
}

/// `max_{s != t} d1(m(t), m(s)) / |t - s|^{1/2}` over all level pairs.
pub fn holder_time_quotient(grid: &Grid, m: &SpaceTimeField) -> f64 {
    let n_t = m.n_levels();
    let mut best = 0.0_f64;
    for a in 0..n_t {
        for b in a + 1..n_t {
            let diff = &m.level(b) - &m.level(a);
            let q = kantorovich_norm(grid, diff.view()) / (grid.time(b) - grid.time(a)).sqrt();
            best = best.max(q);
        }
    }
    best
}

fn holder_time(o: &mut Outcome, spec: &ModelSpec, p: &HolderTimeParams) -> Step {
    let opts = MfgOptions::with_tol(p.tol);
    let mut quotients = Vec::new();
    for &rung in &p.ladder {
        let model = model_on(spec, rung)?;
        let m0 = p.m0.build(&model.grid)?;
        let sol = solve_mfg(&model, &m0, &opts)?;
        let label = rung_label(rung);
        record_solution(o, &label, &sol);
        o.record(&label, "mass_drift", sol.residuals.mass_drift);
        o.record(&label, "min_density", sol.residuals.min_density);
        let q = holder_time_quotient(&model.grid, &sol.m);
        o.record(&label, "holder_quotient", q);
        quotients.push(q);
    }
    if quotients.len() < 2 {
        return Err(MfgError::InvalidInput("holder-time needs at least two rungs".into()));
    }
    o.check("ladder", "quotient_factor", spread(&quotients), Bound::AtMost(p.max_factor), "max_factor");
    Ok(())
}
