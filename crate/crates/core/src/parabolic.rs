//! Backward linear and Hamilton-Jacobi sweeps and the forward Fokker-Planck
//! sweep, built as the exact weighted transpose of the backward step.
//!
//! One backward step reads `phi^n = P (I - dt L_{n+1}) phi^{n+1} + dt psi^n`
//! where `P = (I + dt A)^{-1}` is the implicit Neumann diffusion and
//! `L_{n+1} = beta^- D^- + beta^+ D^+` the explicit upwinded drift. Ghost nodes
//! are reflected at both walls.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{MfgError, Result};
use crate::field::SpaceTimeField;
use crate::grid::Grid;
use crate::model::{EllipticCoefficient, MfgModel};
use crate::stencil;

/// Tridiagonal matrix, `lower[0]` and `upper[n - 1]` unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Array1<f64>,
    pub diag: Array1<f64>,
    pub upper: Array1<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let n = self.len();
        Array1::from_shape_fn(n, |i| {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            s
        })
    }

    pub fn transpose(&self) -> Tridiagonal {
        let n = self.len();
        let mut lower = Array1::zeros(n);
        let mut upper = Array1::zeros(n);
        for i in 1..n {
            lower[i] = self.upper[i - 1];
            upper[i - 1] = self.lower[i];
        }
        Tridiagonal {
            lower,
            diag: self.diag.clone(),
            upper,
        }
    }

    /// Thomas algorithm; stable without pivoting for diagonally dominant rows.
    pub fn solve(&self, rhs: ArrayView1<f64>) -> Array1<f64> {
        let n = self.len();
        let mut c = Array1::zeros(n);
        let mut d = Array1::zeros(n);
        c[0] = self.upper[0] / self.diag[0];
        d[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            let denom = self.diag[i] - self.lower[i] * c[i - 1];
            if i + 1 < n {
                c[i] = self.upper[i] / denom;
            }
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }
}

/// Split drift coefficients with `minus >= 0` multiplying `D^-` and
/// `plus <= 0` multiplying `D^+`. Rows are time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct UpwindDrift {
    pub minus: Array2<f64>,
    pub plus: Array2<f64>,
}

impl UpwindDrift {
    pub fn zero(grid: &Grid) -> Self {
        Self {
            minus: Array2::zeros((grid.n_t(), grid.n_x())),
            plus: Array2::zeros((grid.n_t(), grid.n_x())),
        }
    }

    /// Plain upwinding of a transport field `b` in `+b phi_x`.
    pub fn from_velocity(b: ArrayView2<f64>) -> Self {
        Self {
            minus: b.mapv(|v| v.max(0.0)),
            plus: b.mapv(|v| v.min(0.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BackwardOperator {
    n_x: usize,
    n_t: usize,
    dx: f64,
    dt: f64,
    implicit: Tridiagonal,
    implicit_t: Tridiagonal,
    drift: UpwindDrift,
}

/// Operator with pure upwinding of a nodal velocity `b` (rows are levels).
pub fn assemble_backward_operator(a: &EllipticCoefficient, b: ArrayView2<f64>, grid: &Grid) -> Result<BackwardOperator> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(MfgError::InvalidInput("non-finite drift".into()));
    }
    BackwardOperator::new(grid, a, UpwindDrift::from_velocity(b))
}

impl BackwardOperator {
    pub fn new(grid: &Grid, a: &EllipticCoefficient, drift: UpwindDrift) -> Result<Self> {
        let (n_t, n_x) = (grid.n_t(), grid.n_x());
        grid.check_len(a.values().len())?;
        if drift.minus.dim() != (n_t, n_x) || drift.plus.dim() != (n_t, n_x) {
            return Err(MfgError::InvalidInput(format!(
                "drift shape {:?} does not match grid ({n_t}, {n_x})",
                drift.minus.dim()
            )));
        }
        let implicit = implicit_diffusion(a, grid.dx(), grid.dt());
        let implicit_t = implicit.transpose();
        Ok(Self {
            n_x,
            n_t,
            dx: grid.dx(),
            dt: grid.dt(),
            implicit,
            implicit_t,
            drift,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn drift(&self) -> &UpwindDrift {
        &self.drift
    }

    /// `I + dt A` with `A = -(a phi_x)_x`.
    pub fn implicit_matrix(&self) -> &Tridiagonal {
        &self.implicit
    }

    /// Dense `I - dt L_level`.
    pub fn explicit_matrix(&self, level: usize) -> Tridiagonal {
        let n = self.n_x;
        let r = self.dt / self.dx;
        let bm = self.drift.minus.row(level);
        let bp = self.drift.plus.row(level);
        let mut t = Tridiagonal {
            lower: Array1::zeros(n),
            diag: Array1::zeros(n),
            upper: Array1::zeros(n),
        };
        for j in 0..n {
            t.diag[j] = 1.0 - r * (bm[j] - bp[j]);
        }
        for j in 1..n - 1 {
            t.lower[j] = r * bm[j];
            t.upper[j] = -r * bp[j];
        }
        // reflected ghosts fold the outer neighbour onto the inner one
        t.upper[0] = r * (bm[0] - bp[0]);
        t.lower[n - 1] = r * (bm[n - 1] - bp[n - 1]);
        t
    }

    /// `max dt (beta^- - beta^+) / dx`; the explicit part is monotone iff `<= 1`.
    pub fn cfl(&self) -> f64 {
        let r = self.dt / self.dx;
        self.drift
            .minus
            .iter()
            .zip(self.drift.plus.iter())
            .skip(self.n_x)
            .map(|(m, p)| r * (m - p))
            .fold(0.0, f64::max)
    }

    /// Off-diagonal entries of `I + dt A` are non-positive, its diagonal is
    /// positive, and `I - dt L` is entrywise non-negative at levels `1..n_t`.
    pub fn is_monotone(&self) -> bool {
        let imp = &self.implicit;
        let n = self.n_x;
        let implicit_ok = (0..n).all(|i| {
            imp.diag[i] > 0.0 && (i == 0 || imp.lower[i] <= 0.0) && (i + 1 == n || imp.upper[i] <= 0.0)
        });
        let explicit_ok = (1..self.n_t).all(|l| {
            let q = self.explicit_matrix(l);
            q.diag.iter().chain(q.lower.iter()).chain(q.upper.iter()).all(|v| *v >= 0.0)
        });
        implicit_ok && explicit_ok
    }

    /// `(I - dt L_level) phi`.
    pub fn apply_explicit(&self, level: usize, phi: ArrayView1<f64>) -> Array1<f64> {
        self.explicit_matrix(level).apply(phi)
    }

    /// `(I - dt L_level)^T nu`.
    pub fn apply_explicit_transpose(&self, level: usize, nu: ArrayView1<f64>) -> Array1<f64> {
        self.explicit_matrix(level).transpose().apply(nu)
    }

    /// `P f = (I + dt A)^{-1} f`.
    pub fn implicit_solve(&self, f: ArrayView1<f64>) -> Array1<f64> {
        self.implicit.solve(f)
    }

    /// `P^T f`.
    pub fn implicit_solve_transpose(&self, f: ArrayView1<f64>) -> Array1<f64> {
        self.implicit_t.solve(f)
    }

    /// One backward step `P (I - dt L_{n+1}) phi^{n+1}`, without source.
    pub fn backward_step(&self, level_next: usize, phi_next: ArrayView1<f64>) -> Array1<f64> {
        self.implicit_solve(self.apply_explicit(level_next, phi_next).view())
    }

    /// Transposed step on masses `nu = w * mu`.
    pub fn forward_step(&self, level_next: usize, nu: ArrayView1<f64>) -> Array1<f64> {
        self.apply_explicit_transpose(level_next, self.implicit_solve_transpose(nu).view())
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        grid.check_len(self.n_x)?;
        if grid.n_t() != self.n_t {
            return Err(MfgError::InvalidInput(format!(
                "operator has {} levels, grid has {}",
                self.n_t,
                grid.n_t()
            )));
        }
        Ok(())
    }
}

fn implicit_diffusion(a: &EllipticCoefficient, dx: f64, dt: f64) -> Tridiagonal {
    let faces = a.faces();
    let n = faces.len() + 1;
    let r = dt / (dx * dx);
    let mut t = Tridiagonal {
        lower: Array1::zeros(n),
        diag: Array1::zeros(n),
        upper: Array1::zeros(n),
    };
    for j in 1..n - 1 {
        t.lower[j] = -r * faces[j - 1];
        t.upper[j] = -r * faces[j];
        t.diag[j] = 1.0 + r * (faces[j - 1] + faces[j]);
    }
    t.diag[0] = 1.0 + 2.0 * r * faces[0];
    t.upper[0] = -2.0 * r * faces[0];
    t.diag[n - 1] = 1.0 + 2.0 * r * faces[n - 2];
    t.lower[n - 1] = -2.0 * r * faces[n - 2];
    t
}

/// Backward sweep of `-phi_t - (a phi_x)_x + b phi_x = psi` from `phi(T) = xi`.
/// Only the levels `0..n_t - 1` of `psi` are used.
pub fn solve_linear_backward(op: &BackwardOperator, xi: ArrayView1<f64>, psi: &SpaceTimeField) -> Result<SpaceTimeField> {
    if xi.len() != op.n_x || psi.n_x() != op.n_x || psi.n_levels() != op.n_t {
        return Err(MfgError::GridMismatch {
            expected: op.n_x,
            found: xi.len(),
        });
    }
    if xi.iter().chain(psi.values().iter()).any(|v| !v.is_finite()) {
        return Err(MfgError::InvalidInput("non-finite data".into()));
    }
    let mut phi = Array2::zeros((op.n_t, op.n_x));
    phi.row_mut(op.n_t - 1).assign(&xi);
    for n in (0..op.n_t - 1).rev() {
        let mut next = op.backward_step(n + 1, phi.row(n + 1));
        next.scaled_add(op.dt, &psi.level(n));
        phi.row_mut(n).assign(&next);
    }
    Ok(SpaceTimeField::from_array_raw(phi))
}

/// Forward sweep of `mu_t - (a mu_x)_x - (b mu)_x = (c)_x` from the density
/// `mu0`, with zero total flux at both walls. Levels `0..n_t - 1` of `c` are used.
pub fn solve_fokker_planck_forward(
    op: &BackwardOperator,
    grid: &Grid,
    mu0: ArrayView1<f64>,
    c: Option<&SpaceTimeField>,
) -> Result<SpaceTimeField> {
    op.check_grid(grid)?;
    grid.check_len(mu0.len())?;
    if let Some(c) = c {
        if c.n_x() != op.n_x || c.n_levels() != op.n_t {
            return Err(MfgError::GridMismatch {
                expected: op.n_x,
                found: c.n_x(),
            });
        }
    }
    let w = grid.weights();
    let mut mu = Array2::zeros((op.n_t, op.n_x));
    mu.row_mut(0).assign(&mu0);
    let mut nu = &mu0 * w;
    for n in 0..op.n_t - 1 {
        nu = op.forward_step(n + 1, nu.view());
        if let Some(c) = c {
            let s = divergence_source(grid, c.level(n));
            nu.scaled_add(op.dt, &s);
        }
        mu.row_mut(n + 1).assign(&(&nu / w));
    }
    Ok(SpaceTimeField::from_array_raw(mu))
}

/// Masses `-D_c^T (w c)`, the transpose of the ghost centered difference.
pub fn divergence_source(grid: &Grid, c: ArrayView1<f64>) -> Array1<f64> {
    let n = c.len();
    let w = grid.weights();
    let h2 = 2.0 * grid.dx();
    let mut s = Array1::zeros(n);
    for j in 1..n - 1 {
        let flux = w[j] * c[j] / h2;
        s[j + 1] -= flux;
        s[j - 1] += flux;
    }
    s
}

/// Defect of the discrete duality identity
/// `<mu^N, xi> + sum dt <mu^n, psi^n> = <mu^0, phi^0> - sum dt <c^n, D_c phi^{n+1}>`.
pub fn duality_defect(
    grid: &Grid,
    mu: &SpaceTimeField,
    phi: &SpaceTimeField,
    psi: &SpaceTimeField,
    c: Option<&SpaceTimeField>,
) -> f64 {
    let n_t = grid.n_t();
    let dt = grid.dt();
    let mut lhs = grid.pairing(mu.last(), phi.last());
    let mut rhs = grid.pairing(mu.level(0), phi.level(0));
    for n in 0..n_t - 1 {
        lhs += dt * grid.pairing(mu.level(n), psi.level(n));
        if let Some(c) = c {
            let d = stencil::centered_gradient(phi.level(n + 1), grid.dx());
            rhs -= dt * grid.pairing(c.level(n), d.view());
        }
    }
    (lhs - rhs).abs()
}

/// Largest defect of the scheme equation `(I + dt A)(phi^n - dt psi^n) = (I - dt L) phi^{n+1}`.
pub fn scheme_residual(op: &BackwardOperator, phi: &SpaceTimeField, psi: &SpaceTimeField) -> f64 {
    let mut worst = 0.0_f64;
    for n in 0..op.n_t - 1 {
        let mut lhs_arg = phi.level(n).to_owned();
        lhs_arg.scaled_add(-op.dt, &psi.level(n));
        let lhs = op.implicit.apply(lhs_arg.view());
        let rhs = op.apply_explicit(n + 1, phi.level(n + 1));
        worst = worst.max((&lhs - &rhs).iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    worst
}

/// Lax-Friedrichs numerical Hamiltonian with the `b~ u_x` transport term,
/// `H(x, pbar) - theta (p^+ - p^-) / 2 + b~^+ p^- + b~^- p^+`.
pub fn numerical_hamiltonian(model: &MfgModel, u: ArrayView1<f64>) -> Array1<f64> {
    let grid = &model.grid;
    let h = model.hamiltonian.as_ref();
    let theta = h.lip_p();
    let slope = model.a.slope();
    let n = u.len();
    let dx = grid.dx();
    Array1::from_shape_fn(n, |j| {
        let (pm, pp) = one_sided(u, j, dx);
        let pbar = 0.5 * (pm + pp);
        let b = slope[j];
        h.h(grid.x(j), pbar) - 0.5 * theta * (pp - pm) + b.max(0.0) * pm + b.min(0.0) * pp
    })
}

fn one_sided(u: ArrayView1<f64>, j: usize, dx: f64) -> (f64, f64) {
    let n = u.len();
    let left = if j == 0 { u[1] } else { u[j - 1] };
    let right = if j + 1 == n { u[n - 2] } else { u[j + 1] };
    ((u[j] - left) / dx, (right - u[j]) / dx)
}

/// Derivative of the numerical Hamiltonian at every level of `u`, in split form.
/// It is also the transport field `H_p(x, u_x) + b~` of the density equation.
pub fn hamiltonian_drift(model: &MfgModel, u: &SpaceTimeField) -> UpwindDrift {
    let grid = &model.grid;
    let h = model.hamiltonian.as_ref();
    let theta = h.lip_p();
    let slope = model.a.slope();
    let shape = (u.n_levels(), u.n_x());
    let mut minus = Array2::zeros(shape);
    let mut plus = Array2::zeros(shape);
    for n in 0..shape.0 {
        let pbar = stencil::centered_gradient(u.level(n), grid.dx());
        for j in 0..shape.1 {
            let hp = h.h_p(grid.x(j), pbar[j]);
            minus[[n, j]] = 0.5 * (hp + theta) + slope[j].max(0.0);
            plus[[n, j]] = 0.5 * (hp - theta) + slope[j].min(0.0);
        }
    }
    UpwindDrift { minus, plus }
}

/// Nodal values of `F(., m^n)` at every level of a density path.
pub fn coupling_path(model: &MfgModel, m_path: &SpaceTimeField) -> Result<SpaceTimeField> {
    let grid = &model.grid;
    grid.check_len(m_path.n_x())?;
    SpaceTimeField::from_array(grid, model.f.apply_levels(grid, m_path.values()))
}

/// Backward Hamilton-Jacobi sweep with couplings frozen along `m_path`.
pub fn solve_hjb_backward(model: &MfgModel, m_path: &SpaceTimeField, g: ArrayView1<f64>) -> Result<SpaceTimeField> {
    let grid = &model.grid;
    grid.check_len(g.len())?;
    if m_path.n_levels() != grid.n_t() || m_path.n_x() != grid.n_x() {
        return Err(MfgError::GridMismatch {
            expected: grid.n_x(),
            found: m_path.n_x(),
        });
    }
    if !stencil::neumann_compatible(g, grid.dx()) {
        return Err(MfgError::Incompatible(
            "terminal datum does not have zero slope at the walls".into(),
        ));
    }
    let op = BackwardOperator::new(grid, &model.a, UpwindDrift::zero(grid))?;
    let f = coupling_path(model, m_path)?;
    let dt = grid.dt();
    let n_t = grid.n_t();
    let mut u = Array2::zeros((n_t, grid.n_x()));
    u.row_mut(n_t - 1).assign(&g);
    for n in (0..n_t - 1).rev() {
        let next = u.row(n + 1);
        let mut rhs = next.to_owned();
        rhs.scaled_add(-dt, &numerical_hamiltonian(model, next));
        let mut un = op.implicit_solve(rhs.view());
        un.scaled_add(dt, &f.level(n));
        u.row_mut(n).assign(&un);
    }
    Ok(SpaceTimeField::from_array_raw(u))
}
