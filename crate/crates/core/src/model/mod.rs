//! Model data: diffusion, Hamiltonian, couplings, and the JSON description.

mod coefficient;
mod hamiltonian;
mod kernel;
mod validate;

use std::sync::Arc;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub use coefficient::EllipticCoefficient;
pub use hamiltonian::{cosine_series, Hamiltonian, Sqrt1p, ZeroHamiltonian};
pub use kernel::{coupling_flat_derivative, coupling_value, CouplingKernel};
pub use validate::{validate_hypotheses, HypothesisCheck, ValidationReport};

use crate::error::{MfgError, Result};
use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct MfgModel {
    pub grid: Grid,
    pub a: EllipticCoefficient,
    pub hamiltonian: Arc<dyn Hamiltonian>,
    pub f: CouplingKernel,
    pub g: CouplingKernel,
}

impl MfgModel {
    pub fn new(
        grid: Grid,
        a: EllipticCoefficient,
        hamiltonian: Arc<dyn Hamiltonian>,
        f: CouplingKernel,
        g: CouplingKernel,
    ) -> Result<Self> {
        grid.check_len(a.values().len())?;
        grid.check_len(f.n_x())?;
        grid.check_len(g.n_x())?;
        Ok(Self {
            grid,
            a,
            hamiltonian,
            f,
            g,
        })
    }

    /// `a = 1`, `H = sqrt(1 + p^2) - 1`, `k_F = k_G = 0.5 + 0.3 cos(pi x) cos(pi y)` on `[0, 1]`.
    pub fn reference(n_x: usize, n_t: usize) -> Result<Self> {
        let grid = Grid::new(n_x, n_t, 0.0, 1.0, 0.5)?;
        let a = EllipticCoefficient::constant(&grid, 1.0)?;
        let f = CouplingKernel::from_cosine(&grid, &[0.5, 0.3]);
        let g = f.clone();
        Self::new(grid, a, Arc::new(Sqrt1p::default()), f, g)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let grid = Grid::new(spec.n_x, spec.n_t, spec.t0, spec.t_end, spec.alpha)?;
        let a = match &spec.a {
            CoefficientSpec::Constant { value } => EllipticCoefficient::constant(&grid, *value)?,
            CoefficientSpec::Affine { a0, a1 } => EllipticCoefficient::affine(&grid, *a0, *a1)?,
            CoefficientSpec::Table { values } => {
                EllipticCoefficient::from_values(&grid, Array1::from(values.clone()))?
            }
        };
        let hamiltonian: Arc<dyn Hamiltonian> = match &spec.hamiltonian {
            HamiltonianSpec::Sqrt1p { potential } => Arc::new(Sqrt1p::new(potential.clone())),
            HamiltonianSpec::Zero => Arc::new(ZeroHamiltonian),
        };
        let f = CouplingKernel::from_cosine(&grid, &spec.f.cos_coeffs);
        let g = CouplingKernel::from_cosine(&grid, &spec.g.cos_coeffs);
        Self::new(grid, a, hamiltonian, f, g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)
            .map_err(|e| MfgError::InvalidModel(format!("model JSON: {e}")))?;
        Self::from_spec(&spec)
    }

    /// Same model on a different time window over the same spatial lattice.
    pub fn with_grid(&self, grid: Grid) -> Result<Self> {
        if grid.n_x() != self.grid.n_x() {
            return Err(MfgError::GridMismatch {
                expected: self.grid.n_x(),
                found: grid.n_x(),
            });
        }
        Ok(Self {
            grid,
            ..self.clone()
        })
    }

    /// Restriction of the time window to `[t_level, T]`.
    pub fn restrict_from(&self, level: usize) -> Result<Self> {
        self.with_grid(self.grid.restrict_from(level)?)
    }

    /// Time window `[t0, T]` with the step kept as close as possible.
    pub fn with_start(&self, t0: f64) -> Result<Self> {
        self.with_grid(self.grid.with_start(t0)?)
    }

    /// Largest `dt * (upwind spread) / dx` of the scheme, which must not exceed one.
    pub fn cfl_number(&self) -> f64 {
        self.grid.dt() * (self.hamiltonian.lip_p() + self.a.max_slope()) / self.grid.dx()
    }
}

/// JSON model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_x: usize,
    pub n_t: usize,
    #[serde(default)]
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub a: CoefficientSpec,
    pub hamiltonian: HamiltonianSpec,
    #[serde(rename = "F")]
    pub f: KernelSpec,
    #[serde(rename = "G")]
    pub g: KernelSpec,
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoefficientSpec {
    Constant { value: f64 },
    Affine { a0: f64, a1: f64 },
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HamiltonianSpec {
    Sqrt1p {
        #[serde(default)]
        potential: Vec<f64>,
    },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub cos_coeffs: Vec<f64>,
}

impl ModelSpec {
    pub fn reference(n_x: usize, n_t: usize) -> Self {
        Self {
            n_x,
            n_t,
            t0: 0.0,
            t_end: 1.0,
            alpha: 0.5,
            a: CoefficientSpec::Constant { value: 1.0 },
            hamiltonian: HamiltonianSpec::Sqrt1p { potential: vec![] },
            f: KernelSpec {
                cos_coeffs: vec![0.5, 0.3],
            },
            g: KernelSpec {
                cos_coeffs: vec![0.5, 0.3],
            },
        }
    }
}
