//! Finite-difference solver for first-order mean field games on `[0, 1]` with
//! Neumann conditions, their linearization, and the associated master field
//! `U(t0, x, m0)` with its flat and intrinsic derivatives.

pub mod error;
pub mod field;
pub mod fit;
pub mod grid;
pub mod linearized;
pub mod master;
pub mod measure;
pub mod metrics;
pub mod mfg;
pub mod model;
pub mod parabolic;
pub mod stencil;

pub use error::{MfgError, Result};
pub use field::SpaceTimeField;
pub use fit::{fit_rate, RateFit};
pub use grid::Grid;
pub use measure::{GridMeasure, SignedGridMeasure};
pub use model::MfgModel;
