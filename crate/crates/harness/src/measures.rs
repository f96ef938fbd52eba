//! Initial measures named in configs and seeded random families.

use mfgmaster_core::{Grid, GridMeasure, Result};
use ndarray::Array1;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    Uniform,
    /// `1 + amplitude cos(mode pi x)`, normalized.
    Cosine { amplitude: f64, mode: usize },
    /// `floor + exp(-(x - center)^2 / (2 width^2))`, normalized.
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default)]
        floor: f64,
    },
    /// Piecewise-linear hat on `[center - half_width, center + half_width]` over a floor.
    Tent {
        center: f64,
        half_width: f64,
        #[serde(default)]
        floor: f64,
    },
    /// Point mass at the node nearest to `x`.
    Delta { x: f64 },
    /// Nodal values, normalized.
    Table { values: Vec<f64> },
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self::Cosine {
            amplitude: 0.5,
            mode: 1,
        }
    }
}

impl MeasureSpec {
    pub fn build(&self, grid: &Grid) -> Result<GridMeasure> {
        let pi = std::f64::consts::PI;
        match self {
            Self::Uniform => Ok(GridMeasure::uniform(grid)),
            Self::Cosine { amplitude, mode } => {
                let k = *mode as f64;
                GridMeasure::normalized(grid, grid.nodes().mapv(|x| 1.0 + amplitude * (k * pi * x).cos()))
            }
            Self::Gaussian { center, width, floor } => GridMeasure::normalized(
                grid,
                grid.nodes()
                    .mapv(|x| floor + (-(x - center).powi(2) / (2.0 * width * width)).exp()),
            ),
            Self::Tent {
                center,
                half_width,
                floor,
            } => GridMeasure::normalized(
                grid,
                grid.nodes()
                    .mapv(|x| floor + (1.0 - (x - center).abs() / half_width).max(0.0)),
            ),
            Self::Delta { x } => {
                let j = (x.clamp(0.0, 1.0) / grid.dx()).round() as usize;
                GridMeasure::delta(grid, j.min(grid.n_x() - 1))
            }
            Self::Table { values } => GridMeasure::normalized(grid, Array1::from(values.clone())),
        }
    }
}

/// Mixture of one to three Gaussian bumps over a positive floor.
pub fn random_measure<R: Rng>(grid: &Grid, rng: &mut R) -> Result<GridMeasure> {
    let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.05..0.2), rng.gen_range(0.2..1.0)))
        .collect();
    let floor = rng.gen_range(0.05..0.5);
    let values = grid.nodes().mapv(|x| {
        floor
            + bumps
                .iter()
                .map(|(c, w, h)| h * (-(x - c).powi(2) / (2.0 * w * w)).exp())
                .sum::<f64>()
    });
    GridMeasure::normalized(grid, values)
}

/// Difference of two random measures, so it has zero mass.
pub fn random_zero_mean<R: Rng>(grid: &Grid, rng: &mut R) -> Result<Array1<f64>> {
    let a = random_measure(grid, rng)?;
    let b = random_measure(grid, rng)?;
    Ok(&a.density() - &b.density())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn named_measures_are_probabilities() {
        let grid = Grid::new(41, 3, 0.0, 1.0, 0.5).unwrap();
        let specs = [
            MeasureSpec::Uniform,
            MeasureSpec::default(),
            MeasureSpec::Gaussian {
                center: 0.3,
                width: 0.1,
                floor: 0.0,
            },
            MeasureSpec::Tent {
                center: 0.5,
                half_width: 0.2,
                floor: 0.1,
            },
            MeasureSpec::Delta { x: 0.5 },
            MeasureSpec::Table { values: vec![1.0; 41] },
        ];
        for s in specs {
            let m = s.build(&grid).unwrap();
            assert!((m.mass(&grid) - 1.0).abs() < 1e-12, "{s:?}");
        }
        let d = MeasureSpec::Delta { x: 0.5 }.build(&grid).unwrap();
        assert_eq!(d.density()[20], 1.0 / grid.weights()[20]);
    }

    #[test]
    fn random_families_are_seeded() {
        let grid = Grid::new(31, 3, 0.0, 1.0, 0.5).unwrap();
        let a = random_measure(&grid, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = random_measure(&grid, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let z = random_zero_mean(&grid, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(grid.integrate(z.view()).abs() < 1e-12);
    }
}
