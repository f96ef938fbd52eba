//! Least-squares power-law fits for convergence studies.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Fit of `log(error) = slope * log(scale) + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Number of input points dropped for a non-positive scale or error.
    pub dropped: usize,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(s, e)| *s > 0.0 && *e > 0.0 && s.is_finite() && e.is_finite())
        .collect();
    if usable.len() < 3 {
        return Err(MfgError::InvalidInput(format!(
            "rate fit needs 3 usable points, got {}",
            usable.len()
        )));
    }
    let logs: Vec<(f64, f64)> = usable.iter().map(|(s, e)| (s.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(MfgError::InvalidInput("rate fit needs distinct scales".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        points: usable,
        slope,
        intercept,
        r_squared,
        dropped: points.len() - logs.len(),
    })
}
