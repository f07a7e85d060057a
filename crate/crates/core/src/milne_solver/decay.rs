//! Exponential decay fits of Milne profiles.

use serde::Serialize;

use super::MilneSolution;
use crate::collision_core::MacroState;
use crate::error::{Error, Result};
use crate::quadrature::linear_fit;

/// Relative level below which profile values count as rounding noise.
pub const NOISE_FLOOR: f64 = 1e-11;

/// Least-squares fit `log ‖g(η)‖ ≈ log C − K₀ η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted rate `K₀` (positive for decay).
    pub k0: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    /// Number of points used.
    pub points: usize,
    /// Window actually used `[η_lo, η_hi]`.
    pub window: (f64, f64),
}

/// Fits `log y` against `η` over `[lo, hi]`, skipping values below the
/// noise floor `NOISE_FLOOR · max y`.
pub fn fit_decay(eta: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<DecayFit> {
    if eta.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: eta.len(), found: y.len() });
    }
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = NOISE_FLOOR * peak.max(f64::MIN_POSITIVE);
    let (xs, ls): (Vec<f64>, Vec<f64>) =
        eta.iter().zip(y).filter(|(e, v)| **e >= lo && **e <= hi && v.abs() > floor && peak > 0.0).map(|(e, v)| (*e, v.abs().ln())).unzip();
    if xs.len() < 3 {
        return Err(Error::FitDegenerate(format!("only {} profile values above the noise floor in [{lo}, {hi}]", xs.len())));
    }
    let (slope, _, r2) = linear_fit(&xs, &ls)?;
    Ok(DecayFit { k0: -slope, r_squared: r2, points: xs.len(), window: (xs[0], *xs.last().expect("nonempty")) })
}

/// Fits the decay of `‖g(η) − s‖` over `η ∈ [1, L/2]`, with `s = 0` when `None`.
pub fn fit_decay_window(sol: &MilneSolution, shift: Option<&MacroState>) -> Result<DecayFit> {
    let y = match shift {
        Some(s) => sol.distance_profile(s),
        None => sol.norm_profile(),
    };
    fit_decay(&sol.eta, &y, 1.0, 0.5 * sol.geom.l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_is_recovered() {
        let eta: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = eta.iter().map(|e| 2.0 * (-0.3 * e).exp()).collect();
        let f = fit_decay(&eta, &y, 1.0, 5.0).unwrap();
        assert!((f.k0 - 0.3).abs() < 1e-12);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn zero_profile_is_degenerate() {
        let eta: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert!(matches!(fit_decay(&eta, &[0.0; 10], 0.0, 9.0), Err(Error::FitDegenerate(_))));
    }
}
