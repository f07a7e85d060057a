//! Weighted kernel integrals from the regularity estimates.
//!
//! Evaluates `∫ e^{δ|u−v|²} |k(u,v)| ⟨v⟩^θ e^{ρ|v|²} / (⟨u⟩^θ e^{ρ|u|²}) du`
//! with the closed-form kernel in the original variable. The integrand is
//! axisymmetric about `v`, so it is integrated in `r = |u − v|` and the cosine
//! `c` of the angle between `u − v` and `v`; the `1/r` singularity of `k₂` is
//! absorbed by the `r² dr` Jacobian.

use std::f64::consts::PI;

use serde::Serialize;

use super::grid::VelocityGrid;
use super::params::{norm, CollisionParams};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Value of a weighted kernel integral, with a divergence warning.
#[derive(Debug, Clone, Serialize)]
pub struct WeightedIntegral {
    /// Quadrature value.
    pub value: f64,
    /// `⟨v⟩ · value`, the quantity bounded uniformly in `v`.
    pub scaled: f64,
    /// Set when `δ` is at or beyond the threshold `1/4 − ρ²` at which the
    /// exponent's quadratic form stops being negative definite, or when the
    /// integrand has not decayed at the truncation radius.
    pub divergence_warning: Option<String>,
}

/// Threshold on `δ` above which the weighted integrand stops decaying.
pub fn delta_threshold(rho: f64) -> f64 {
    0.25 - rho * rho
}

/// `log` of the integrand times `r²`, as a function of `(r, c)`.
fn log_integrand(r: f64, c: f64, speed: f64, delta: f64, rho: f64, theta: f64, q0: f64) -> Option<f64> {
    let v2 = speed * speed;
    let u2 = (v2 + r * r + 2.0 * r * speed * c).max(0.0);
    let gain = 2.0 * PI * q0 / r * (-0.25 * r * r - 0.25 * (r + 2.0 * speed * c).powi(2)).exp();
    let loss = PI * q0 * r * (-0.5 * (u2 + v2)).exp();
    let k = (gain - loss).abs();
    if k == 0.0 {
        return None;
    }
    let weight = delta * r * r + 0.5 * theta * ((1.0 + v2).ln() - (1.0 + u2).ln()) + rho * (v2 - u2);
    Some(k.ln() + weight + 2.0 * r.ln())
}

/// Computes the weighted kernel integral at `v`.
///
/// `grid` supplies the velocity truncation radius `v_max·√3`; the integral
/// itself extends to `r = 3(|v| + v_max√3)`, and a warning is raised if the
/// integrand is still non-negligible there.
pub fn weighted_kernel_integral(v: [f64; 3], delta: f64, rho: f64, theta: f64, grid: &VelocityGrid, params: &CollisionParams) -> Result<WeightedIntegral> {
    params.validate()?;
    if !(0.0..0.25).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1/4), got {rho}")));
    }
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!("theta must be nonnegative, got {theta}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be nonnegative, got {delta}")));
    }
    let speed = norm(v);
    let radius = grid.v_max * 3f64.sqrt();
    let r_max = 3.0 * (speed + radius);
    let (gr, wr) = gauss_legendre(12, 0.0, 1.0)?;
    let (gc, wc) = gauss_legendre(12, 0.0, 1.0)?;
    let r_panels = (r_max / 0.5).ceil() as usize;
    let hr = r_max / r_panels as f64;
    let c_panels = 16;
    let hc = 2.0 / c_panels as f64;
    let mut total = 0.0;
    let mut peak = f64::NEG_INFINITY;
    let mut tail = f64::NEG_INFINITY;
    for p in 0..r_panels {
        for (xr, wxr) in gr.iter().zip(&wr) {
            let r = (p as f64 + xr) * hr;
            for q in 0..c_panels {
                for (xc, wxc) in gc.iter().zip(&wc) {
                    let c = -1.0 + (q as f64 + xc) * hc;
                    if let Some(l) = log_integrand(r, c, speed, delta, rho, theta, params.q0) {
                        peak = peak.max(l);
                        if p + 1 == r_panels {
                            tail = tail.max(l);
                        }
                        total += hr * wxr * hc * wxc * l.exp();
                    }
                }
            }
        }
    }
    let value = 2.0 * PI * total;
    let mut warning = None;
    if delta >= delta_threshold(rho) {
        warning = Some(format!("delta = {delta} is at or above the decay threshold 1/4 - rho^2 = {}", delta_threshold(rho)));
    } else if tail > peak - 25.0 {
        warning = Some(format!("integrand has not decayed at r = {r_max}"));
    }
    if !value.is_finite() {
        warning = Some("integral overflowed".into());
    }
    Ok(WeightedIntegral { value, scaled: (1.0 + speed * speed).sqrt() * value, divergence_warning: warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_at_origin_and_warns_beyond_threshold() {
        let g = VelocityGrid::new(8, 6.0).unwrap();
        let p = CollisionParams::default();
        let w = weighted_kernel_integral([0.0; 3], 0.01, 0.0, 3.0, &g, &p).unwrap();
        assert!(w.value.is_finite() && w.value > 0.0 && w.divergence_warning.is_none());
        let w = weighted_kernel_integral([0.0; 3], 0.3, 0.24, 3.0, &g, &p).unwrap();
        assert!(w.divergence_warning.is_some());
    }

    #[test]
    fn unweighted_integral_matches_closed_form_at_origin() {
        // δ = ρ = θ = 0, v = 0: ∫ k₂(u,0) du = 8π²q₀ ∫ r e^{-r²/2} dr = 8π²q₀
        // and ∫ k₁(u,0) du = 4π²q₀ ∫ r³ e^{-r²/2} dr = 8π²q₀; the absolute value
        // of their difference integrates to 4π²q₀·∫ r|2 − r²|e^{-r²/2} dr.
        let g = VelocityGrid::new(8, 6.0).unwrap();
        let p = CollisionParams::default();
        let w = weighted_kernel_integral([0.0; 3], 0.0, 0.0, 0.0, &g, &p).unwrap();
        // ∫₀^∞ r|2 − r²| e^{-r²/2} dr = 4/e (split at r = √2).
        let expect = 4.0 * PI * PI * 4.0 / 1f64.exp();
        assert!((w.value - expect).abs() < 2e-4 * expect, "{} vs {expect}", w.value);
    }

    #[test]
    fn rejects_bad_rho() {
        let g = VelocityGrid::new(8, 6.0).unwrap();
        assert!(weighted_kernel_integral([0.0; 3], 0.01, 0.3, 3.0, &g, &CollisionParams::default()).is_err());
    }
}
