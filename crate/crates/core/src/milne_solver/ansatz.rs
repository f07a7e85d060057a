//! Explicit treatment of a null-space source through a polynomial ansatz.
//!
//! For `S_Q = Σ S_{Q,k} e_k` the ansatz
//! `g₂ = μ^{1/2}(A v_η + B₁ + B₂ v_η v_φ + B₃ v_η v_ψ + C v_η |v|²)` turns the
//! solvability conditions into the linear system `P y' + M(η) y = −S_Q` for
//! `y = (A, B₁, B₂, B₃, C)`, with
//!
//! ```text
//! P = | 1 0 0 0  5 |     M = | G₁+G₂ 0 0       0       5G₁+5G₂   |
//!     | 0 1 0 0  0 |         | 0     0 0       0       0         |
//!     | 0 0 1 0  0 |         | 0     0 2G₁+G₂  0       0         |
//!     | 0 0 0 1  0 |         | 0     0 0       G₁+2G₂  0         |
//!     | 1 0 0 0 10 |         | G₁+G₂ 0 0       0       10G₁+10G₂ |
//! ```
//!
//! Here `S_{Q,k}` are coefficients on the unnormalized directions
//! `μ^{1/2}{1, v_η, v_φ, v_ψ, (|v|²−3)/2}`. The system is integrated backward
//! from `y(L) = 0` so that `g₂` vanishes at the far end.

use serde::Serialize;

use crate::collision_core::params::sqrt_mu;
use crate::collision_core::VelocityGrid;
use crate::error::{Error, Result};
use crate::layer_geometry::{force, LayerGeometry};

/// Ansatz coefficients along η.
#[derive(Debug, Clone, Serialize)]
pub struct AnsatzProfile {
    /// Output nodes (ascending).
    pub eta: Vec<f64>,
    /// `(A, B₁, B₂, B₃, C)` at each node.
    pub coeffs: Vec<[f64; 5]>,
    /// Largest accepted local error estimate (step doubling).
    pub residual: f64,
    /// Number of accepted steps.
    pub steps: usize,
}

/// Right-hand side `y' = −P⁻¹(M y + S_Q)`.
fn rhs(geom: &LayerGeometry, s_q: &dyn Fn(f64) -> [f64; 5], eta: f64, y: &[f64; 5]) -> Result<[f64; 5]> {
    let g1 = force(geom, 1, eta.clamp(0.0, geom.l))?;
    let g2 = force(geom, 2, eta.clamp(0.0, geom.l))?;
    let s = s_q(eta);
    let g = g1 + g2;
    let z = [
        g * y[0] + 5.0 * g * y[4] + s[0],
        s[1],
        (2.0 * g1 + g2) * y[2] + s[2],
        (g1 + 2.0 * g2) * y[3] + s[3],
        g * y[0] + 10.0 * g * y[4] + s[4],
    ];
    // P⁻¹ on the (A, C) block: [[1, 5], [1, 10]]⁻¹ = [[2, −1], [−1/5, 1/5]].
    Ok([-(2.0 * z[0] - z[4]), -z[1], -z[2], -z[3], -((z[4] - z[0]) / 5.0)])
}

fn rk4_step(geom: &LayerGeometry, s_q: &dyn Fn(f64) -> [f64; 5], eta: f64, y: &[f64; 5], h: f64) -> Result<[f64; 5]> {
    let add = |a: &[f64; 5], b: &[f64; 5], s: f64| -> [f64; 5] { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = rhs(geom, s_q, eta, y)?;
    let k2 = rhs(geom, s_q, eta + 0.5 * h, &add(y, &k1, 0.5 * h))?;
    let k3 = rhs(geom, s_q, eta + 0.5 * h, &add(y, &k2, 0.5 * h))?;
    let k4 = rhs(geom, s_q, eta + h, &add(y, &k3, h))?;
    Ok(std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Solves the ansatz system backward from `y(L) = 0` and reports the
/// coefficients at the ascending nodes `eta_out` (which must end at `L`).
pub fn solve_kernel_ansatz(s_q: &dyn Fn(f64) -> [f64; 5], geom: &LayerGeometry, eta_out: &[f64], tol: f64) -> Result<AnsatzProfile> {
    if eta_out.len() < 2 || eta_out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("output nodes must be strictly ascending".into()));
    }
    if (eta_out[eta_out.len() - 1] - geom.l).abs() > 1e-12 * geom.l || eta_out[0] < 0.0 {
        return Err(Error::InvalidParameter("output nodes must lie in [0, L] and end at L".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    // Exponential decay of the source, checked on the output nodes.
    let amp = |e: f64| s_q(e).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let total = eta_out.iter().fold(0.0f64, |m, &e| m.max(amp(e)));
    let tail = eta_out.iter().filter(|&&e| e >= 0.5 * geom.l).fold(0.0f64, |m, &e| m.max(amp(e)));
    if total > 0.0 && tail > 0.5 * total {
        return Err(Error::Precondition(format!("source does not decay: tail/peak = {}", tail / total)));
    }
    let n = eta_out.len();
    let mut coeffs = vec![[0.0; 5]; n];
    let mut y = [0.0; 5];
    let mut residual = 0.0f64;
    let mut steps = 0usize;
    let mut h = -(eta_out[n - 1] - eta_out[n - 2]).min(0.1);
    let mut integral = 0.0;
    for k in (0..n - 1).rev() {
        let (start, end) = (eta_out[k + 1], eta_out[k]);
        let mut eta = start;
        while eta > end {
            if eta + h < end {
                h = end - eta;
            }
            let full = rk4_step(geom, s_q, eta, &y, h)?;
            let half = rk4_step(geom, s_q, eta, &y, 0.5 * h)?;
            let two = rk4_step(geom, s_q, eta + 0.5 * h, &half, 0.5 * h)?;
            let scale = 1.0 + two.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let err = full.iter().zip(&two).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / 15.0;
            if err <= tol * scale || h.abs() < 1e-10 {
                // Richardson-extrapolated accepted step.
                y = std::array::from_fn(|i| two[i] + (two[i] - full[i]) / 15.0);
                integral += h.abs() * amp(eta);
                eta += h;
                residual = residual.max(err / scale);
                steps += 1;
                let grow = if err == 0.0 { 2.0 } else { (0.9 * (tol * scale / err).powf(0.2)).clamp(0.2, 2.0) };
                h = (h * grow).max(-0.5);
            } else {
                h *= (0.9 * (tol * scale / err).powf(0.2)).clamp(0.1, 0.5);
            }
            if steps > 10_000_000 {
                return Err(Error::NonConvergence { what: "ansatz ODE".into(), iterations: steps, residual: err });
            }
        }
        coeffs[k] = y;
    }
    let sup = coeffs.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    if !sup.is_finite() || sup > 1e8 * (1.0 + integral) {
        return Err(Error::Growth(format!("ansatz coefficients reach {sup:e} for a source of size {integral:e}")));
    }
    Ok(AnsatzProfile { eta: eta_out.to_vec(), coeffs, residual, steps })
}

/// Evaluates `g₂(η_k, ·)` on a velocity grid from the ansatz coefficients.
pub fn ansatz_velocity_profile(coeffs: &[f64; 5], grid: &VelocityGrid) -> Vec<f64> {
    grid.sample(|v| {
        let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        sqrt_mu(v) * (coeffs[0] * v[0] + coeffs[1] + coeffs[2] * v[0] * v[1] + coeffs[3] * v[0] * v[2] + coeffs[4] * v[0] * r2)
    })
}
