//! Collision frequency and kernel of the hard-sphere linearized operator.
//!
//! Two scalings coexist:
//!
//! * [`collision_frequency`] and [`kernel_value`] are the closed forms in the
//!   original velocity variable `ξ`, in which they annihilate functions
//!   proportional to `e^{−|ξ|²/2}`.
//! * The velocity grid uses `v = √2 ξ` so that null-space functions carry the
//!   factor `e^{−|v|²/4} = μ^{1/2}(v)` of the unit-mass Maxwellian. In that
//!   variable the frequency is `ν_p(|v|/√2)` and the kernel picks up the
//!   Jacobian `2^{-3/2}`; see [`nu_grid`] and [`kernel_grid`].

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erf;

use super::params::{norm, norm2, CollisionParams};
use crate::error::{Error, Result};

/// Collision frequency `ν(x)` as a function of the speed `x = |ξ|`.
///
/// `ν = π² q₀ ((2x + 1/x)∫₀ˣ e^{−z²}dz + e^{−x²})`, continued at `x = 0` by
/// its Taylor series `π² q₀ (2 + 2x²/3 + …)`.
pub fn nu_of_speed(x: f64, q0: f64) -> f64 {
    let x = x.abs();
    if x < 1e-4 {
        let x2 = x * x;
        return PI * PI * q0 * (2.0 + 2.0 * x2 / 3.0 - x2 * x2 / 15.0);
    }
    let integral = 0.5 * PI.sqrt() * erf(x);
    PI * PI * q0 * ((2.0 * x + 1.0 / x) * integral + (-x * x).exp())
}

/// Closed-form collision frequency `ν(v)`.
pub fn collision_frequency(v: [f64; 3], params: &CollisionParams) -> f64 {
    nu_of_speed(norm(v), params.q0)
}

/// Loss part `k₁(u,v) = π q₀ |u−v| e^{−(|u|²+|v|²)/2}`.
pub fn k1(u: [f64; 3], v: [f64; 3], q0: f64) -> f64 {
    let r = norm([u[0] - v[0], u[1] - v[1], u[2] - v[2]]);
    PI * q0 * r * (-0.5 * (norm2(u) + norm2(v))).exp()
}

/// Gain part `k₂(u,v) = (2π q₀/|u−v|) e^{−|u−v|²/4 − (|u|²−|v|²)²/(4|u−v|²)}`.
///
/// Returns `+∞` on the diagonal.
pub fn k2(u: [f64; 3], v: [f64; 3], q0: f64) -> f64 {
    let r2 = norm2([u[0] - v[0], u[1] - v[1], u[2] - v[2]]);
    if r2 == 0.0 {
        return f64::INFINITY;
    }
    let d = norm2(u) - norm2(v);
    2.0 * PI * q0 / r2.sqrt() * (-0.25 * r2 - d * d / (4.0 * r2)).exp()
}

/// Kernel `k(u,v) = k₂(u,v) − k₁(u,v)`; fails on the singular set `u = v`.
pub fn kernel_value(u: [f64; 3], v: [f64; 3], params: &CollisionParams) -> Result<f64> {
    if u == v {
        return Err(Error::SingularInput(format!("kernel evaluated at u = v = {u:?}")));
    }
    Ok(k2(u, v, params.q0) - k1(u, v, params.q0))
}

/// Collision frequency in the grid variable `v = √2 ξ`.
#[inline]
pub fn nu_grid(v: [f64; 3], q0: f64) -> f64 {
    nu_of_speed(norm(v) / SQRT_2, q0)
}

/// Kernel in the grid variable, including the Jacobian of `ξ = v/√2`.
///
/// Written out directly so that it is bitwise symmetric in `(u, v)`;
/// returns `+∞` on the diagonal.
#[inline]
pub fn kernel_grid(u: [f64; 3], v: [f64; 3], q0: f64) -> f64 {
    let dx = u[0] - v[0];
    let dy = u[1] - v[1];
    let dz = u[2] - v[2];
    // All squared quantities in ξ-units (factor 1/2).
    let r2 = 0.5 * (dx * dx + dy * dy + dz * dz);
    let su = 0.5 * norm2(u);
    let sv = 0.5 * norm2(v);
    let d = su - sv;
    let gain = if r2 == 0.0 { f64::INFINITY } else { 2.0 * PI * q0 / r2.sqrt() * (-0.25 * r2 - d * d / (4.0 * r2)).exp() };
    let loss = PI * q0 * r2.sqrt() * (-0.5 * (su + sv)).exp();
    (gain - loss) * (0.5f64).powf(1.5)
}
