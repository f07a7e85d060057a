//! Curved-slab geometry of the kinetic boundary layer.
//!
//! In the rescaled normal variable `η ∈ [0, L]`, `L = ε^{-1/2}`, the two
//! principal curvatures enter through the potentials
//! `W_i(η) = ln(R_i/(R_i − εη))` and forces `G_i = −dW_i/dη = −ε/(R_i − εη)`.
//! Characteristics of the transport operator
//!
//! `v_η ∂_η + G₁(v_φ² ∂_{v_η} − v_η v_φ ∂_{v_φ}) + G₂(v_ψ² ∂_{v_η} − v_η v_ψ ∂_{v_ψ})`
//!
//! conserve `E₁ = |v|²`, `E₂ = v_φ e^{−W₁}`, `E₃ = v_ψ e^{−W₂}`, and the
//! weight `ζ = √(E₁ − E₂² − E₃²)`, which vanishes on the grazing set.

use serde::Serialize;

use crate::collision_core::kernel::nu_grid;
use crate::collision_core::CollisionParams;
use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;

/// Clamp threshold separating rounding from genuinely negative radicands.
pub const RADICAND_CLAMP: f64 = 1e-14;

/// Geometry of one boundary-layer instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerGeometry {
    /// First principal radius of curvature.
    pub r1: f64,
    /// Second principal radius of curvature.
    pub r2: f64,
    /// Knudsen number `ε ∈ (0, 1)`.
    pub epsilon: f64,
    /// Layer length `L = ε^{-1/2}`.
    pub l: f64,
}

impl LayerGeometry {
    /// Validated constructor; requires `√ε ≤ R_i/2` so that `R_i − εη ≥ R_i/2` on `[0, L]`.
    pub fn new(r1: f64, r2: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0,1), got {epsilon}")));
        }
        for r in [r1, r2] {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidParameter(format!("radii must be positive, got {r}")));
            }
            if epsilon.sqrt() > 0.5 * r {
                return Err(Error::InvalidParameter(format!("sqrt(epsilon) = {} exceeds R/2 = {}", epsilon.sqrt(), 0.5 * r)));
            }
        }
        Ok(Self { r1, r2, epsilon, l: epsilon.powf(-0.5) })
    }

    fn radius(&self, i: usize) -> Result<f64> {
        match i {
            1 => Ok(self.r1),
            2 => Ok(self.r2),
            _ => Err(Error::InvalidParameter(format!("curvature index must be 1 or 2, got {i}"))),
        }
    }

    fn check_eta(&self, eta: f64) -> Result<()> {
        if !(eta >= 0.0 && eta <= self.l * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("eta = {eta} outside [0, {}]", self.l)));
        }
        Ok(())
    }

    /// `R_i − εη`, checked positive.
    fn gap(&self, i: usize, eta: f64) -> Result<f64> {
        let r = self.radius(i)?;
        let g = r - self.epsilon * eta;
        if !(g > 0.0) {
            return Err(Error::Domain(format!("R_{i} - eps*eta = {g} is not positive")));
        }
        Ok(g)
    }

    /// `e^{W_i(η') − W_i(η)} = (R_i − εη)/(R_i − εη')`.
    fn stretch(&self, i: usize, eta: f64, eta_target: f64) -> Result<f64> {
        Ok(self.gap(i, eta)? / self.gap(i, eta_target)?)
    }
}

/// Potential `W_i(η) = ln(R_i/(R_i − εη))`; `W_i(0) = 0` exactly.
pub fn w_potential(geom: &LayerGeometry, i: usize, eta: f64) -> Result<f64> {
    geom.check_eta(eta)?;
    let r = geom.radius(i)?;
    geom.gap(i, eta)?;
    // ln(R/(R − εη)) = −ln(1 − εη/R), accurate for small εη.
    Ok(-(-geom.epsilon * eta / r).ln_1p())
}

/// Force `G_i(η) = −ε/(R_i − εη)`.
pub fn force(geom: &LayerGeometry, i: usize, eta: f64) -> Result<f64> {
    geom.check_eta(eta)?;
    Ok(-geom.epsilon / geom.gap(i, eta)?)
}

/// Weight `ζ(η, v) = √(|v|² − ((R₁−εη)/R₁)² v_φ² − ((R₂−εη)/R₂)² v_ψ²)`.
///
/// Evaluated as `√(v_η² + (1 − e^{−2W₁}) v_φ² + (1 − e^{−2W₂}) v_ψ²)`, which is
/// free of cancellation and equals `|v_η|` at `η = 0`.
pub fn zeta(geom: &LayerGeometry, eta: f64, v: [f64; 3]) -> Result<f64> {
    geom.check_eta(eta)?;
    let s1 = geom.gap(1, eta)? / geom.r1;
    let s2 = geom.gap(2, eta)? / geom.r2;
    let rad = v[0] * v[0] + (1.0 - s1 * s1) * v[1] * v[1] + (1.0 - s2 * s2) * v[2] * v[2];
    clamp_radicand(rad, v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).map(f64::sqrt)
}

fn clamp_radicand(rad: f64, scale: f64) -> Result<f64> {
    if rad >= 0.0 {
        Ok(rad)
    } else if rad >= -RADICAND_CLAMP * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Domain(format!("negative radicand {rad:e}: inconsistent phase-space state")))
    }
}

/// A phase-space point with its conserved quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharState {
    /// Normal position.
    pub eta: f64,
    /// Velocity `(v_η, v_φ, v_ψ)`.
    pub v: [f64; 3],
    /// `|v|²`.
    pub e1: f64,
    /// `v_φ e^{−W₁(η)}`.
    pub e2: f64,
    /// `v_ψ e^{−W₂(η)}`.
    pub e3: f64,
}

impl CharState {
    /// Builds a state and computes its invariants.
    pub fn new(geom: &LayerGeometry, eta: f64, v: [f64; 3]) -> Result<Self> {
        geom.check_eta(eta)?;
        let e1 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let e2 = v[1] * geom.gap(1, eta)? / geom.r1;
        let e3 = v[2] * geom.gap(2, eta)? / geom.r2;
        Ok(Self { eta, v, e1, e2, e3 })
    }
}

/// Velocity reached at `eta_target` along the characteristic through `(η, v)`, with `v_η' ≥ 0`.
pub fn transport_state(geom: &LayerGeometry, eta: f64, v: [f64; 3], eta_target: f64) -> Result<[f64; 3]> {
    geom.check_eta(eta)?;
    geom.check_eta(eta_target)?;
    let a = geom.stretch(1, eta, eta_target)?;
    let b = geom.stretch(2, eta, eta_target)?;
    let vphi = v[1] * a;
    let vpsi = v[2] * b;
    let rad = v[0] * v[0] + (1.0 - a * a) * v[1] * v[1] + (1.0 - b * b) * v[2] * v[2];
    let e1 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let rad = if rad >= 0.0 {
        rad
    } else if rad >= -1e-12 * e1.max(1.0) {
        0.0
    } else {
        return Err(Error::Unreachable(format!("characteristic through eta = {eta} does not reach {eta_target}")));
    };
    Ok([rad.sqrt(), vphi, vpsi])
}

/// Radicand `E₁ − v_φ'(y)² − v_ψ'(y)²` for the characteristic through `(η, v)`.
fn radicand_at(geom: &LayerGeometry, eta: f64, v: [f64; 3], y: f64) -> Result<f64> {
    let a = geom.stretch(1, eta, y)?;
    let b = geom.stretch(2, eta, y)?;
    Ok(v[0] * v[0] + (1.0 - a * a) * v[1] * v[1] + (1.0 - b * b) * v[2] * v[2])
}

/// Turning point `η⁺ ∈ (η, L]` where `v_η'` vanishes, for `v_η < 0`.
///
/// Returns `None` when the characteristic reaches `L` first.
pub fn turning_point(geom: &LayerGeometry, eta: f64, v: [f64; 3]) -> Result<Option<f64>> {
    geom.check_eta(eta)?;
    if !(v[0] < 0.0) {
        return Err(Error::InvalidParameter("turning_point requires v_eta < 0".into()));
    }
    if radicand_at(geom, eta, v, geom.l)? >= 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (eta, geom.l);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if radicand_at(geom, eta, v, mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Damping integral `H = ∫_{η_lo}^{η_hi} ν(v'(y))/v_η'(y) dy`.
///
/// `v` is the velocity at `η_hi`; `v'(y)` follows the characteristic. Since
/// `|v'| = |v|`, the collision frequency (in the grid velocity variable) is
/// constant along the path and the integral reduces to `ν·∫ dy/v_η'(y)`,
/// evaluated by tanh-sinh quadrature with the radicand expanded about the
/// nearer endpoint so that square-root singularities at turning points are
/// resolved without cancellation.
pub fn damping_integral(geom: &LayerGeometry, eta_hi: f64, eta_lo: f64, v: [f64; 3], params: &CollisionParams) -> Result<f64> {
    geom.check_eta(eta_hi)?;
    geom.check_eta(eta_lo)?;
    if eta_lo > eta_hi {
        return Err(Error::InvalidParameter("damping_integral needs eta_lo <= eta_hi".into()));
    }
    let nu = nu_grid(v, params.q0);
    if eta_lo == eta_hi {
        return Ok(0.0);
    }
    let e1 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if v[1] == 0.0 && v[2] == 0.0 {
        if v[0] == 0.0 {
            return Err(Error::ZeroVelocity);
        }
        return Ok(nu * (eta_hi - eta_lo) / v[0].abs());
    }
    let eps = geom.epsilon;
    // Invariant parts E_i² R_i² of the tangential energy.
    let c1 = (v[1] * geom.gap(1, eta_hi)?).powi(2);
    let c2 = (v[2] * geom.gap(2, eta_hi)?).powi(2);
    let r_lo = radicand_at(geom, eta_hi, v, eta_lo)?;
    let r_hi = v[0] * v[0];
    if r_lo < -1e-12 * e1 {
        return Err(Error::Unreachable(format!("characteristic does not reach eta = {eta_lo}")));
    }
    // rad(y) − rad(x) = −(y − x)·Σ c_i ε (2R_i − ε(x+y)) / ((R_i−εx)²(R_i−εy)²).
    let slope = |x: f64, y: f64| -> f64 {
        let mut s = 0.0;
        for (c, r) in [(c1, geom.r1), (c2, geom.r2)] {
            let gx = r - eps * x;
            let gy = r - eps * y;
            s += c * eps * (2.0 * r - eps * (x + y)) / (gx * gx * gy * gy);
        }
        s
    };
    let integral = tanh_sinh(
        |y, da, db| {
            let rad = if da <= db { r_lo - da * slope(eta_lo, y) } else { r_hi + db * slope(y, eta_hi) };
            if rad <= 0.0 {
                f64::INFINITY
            } else {
                1.0 / rad.sqrt()
            }
        },
        eta_lo,
        eta_hi,
        1e-12,
    )?;
    Ok(nu * integral)
}

/// One sample of a traced characteristic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathPoint {
    /// Arc parameter.
    pub s: f64,
    /// State at `s`.
    pub state: CharState,
    /// Weight `ζ` at the state.
    pub zeta: f64,
    /// Relative drifts of `E₁, E₂, E₃, ζ` from the start.
    pub drift: [f64; 4],
}

/// A traced characteristic.
#[derive(Debug, Clone, Serialize)]
pub struct CharPath {
    /// Samples, including the start.
    pub points: Vec<PathPoint>,
    /// `true` if the trace stopped because `η` left `[0, L]`.
    pub left_layer: bool,
    /// Largest relative drift of each invariant over the path.
    pub max_drift: [f64; 4],
}

/// Relative drift threshold above which a trace step is rejected.
pub const DRIFT_REJECT: f64 = 1e-6;

fn rhs(geom: &LayerGeometry, y: [f64; 4]) -> [f64; 4] {
    let g1 = -geom.epsilon / (geom.r1 - geom.epsilon * y[0]);
    let g2 = -geom.epsilon / (geom.r2 - geom.epsilon * y[0]);
    [y[1], g1 * y[2] * y[2] + g2 * y[3] * y[3], -g1 * y[1] * y[2], -g2 * y[1] * y[3]]
}

fn rk4_step(geom: &LayerGeometry, y: [f64; 4], h: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], s: f64| -> [f64; 4] { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = rhs(geom, y);
    let k2 = rhs(geom, add(y, k1, 0.5 * h));
    let k3 = rhs(geom, add(y, k2, 0.5 * h));
    let k4 = rhs(geom, add(y, k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn rel_drift(now: f64, start: f64) -> f64 {
    let d = (now - start).abs();
    if d == 0.0 {
        0.0
    } else {
        d / start.abs().max(f64::MIN_POSITIVE)
    }
}

/// RK4 integration of the characteristic ODE with per-step conservation report.
///
/// The trace stops early (with `left_layer = true`) when `η` leaves `[0, L]`.
pub fn trace_characteristic(geom: &LayerGeometry, start: CharState, ds: f64, n_steps: usize) -> Result<CharPath> {
    if !(ds > 0.0) {
        return Err(Error::InvalidParameter("ds must be positive".into()));
    }
    let z0 = zeta(geom, start.eta, start.v)?;
    let mut y = [start.eta, start.v[0], start.v[1], start.v[2]];
    let mut points = vec![PathPoint { s: 0.0, state: start, zeta: z0, drift: [0.0; 4] }];
    let mut max_drift = [0.0f64; 4];
    let mut left_layer = false;
    for step in 1..=n_steps {
        let next = rk4_step(geom, y, ds);
        if !(next[0] >= 0.0 && next[0] <= geom.l) {
            left_layer = true;
            break;
        }
        y = next;
        let st = CharState::new(geom, y[0], [y[1], y[2], y[3]])?;
        let z = zeta(geom, st.eta, st.v)?;
        let drift = [rel_drift(st.e1, start.e1), rel_drift(st.e2, start.e2), rel_drift(st.e3, start.e3), rel_drift(z, z0)];
        for k in 0..4 {
            max_drift[k] = max_drift[k].max(drift[k]);
        }
        if drift.iter().any(|&d| d > DRIFT_REJECT) {
            return Err(Error::StepRejected(format!("conservation drift {drift:?} at step {step} exceeds {DRIFT_REJECT:e}")));
        }
        points.push(PathPoint { s: step as f64 * ds, state: st, zeta: z, drift });
    }
    Ok(CharPath { points, left_layer, max_drift })
}

/// Applies the geometric transport operator to `ζ` by central differences with step `h`.
pub fn transport_of_zeta_fd(geom: &LayerGeometry, eta: f64, v: [f64; 3], h: f64) -> Result<f64> {
    let g1 = force(geom, 1, eta)?;
    let g2 = force(geom, 2, eta)?;
    let d = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let z_eta = d(&|s| zeta(geom, eta + s, v))?;
    let z_n = d(&|s| zeta(geom, eta, [v[0] + s, v[1], v[2]]))?;
    let z_phi = d(&|s| zeta(geom, eta, [v[0], v[1] + s, v[2]]))?;
    let z_psi = d(&|s| zeta(geom, eta, [v[0], v[1], v[2] + s]))?;
    Ok(v[0] * z_eta + g1 * (v[1] * v[1] * z_n - v[0] * v[1] * z_phi) + g2 * (v[2] * v[2] * z_n - v[0] * v[2] * z_psi))
}

/// `(min, max)` of `e^{W_i(η)}` over `[0, L]` for both potentials.
pub fn exp_w_range(geom: &LayerGeometry) -> Result<(f64, f64)> {
    let w1 = w_potential(geom, 1, geom.l)?;
    let w2 = w_potential(geom, 2, geom.l)?;
    Ok((1.0, w1.max(w2).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> LayerGeometry {
        LayerGeometry::new(1.0, 1.5, 0.01).unwrap()
    }

    #[test]
    fn potential_examples() {
        let g = geom();
        assert_eq!(w_potential(&g, 1, 0.0).unwrap(), 0.0);
        let g4 = LayerGeometry::new(1.0, 1.0, 1e-4).unwrap();
        let w = w_potential(&g4, 1, g4.l).unwrap();
        assert!((w / 1e-2 - 1.0).abs() < 0.01);
        let h = 1e-4;
        let fd = (w_potential(&g, 1, 1.0 + h).unwrap() - w_potential(&g, 1, 1.0 - h).unwrap()) / (2.0 * h);
        assert!((fd + force(&g, 1, 1.0).unwrap()).abs() < 1e-7);
        assert_eq!(force(&g, 1, 0.0).unwrap(), -0.01);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(LayerGeometry::new(1.0, 1.0, 0.0).is_err());
        assert!(LayerGeometry::new(0.1, 1.0, 0.04).is_err());
        assert!(w_potential(&geom(), 3, 0.0).is_err());
        assert!(w_potential(&geom(), 1, -0.1).is_err());
    }

    #[test]
    fn zeta_examples() {
        let g = geom();
        assert_eq!(zeta(&g, 0.0, [-0.7, 1.0, 2.0]).unwrap(), 0.7);
        assert_eq!(zeta(&g, 0.0, [0.0, 1.0, 2.0]).unwrap(), 0.0);
        assert!(zeta(&g, 5.0, [0.3, 1.0, 2.0]).unwrap() <= (0.09f64 + 5.0).sqrt());
    }

    #[test]
    fn transport_identity_and_roundtrip() {
        let g = geom();
        let v = [-0.4, 0.8, -0.3];
        assert_eq!(transport_state(&g, 2.0, v, 2.0).unwrap(), [0.4, 0.8, -0.3]);
        let w = transport_state(&g, 2.0, v, 6.0).unwrap();
        let n0: f64 = v.iter().map(|x| x * x).sum();
        let n1: f64 = w.iter().map(|x| x * x).sum();
        assert!((n0 - n1).abs() < 1e-12);
        let back = transport_state(&g, 6.0, w, 2.0).unwrap();
        for k in 0..3 {
            assert!((back[k].abs() - v[k].abs()).abs() < 1e-12);
        }
        assert!((zeta(&g, 6.0, w).unwrap() - zeta(&g, 2.0, v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn turning_points() {
        let g = geom();
        assert_eq!(turning_point(&g, 1.0, [-1.0, 0.0, 0.0]).unwrap(), None);
        let v = [-1e-4, 1.0, 0.5];
        let tp = turning_point(&g, 1.0, v).unwrap().unwrap();
        assert!(tp > 1.0 && tp < 1.1);
        assert!(radicand_at(&g, 1.0, v, tp).unwrap().abs() < 1e-10);
    }

    #[test]
    fn damping_examples() {
        let g = geom();
        let p = CollisionParams::default();
        assert_eq!(damping_integral(&g, 2.0, 2.0, [1.0, 0.5, 0.0], &p).unwrap(), 0.0);
        let h = damping_integral(&g, 3.0, 1.0, [1.0, 0.0, 0.0], &p).unwrap();
        assert!((h - 2.0 * nu_grid([1.0, 0.0, 0.0], 1.0)).abs() < 1e-12);
    }

    #[test]
    fn straight_trace_without_tangential_velocity() {
        let g = geom();
        let st = CharState::new(&g, 1.0, [0.5, 0.0, 0.0]).unwrap();
        let p = trace_characteristic(&g, st, 0.01, 100).unwrap();
        let last = p.points.last().unwrap();
        assert!((last.state.eta - 1.5).abs() < 1e-12);
        assert_eq!(last.state.v, [0.5, 0.0, 0.0]);
    }
}
