//! The macroscopic β system: an ODE for `β_j = ⟨v_η² e_j, q⟩`, `j = 0, 2, 3, 4`.
//!
//! Testing the Milne equation against `v_η e_j` and integrating the
//! geometric terms by parts gives
//!
//! `dβ/dη = (G₁B⁽¹⁾ + G₂B⁽²⁾) A⁻¹ β + D + E − dF/dη`
//!
//! with `A_jk = ⟨v_η² e_j, e_k⟩`, `B⁽ⁱ⁾_jk = ⟨Y⁽ⁱ⁾_j, e_k⟩`,
//! `Y⁽¹⁾_j = ∂_{v_η}(v_η v_φ² e_j) − ∂_{v_φ}(v_η² v_φ e_j)` (and `φ → ψ` for
//! `Y⁽²⁾`), `D_j = Σ G_i ⟨Y⁽ⁱ⁾_j, w⟩`, `E_j = −⟨v_η e_j, L w⟩ + ⟨v_η e_j, S⟩`,
//! `F_j = ⟨v_η² e_j, w⟩`. Integrated from `θ = ⟨v_η² e_j, g⟩(0)` using only the
//! microscopic part `w` of a kinetic solution, it reproduces the kinetic
//! solver's null-space profile and serves as an independent macroscopic check.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use serde::Serialize;

use super::MilneSolution;
use crate::collision_core::params::sqrt_mu;
use crate::collision_core::{KernelOperator, NullBasis, VelocityGrid};
use crate::error::{Error, Result};
use crate::layer_geometry::force;

/// Indices of the null-space directions carried by the β system.
pub const BETA_INDICES: [usize; 4] = [0, 2, 3, 4];

/// Constant matrices of the β system on one velocity grid.
#[derive(Debug, Clone, Serialize)]
pub struct BetaSystem {
    /// `A_jk = ⟨v_η² e_j, e_k⟩`.
    pub a: [[f64; 4]; 4],
    /// `B⁽¹⁾_jk = ⟨Y⁽¹⁾_j, e_k⟩`.
    pub b1: [[f64; 4]; 4],
    /// `B⁽²⁾_jk = ⟨Y⁽²⁾_j, e_k⟩`.
    pub b2: [[f64; 4]; 4],
    /// Spectral condition number of `A`.
    pub cond_a: f64,
    #[serde(skip)]
    weights: Vec<f64>,
    #[serde(skip)]
    vel2: [Vec<f64>; 4],
    #[serde(skip)]
    vel1: [Vec<f64>; 4],
    #[serde(skip)]
    y1: [Vec<f64>; 4],
    #[serde(skip)]
    y2: [Vec<f64>; 4],
    #[serde(skip)]
    a_inv: Matrix4<f64>,
}

/// Polynomial part `p_j` of `e_j = μ^{1/2} p_j` and its gradient.
fn poly(j: usize, v: [f64; 3]) -> (f64, [f64; 3]) {
    let s6 = 6f64.sqrt();
    match j {
        0 => (1.0, [0.0; 3]),
        1 => (v[0], [1.0, 0.0, 0.0]),
        2 => (v[1], [0.0, 1.0, 0.0]),
        3 => (v[2], [0.0, 0.0, 1.0]),
        _ => ((v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 3.0) / s6, [2.0 * v[0] / s6, 2.0 * v[1] / s6, 2.0 * v[2] / s6]),
    }
}

/// `Y⁽ⁱ⁾_j(v)` in closed form; `t = 1` for φ, `t = 2` for ψ.
fn y_value(j: usize, t: usize, v: [f64; 3]) -> f64 {
    let (p, dp) = poly(j, v);
    let (ve, vt) = (v[0], v[t]);
    sqrt_mu(v) * ((vt * vt - ve * ve) * p + ve * vt * vt * dp[0] - ve * ve * vt * dp[t])
}

fn mat4(m: Matrix4<f64>) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

impl BetaSystem {
    /// `⟨v_η² e_j, f⟩` for `j = 0, 2, 3, 4`.
    pub fn moments(&self, f: &[f64]) -> [f64; 4] {
        std::array::from_fn(|k| crate::linalg::dot_w(&self.weights, &self.vel2[k], f))
    }

    /// `⟨v_η e_j, f⟩` for `j = 0, 2, 3, 4`.
    pub fn flux_moments(&self, f: &[f64]) -> [f64; 4] {
        std::array::from_fn(|k| crate::linalg::dot_w(&self.weights, &self.vel1[k], f))
    }

    /// `(⟨Y⁽¹⁾_j, f⟩, ⟨Y⁽²⁾_j, f⟩)`.
    pub fn y_moments(&self, f: &[f64]) -> ([f64; 4], [f64; 4]) {
        (
            std::array::from_fn(|k| crate::linalg::dot_w(&self.weights, &self.y1[k], f)),
            std::array::from_fn(|k| crate::linalg::dot_w(&self.weights, &self.y2[k], f)),
        )
    }

    /// `A⁻¹ β`.
    pub fn solve_a(&self, beta: [f64; 4]) -> Result<[f64; 4]> {
        let x = self.a_inv * Vector4::from(beta);
        Ok([x[0], x[1], x[2], x[3]])
    }

    fn coupling(&self, g1: f64, g2: f64) -> Matrix4<f64> {
        let b1 = Matrix4::from_fn(|i, j| self.b1[i][j]);
        let b2 = Matrix4::from_fn(|i, j| self.b2[i][j]);
        (b1 * g1 + b2 * g2) * self.a_inv
    }
}

/// Assembles `A`, `B⁽¹⁾`, `B⁽²⁾` by velocity quadrature.
pub fn assemble_beta_system(grid: &VelocityGrid, basis: &NullBasis) -> Result<BetaSystem> {
    if basis.gram_defect() > 1e-6 {
        return Err(Error::Precondition(format!("null basis is not orthonormal (defect {:e})", basis.gram_defect())));
    }
    let nodes = &grid.nodes;
    let vel2: [Vec<f64>; 4] = std::array::from_fn(|k| basis.vectors[BETA_INDICES[k]].iter().zip(nodes).map(|(e, v)| v[0] * v[0] * e).collect());
    let vel1: [Vec<f64>; 4] = std::array::from_fn(|k| basis.vectors[BETA_INDICES[k]].iter().zip(nodes).map(|(e, v)| v[0] * e).collect());
    let y1: [Vec<f64>; 4] = std::array::from_fn(|k| nodes.iter().map(|&v| y_value(BETA_INDICES[k], 1, v)).collect());
    let y2: [Vec<f64>; 4] = std::array::from_fn(|k| nodes.iter().map(|&v| y_value(BETA_INDICES[k], 2, v)).collect());
    let w = &grid.weights;
    let a = Matrix4::from_fn(|j, k| crate::linalg::dot_w(w, &vel2[j], &basis.vectors[BETA_INDICES[k]]));
    let b1 = Matrix4::from_fn(|j, k| crate::linalg::dot_w(w, &y1[j], &basis.vectors[BETA_INDICES[k]]));
    let b2 = Matrix4::from_fn(|j, k| crate::linalg::dot_w(w, &y2[j], &basis.vectors[BETA_INDICES[k]]));
    let eig = SymmetricEigen::new(0.5 * (a + a.transpose())).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x.abs())));
    if !(lo > 1e-10 * hi) {
        return Err(Error::SingularMatrix(format!("moment matrix A has eigenvalue {lo:e}")));
    }
    let a_inv = a.try_inverse().ok_or_else(|| Error::SingularMatrix("moment matrix A".into()))?;
    Ok(BetaSystem {
        a: mat4(a),
        b1: mat4(b1),
        b2: mat4(b2),
        cond_a: hi / lo,
        weights: w.clone(),
        vel2,
        vel1,
        y1,
        y2,
        a_inv,
    })
}

/// Result of integrating the β system along a kinetic solution.
#[derive(Debug, Clone, Serialize)]
pub struct BetaProfile {
    /// η nodes.
    pub eta: Vec<f64>,
    /// `β(η)` at the nodes.
    pub beta: Vec<[f64; 4]>,
    /// `q = A⁻¹β` on `(e₀, e₂, e₃, e₄)`.
    pub q_ode: Vec<[f64; 4]>,
    /// The kinetic solver's coefficients on the same directions.
    pub q_solver: Vec<[f64; 4]>,
    /// `D` at the cell midpoints.
    pub d: Vec<[f64; 4]>,
    /// `E` at the cell midpoints.
    pub e: Vec<[f64; 4]>,
    /// `F` at the nodes.
    pub f: Vec<[f64; 4]>,
    /// `max |q_ode − q_solver| / max(1, max |q_solver|)`.
    pub max_relative_mismatch: f64,
}

/// Integrates the β system from `θ = ⟨v_η² e_j, g⟩(0)`.
///
/// The cell-centred Crank–Nicolson update is applied to `γ = β + F`, which
/// removes the `dF/dη` term:
/// `γ_{c+1} − γ_c = h [M_c(γ̄ − F̄) + D_c + E_c]` with `M = (G₁B⁽¹⁾ + G₂B⁽²⁾)A⁻¹`.
/// Only `w` and `S` from the kinetic solution enter; the null-space part is
/// reconstructed by the ODE.
pub fn solve_beta_ode(system: &BetaSystem, sol: &MilneSolution, op: &KernelOperator) -> Result<BetaProfile> {
    if op.len() != sol.grid().len() {
        return Err(Error::DimensionMismatch { expected: sol.grid().len(), found: op.len() });
    }
    let n = sol.eta.len();
    let geom = &sol.geom;
    let f: Vec<[f64; 4]> = sol.w_profile.iter().map(|w| system.moments(w)).collect();
    let mut gamma = vec![[0.0; 4]; n];
    gamma[0] = system.moments(&sol.g[0]);
    let mut d_out = Vec::with_capacity(n - 1);
    let mut e_out = Vec::with_capacity(n - 1);
    for c in 0..n - 1 {
        let h = sol.eta[c + 1] - sol.eta[c];
        let m = 0.5 * (sol.eta[c] + sol.eta[c + 1]);
        let (g1, g2) = (force(geom, 1, m)?, force(geom, 2, m)?);
        let wbar: Vec<f64> = sol.w_profile[c].iter().zip(&sol.w_profile[c + 1]).map(|(a, b)| 0.5 * (a + b)).collect();
        let (y1, y2) = system.y_moments(&wbar);
        let d: [f64; 4] = std::array::from_fn(|k| g1 * y1[k] + g2 * y2[k]);
        let lw = op.apply_conservative(&wbar)?;
        let lw_m = system.flux_moments(&lw);
        let s_m = system.flux_moments(&sol.source_midpoints()[c]);
        let e: [f64; 4] = std::array::from_fn(|k| -lw_m[k] + s_m[k]);
        let mc = system.coupling(g1, g2);
        let fbar = Vector4::from(f[c]) * 0.5 + Vector4::from(f[c + 1]) * 0.5;
        let lhs = Matrix4::identity() - mc * (0.5 * h);
        let rhs = (Matrix4::identity() + mc * (0.5 * h)) * Vector4::from(gamma[c]) + (Vector4::from(d) + Vector4::from(e) - mc * fbar) * h;
        let next = lhs.lu().solve(&rhs).ok_or_else(|| Error::SingularMatrix("Crank–Nicolson step of the beta system".into()))?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonConvergence { what: "beta ODE".into(), iterations: c, residual: f64::INFINITY });
        }
        gamma[c + 1] = [next[0], next[1], next[2], next[3]];
        d_out.push(d);
        e_out.push(e);
    }
    let mut beta = Vec::with_capacity(n);
    let mut q_ode = Vec::with_capacity(n);
    let mut q_solver = Vec::with_capacity(n);
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..n {
        let b: [f64; 4] = std::array::from_fn(|j| gamma[k][j] - f[k][j]);
        let q = system.solve_a(b)?;
        let qs = sol.q_profile[k].to_array();
        let qs4 = [qs[0], qs[2], qs[3], qs[4]];
        for j in 0..4 {
            diff = diff.max((q[j] - qs4[j]).abs());
            scale = scale.max(qs4[j].abs());
        }
        beta.push(b);
        q_ode.push(q);
        q_solver.push(qs4);
    }
    Ok(BetaProfile {
        eta: sol.eta.clone(),
        beta,
        q_ode,
        q_solver,
        d: d_out,
        e: e_out,
        f,
        max_relative_mismatch: diff / scale.max(1e-300),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn moment_matrix_is_symmetric_with_unit_mass_entry() {
        let grid = VelocityGrid::new(8, 6.0).unwrap();
        let basis = NullBasis::new(&grid);
        let s = assemble_beta_system(&grid, &basis).unwrap();
        assert!((s.a[0][0] - 1.0).abs() < 1e-12);
        for j in 0..4 {
            for k in 0..4 {
                assert!((s.a[j][k] - s.a[k][j]).abs() < 1e-12);
            }
        }
        assert!(s.cond_a.is_finite() && s.cond_a >= 1.0);
        // ⟨v_η² e₀, e₄⟩ = ∫ μ v_η² (|v|²−3)/√6 = 2/√6.
        assert!((s.a[0][3] - 2.0 / 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_equilibrium_gives_constant_profile() {
        let grid = Arc::new(VelocityGrid::new(8, 6.0).unwrap());
        let op = crate::collision_core::assemble_collision(grid.clone(), &Default::default()).unwrap();
        let geom = crate::layer_geometry::LayerGeometry::new(1.0, 1.5, 1e-6).unwrap();
        let eta: Vec<f64> = (0..=50).map(|k| k as f64 * geom.l / 50.0).collect();
        let e0 = op.basis.vectors[0].clone();
        let sol = MilneSolution::from_profiles(eta.clone(), vec![e0; eta.len()], geom, grid.clone()).unwrap();
        let system = assemble_beta_system(&grid, &op.basis).unwrap();
        let prof = solve_beta_ode(&system, &sol, &op).unwrap();
        for q in &prof.q_ode {
            assert!((q[0] - 1.0).abs() < 1e-10 && q[1].abs() < 1e-10 && q[2].abs() < 1e-10 && q[3].abs() < 1e-10);
        }
        assert!(prof.max_relative_mismatch < 1e-10);
    }
}
