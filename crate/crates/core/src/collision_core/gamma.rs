//! The nonlinear collision form `Γ[f, g] = μ^{-1/2} Q(μ^{1/2} f, μ^{1/2} g)`.
//!
//! `Q` is discretized in weak form: for each node `i` the test function is
//! the tensor Lagrange cardinal `ℓ_i`, so
//!
//! `W_i Q_i = Σ_{j,l,ω} W_j W_l w_ω B |ω·(v_l − v_j)| S_jl [ℓ_i(v_l*) − δ_il]`
//!
//! with `v* = v − ω((v − u)·ω)` and `S_jl = ½(F_j G_l + G_j F_l)`. Because the
//! collision invariants are polynomials of per-axis degree at most two, they
//! are reproduced exactly by the Lagrange cardinals; together with the
//! symmetrization of `S` this makes `⟨Γ[f,g], e_k⟩ = 0` hold to rounding.
//! The form is symmetrized because the plain `Q(F, G)` with `F ≠ G` exchanges
//! momentum and energy between its two arguments and therefore leaves `𝓝⊥`.
//!
//! The cost is `O(N² · |sphere| · n³)`, so `Γ` is meant for small grids.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rayon::prelude::*;

use super::grid::VelocityGrid;
use super::operator::KernelOperator;
use super::params::{sqrt_mu, CollisionParams};
use crate::error::Result;
use crate::quadrature::{Barycentric, SphereRule};

/// Precomputed data for repeated `Γ` evaluations on one grid.
#[derive(Debug, Clone)]
pub struct GammaOperator {
    grid: Arc<VelocityGrid>,
    sphere: SphereRule,
    bary: Barycentric,
    strength: f64,
    sqrt_mu: Vec<f64>,
}

impl GammaOperator {
    /// Prepares `Γ` on a full tensor grid.
    ///
    /// The cross-section constant `B = π^{3/2} q₀ / (2√2)` in the grid
    /// variable makes the linearization consistent with the operator of
    /// [`super::operator::assemble_collision`]: `L f = −2 Γ[e₀, f]` up to
    /// quadrature error.
    pub fn new(grid: Arc<VelocityGrid>, params: &CollisionParams, sphere: SphereRule) -> Result<Self> {
        params.validate()?;
        sphere.validate()?;
        grid.require_full_tensor("the bilinear collision form")?;
        let bary = Barycentric::new(grid.axis_nodes());
        let sqrt_mu = grid.nodes.iter().map(|&v| sqrt_mu(v)).collect();
        let strength = PI.powf(1.5) * params.q0 / (2.0 * SQRT_2);
        Ok(Self { grid, sphere, bary, strength, sqrt_mu })
    }

    /// The underlying grid.
    pub fn grid(&self) -> &Arc<VelocityGrid> {
        &self.grid
    }

    /// Evaluates `Γ[f, g]` on the grid.
    pub fn apply(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.grid.check(f)?;
        self.grid.check(g)?;
        let grid = &*self.grid;
        let n_axis = grid.per_axis_count;
        let n = grid.len();
        let big_f: Vec<f64> = f.iter().zip(&self.sqrt_mu).map(|(x, m)| x * m).collect();
        let big_g: Vec<f64> = g.iter().zip(&self.sqrt_mu).map(|(x, m)| x * m).collect();
        let acc = (0..n)
            .into_par_iter()
            .fold(
                || (vec![0.0; n], vec![0.0; 3 * n_axis]),
                |(mut acc, mut lag), j| {
                    let u = grid.nodes[j];
                    let wj = grid.weights[j];
                    for l in 0..n {
                        let s = 0.5 * (big_f[j] * big_g[l] + big_g[j] * big_f[l]);
                        if s == 0.0 {
                            continue;
                        }
                        let v = grid.nodes[l];
                        let rel = [v[0] - u[0], v[1] - u[1], v[2] - u[2]];
                        let base = self.strength * wj * grid.weights[l] * s;
                        let mut loss = 0.0;
                        for (om, wo) in self.sphere.dirs.iter().zip(&self.sphere.weights) {
                            let proj = rel[0] * om[0] + rel[1] * om[1] + rel[2] * om[2];
                            if proj == 0.0 {
                                continue;
                            }
                            let coef = base * wo * proj.abs();
                            loss += coef;
                            let vs = [v[0] - om[0] * proj, v[1] - om[1] * proj, v[2] - om[2] * proj];
                            let (lx, rest) = lag.split_at_mut(n_axis);
                            let (ly, lz) = rest.split_at_mut(n_axis);
                            self.bary.basis_into(vs[0], lx);
                            self.bary.basis_into(vs[1], ly);
                            self.bary.basis_into(vs[2], lz);
                            for (a, la) in lx.iter().enumerate() {
                                let ca = coef * la;
                                for (b, lb) in ly.iter().enumerate() {
                                    let cab = ca * lb;
                                    let off = (a * n_axis + b) * n_axis;
                                    for (c, lc) in lz.iter().enumerate() {
                                        acc[off + c] += cab * lc;
                                    }
                                }
                            }
                        }
                        acc[l] -= loss;
                    }
                    (acc, lag)
                },
            )
            .map(|(acc, _)| acc)
            .reduce(|| vec![0.0; n], |mut x, y| {
                crate::linalg::axpy(1.0, &y, &mut x);
                x
            });
        // A full tensor grid stores node (a,b,c) at flat index (a n + b) n + c.
        Ok(acc.iter().enumerate().map(|(i, q)| q / (grid.weights[i] * self.sqrt_mu[i])).collect())
    }
}

/// One-shot `Γ[f, g]` on the operator's grid.
pub fn gamma(f: &[f64], g: &[f64], op: &KernelOperator, sphere_rule: &SphereRule) -> Result<Vec<f64>> {
    GammaOperator::new(op.grid.clone(), &op.params, sphere_rule.clone())?.apply(f, g)
}

/// Empirical constant `‖Γ[f,g]‖ / (sup|ν g| · ‖ν f‖)`.
pub fn gamma_bound_ratio(gamma_fg: &[f64], f: &[f64], g: &[f64], op: &KernelOperator) -> f64 {
    let nu_f: Vec<f64> = f.iter().zip(&op.nu_diag).map(|(x, nu)| x * nu).collect();
    let sup_nu_g = g.iter().zip(&op.nu_diag).fold(0.0f64, |m, (x, nu)| m.max((x * nu).abs()));
    op.grid.norm(gamma_fg) / (sup_nu_g * op.grid.norm(&nu_f))
}
