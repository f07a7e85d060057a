//! Null space of `L`, macroscopic states, and the micro–macro projection.
//!
//! The basis is `e₀ = μ^{1/2}`, `e_{1..3} = v_i μ^{1/2}`,
//! `e₄ = (|v|² − 3)/√6 · μ^{1/2}` with the unit-mass Maxwellian, which is
//! orthonormal in `L²(dv)`. The temperature direction is normalized by `√6`
//! rather than `2`; a paper-scale temperature coefficient `θ` therefore
//! appears as `√(3/2)·θ` on `e₄` (see [`MacroState::from_paper_scale`]).

use serde::{Deserialize, Serialize};

use super::grid::VelocityGrid;
use super::params::{norm2, sqrt_mu};
use crate::error::Result;

/// Conversion factor from a paper-scale temperature coefficient to `e₄`.
pub fn temperature_scale() -> f64 {
    1.5f64.sqrt()
}

/// Coefficients `(a, b, c)` of a null-space element `a e₀ + b·(e₁,e₂,e₃) + c e₄`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroState {
    /// Density coefficient.
    pub a: f64,
    /// Momentum coefficients.
    pub b: [f64; 3],
    /// Temperature coefficient on the normalized `e₄`.
    pub c: f64,
}

impl MacroState {
    /// The zero state.
    pub const ZERO: MacroState = MacroState { a: 0.0, b: [0.0; 3], c: 0.0 };

    /// Builds from the coefficient array `[a, b₁, b₂, b₃, c]`.
    pub fn from_array(x: [f64; 5]) -> Self {
        Self { a: x[0], b: [x[1], x[2], x[3]], c: x[4] }
    }

    /// Coefficient array `[a, b₁, b₂, b₃, c]`.
    pub fn to_array(&self) -> [f64; 5] {
        [self.a, self.b[0], self.b[1], self.b[2], self.c]
    }

    /// The `k`-th basis direction.
    pub fn unit(k: usize) -> Self {
        let mut x = [0.0; 5];
        x[k] = 1.0;
        Self::from_array(x)
    }

    /// Converts paper-scale fluid coefficients `μ^{1/2}(ρ + u·v + θ(|v|²−3)/2)`.
    pub fn from_paper_scale(rho: f64, u: [f64; 3], theta: f64) -> Self {
        Self { a: rho, b: u, c: temperature_scale() * theta }
    }

    /// Maximum absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Euclidean norm of the coefficients (equals the `L²` norm of the reconstruction).
    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Componentwise difference.
    pub fn sub(&self, other: &MacroState) -> MacroState {
        let (p, q) = (self.to_array(), other.to_array());
        let mut r = [0.0; 5];
        for k in 0..5 {
            r[k] = p[k] - q[k];
        }
        MacroState::from_array(r)
    }

    /// Grid function `a e₀ + b·(e₁,e₂,e₃) + c e₄`.
    pub fn reconstruct(&self, basis: &NullBasis) -> Vec<f64> {
        let x = self.to_array();
        let n = basis.vectors[0].len();
        let mut out = vec![0.0; n];
        for (k, coef) in x.iter().enumerate() {
            if *coef != 0.0 {
                crate::linalg::axpy(*coef, &basis.vectors[k], &mut out);
            }
        }
        out
    }
}

/// Values of the five basis functions at a single velocity.
pub fn basis_values(v: [f64; 3]) -> [f64; 5] {
    let m = sqrt_mu(v);
    [m, v[0] * m, v[1] * m, v[2] * m, (norm2(v) - 3.0) / 6f64.sqrt() * m]
}

/// The five null-space grid functions with their Gram matrix.
#[derive(Debug, Clone)]
pub struct NullBasis {
    /// `e₀ … e₄` sampled on the grid.
    pub vectors: [Vec<f64>; 5],
    /// Gram matrix `⟨e_j, e_k⟩` under the grid quadrature.
    pub gram: [[f64; 5]; 5],
    weights: Vec<f64>,
}

impl NullBasis {
    /// Samples the basis on `grid` and records its Gram matrix.
    pub fn new(grid: &VelocityGrid) -> Self {
        let vals: Vec<[f64; 5]> = grid.nodes.iter().map(|&v| basis_values(v)).collect();
        let vectors: [Vec<f64>; 5] = std::array::from_fn(|k| vals.iter().map(|x| x[k]).collect());
        let mut gram = [[0.0; 5]; 5];
        for j in 0..5 {
            for k in 0..5 {
                gram[j][k] = grid.inner(&vectors[j], &vectors[k]);
            }
        }
        Self { vectors, gram, weights: grid.weights.clone() }
    }

    /// Quadrature weights the basis was built with.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `max |gram − I|`.
    pub fn gram_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for j in 0..5 {
            for k in 0..5 {
                let id = if j == k { 1.0 } else { 0.0 };
                d = d.max((self.gram[j][k] - id).abs());
            }
        }
        d
    }

    /// Inner products `⟨f, e_k⟩`.
    pub fn coefficients(&self, f: &[f64]) -> [f64; 5] {
        std::array::from_fn(|k| crate::linalg::dot_w(&self.weights, f, &self.vectors[k]))
    }

    /// Replaces `f` by `(I − P) f` in place.
    pub fn remove_null(&self, f: &mut [f64]) {
        let c = self.coefficients(f);
        for (k, ck) in c.iter().enumerate() {
            crate::linalg::axpy(-ck, &self.vectors[k], f);
        }
    }
}

/// Orthogonal projection onto the null space: returns the coefficients and `P[f]`.
pub fn project_null(f: &[f64], basis: &NullBasis) -> Result<(MacroState, Vec<f64>)> {
    crate::error::check_len(basis.vectors[0].len(), f.len())?;
    let state = MacroState::from_array(basis.coefficients(f));
    let pf = state.reconstruct(basis);
    Ok((state, pf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (VelocityGrid, NullBasis) {
        let g = VelocityGrid::new(12, 6.0).unwrap();
        let b = NullBasis::new(&g);
        (g, b)
    }

    #[test]
    fn gram_is_identity() {
        let (_, b) = setup();
        assert!(b.gram_defect() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let (g, b) = setup();
        let (s, _) = project_null(&b.vectors[0], &b).unwrap();
        assert!((s.a - 1.0).abs() < 1e-12 && s.b.iter().all(|x| x.abs() < 1e-12) && s.c.abs() < 1e-12);
        let f = g.sample(|v| sqrt_mu(v) * v[2] * v[1]);
        let (s, _) = project_null(&f, &b).unwrap();
        assert!(s.max_abs() < 1e-8);
        let f = g.sample(|v| sqrt_mu(v) * norm2(v));
        let (s, _) = project_null(&f, &b).unwrap();
        assert!((s.a - 3.0).abs() < 1e-10);
        assert!((s.c - 6f64.sqrt()).abs() < 1e-10);
        assert!(s.b.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn remainder_is_orthogonal() {
        let (g, b) = setup();
        let f = g.sample(|v| (v[0] + 0.3 * v[1] * v[1]).sin() * sqrt_mu(v));
        let (_, pf) = project_null(&f, &b).unwrap();
        let r: Vec<f64> = f.iter().zip(&pf).map(|(x, y)| x - y).collect();
        for k in 0..5 {
            assert!(g.inner(&r, &b.vectors[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn paper_scale_temperature_conversion() {
        let s = MacroState::from_paper_scale(-1.0, [0.0; 3], 1.0);
        assert!((s.c - 1.5f64.sqrt()).abs() < 1e-15);
    }
}
