//! Truncated tensor-product Gauss–Hermite velocity grid.
//!
//! Each axis carries the probabilists' Gauss–Hermite nodes with Lebesgue
//! weights (see [`crate::quadrature::hermite_rule`]); the 3D rule is the
//! tensor product, truncated to the cube-diagonal ball `|v| ≤ v_max·√3`.
//! Grid functions are plain `Vec<f64>` indexed like [`VelocityGrid::nodes`];
//! all inner products are `⟨f, g⟩ = Σ W_i f_i g_i`.

use serde::Serialize;

use super::params::{norm2, Normalization};
use crate::error::{check_len, Error, Result};
use crate::quadrature::hermite_rule;

/// Default points per axis.
pub const DEFAULT_PER_AXIS: usize = 24;
/// Default truncation parameter.
pub const DEFAULT_V_MAX: f64 = 6.0;

/// A three-dimensional velocity quadrature.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    /// Velocity nodes.
    pub nodes: Vec<[f64; 3]>,
    /// Positive Lebesgue quadrature weights.
    pub weights: Vec<f64>,
    /// Truncation parameter: nodes satisfy `|v| ≤ v_max·√3`.
    pub v_max: f64,
    /// Gauss–Hermite points per axis before truncation.
    pub per_axis_count: usize,
    axis_nodes: Vec<f64>,
    axis_weights: Vec<f64>,
    tensor_index: Vec<[usize; 3]>,
    flat_of_tensor: Vec<Option<usize>>,
}

/// Relative errors of the four Gaussian moments `1, 3, 15, 105`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentReport {
    /// Computed moments `∫ μ |v|^{2k} dv`, `k = 0..3`.
    pub moments: [f64; 4],
    /// `|computed − exact|` for each moment.
    pub errors: [f64; 4],
}

impl MomentReport {
    /// Largest absolute error.
    pub fn max_error(&self) -> f64 {
        self.errors.iter().fold(0.0f64, |m, e| m.max(*e))
    }
}

impl VelocityGrid {
    /// Builds the truncated tensor grid with `n` points per axis.
    pub fn new(per_axis_count: usize, v_max: f64) -> Result<Self> {
        if per_axis_count < 2 {
            return Err(Error::InvalidParameter("per_axis_count must be at least 2".into()));
        }
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(Error::InvalidParameter(format!("v_max must be positive, got {v_max}")));
        }
        let (x, w) = hermite_rule(per_axis_count)?;
        let n = per_axis_count;
        let radius2 = 3.0 * v_max * v_max;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut tensor_index = Vec::new();
        let mut flat_of_tensor = vec![None; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let v = [x[a], x[b], x[c]];
                    if norm2(v) <= radius2 {
                        flat_of_tensor[(a * n + b) * n + c] = Some(nodes.len());
                        nodes.push(v);
                        weights.push(w[a] * w[b] * w[c]);
                        tensor_index.push([a, b, c]);
                    }
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("truncation removed every node".into()));
        }
        Ok(Self { nodes, weights, v_max, per_axis_count, axis_nodes: x, axis_weights: w, tensor_index, flat_of_tensor })
    }

    /// Number of retained nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// `true` when no node is retained.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `true` when truncation removed nothing.
    pub fn is_full_tensor(&self) -> bool {
        self.nodes.len() == self.per_axis_count.pow(3)
    }

    /// Errors unless the grid is a full tensor product.
    pub fn require_full_tensor(&self, what: &str) -> Result<()> {
        if self.is_full_tensor() {
            Ok(())
        } else {
            Err(Error::Precondition(format!("{what} requires an untruncated tensor grid (increase v_max)")))
        }
    }

    /// Per-axis nodes (ascending).
    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    /// Per-axis Lebesgue weights.
    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    /// Tensor multi-index of a retained node.
    pub fn tensor_index(&self, i: usize) -> [usize; 3] {
        self.tensor_index[i]
    }

    /// Flat index of a tensor multi-index, if retained.
    pub fn flat_index(&self, idx: [usize; 3]) -> Option<usize> {
        let n = self.per_axis_count;
        self.flat_of_tensor[(idx[0] * n + idx[1]) * n + idx[2]]
    }

    /// Evaluates `f` at every node.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&v| f(v)).collect()
    }

    /// Weighted inner product `Σ W_i f_i g_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        crate::linalg::dot_w(&self.weights, f, g)
    }

    /// Weighted norm.
    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Checks that a grid function has the right length.
    pub fn check(&self, f: &[f64]) -> Result<()> {
        check_len(self.len(), f.len())
    }

    /// Quadrature `∫ μ |v|^{2k} dv` for `k = 0..3` under the given normalization.
    pub fn gaussian_moments(&self, norm: Normalization) -> [f64; 4] {
        let c = norm.prefactor();
        let mut m = [0.0; 4];
        for (v, w) in self.nodes.iter().zip(&self.weights) {
            let r2 = norm2(*v);
            let base = w * c * (-0.5 * r2).exp();
            m[0] += base;
            m[1] += base * r2;
            m[2] += base * r2 * r2;
            m[3] += base * r2 * r2 * r2;
        }
        m
    }

    /// Compares unit-mass moments against `1, 3, 15, 105`.
    pub fn moment_report(&self) -> MomentReport {
        let moments = self.gaussian_moments(Normalization::UnitMass);
        let exact = [1.0, 3.0, 15.0, 105.0];
        let mut errors = [0.0; 4];
        for k in 0..4 {
            errors[k] = (moments[k] - exact[k]).abs();
        }
        MomentReport { moments, errors }
    }

    /// Fails if any moment error exceeds `tol`.
    pub fn validate_moments(&self, tol: f64) -> Result<MomentReport> {
        let rep = self.moment_report();
        if rep.max_error() > tol {
            return Err(Error::Precondition(format!(
                "Gaussian moments not reproduced: errors {:?} exceed {tol:e} (v_max = {}, n = {})",
                rep.errors, self.v_max, self.per_axis_count
            )));
        }
        Ok(rep)
    }

    /// Half-space flux `∫_{v_z>0} μ v_z dv` under the given normalization.
    ///
    /// The Gauss–Hermite rule resolves the kink of `|v_z|` only at first
    /// order, so the normal direction uses a Gauss–Legendre rule on
    /// `[0, v_max√3]` while the tangential directions reuse the per-axis rule.
    pub fn half_space_flux(&self, norm: Normalization) -> Result<f64> {
        let c = norm.prefactor();
        let tangential: f64 = self.axis_nodes.iter().zip(&self.axis_weights).map(|(x, w)| w * (-0.5 * x * x).exp()).sum();
        let (s, ws) = crate::quadrature::gauss_legendre(48, 0.0, self.v_max * 3f64.sqrt())?;
        let normal: f64 = s.iter().zip(&ws).map(|(x, w)| w * x * (-0.5 * x * x).exp()).sum();
        Ok(c * tangential * tangential * normal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_grid_reproduces_moments() {
        let g = VelocityGrid::new(24, 6.0).unwrap();
        let rep = g.validate_moments(1e-10).unwrap();
        assert!(rep.max_error() < 1e-10, "{rep:?}");
        assert!(g.weights.iter().all(|&w| w > 0.0));
        let r = 6.0 * 3f64.sqrt();
        assert!(g.nodes.iter().all(|v| norm2(*v).sqrt() <= r));
        assert!(!g.is_full_tensor());
    }

    #[test]
    fn under_resolved_grid_fails_moments() {
        let g = VelocityGrid::new(24, 1.0).unwrap();
        assert!(g.validate_moments(1e-6).is_err());
    }

    #[test]
    fn normalizations() {
        let g = VelocityGrid::new(16, 6.0).unwrap();
        assert!((g.half_space_flux(Normalization::BoundaryMeasure).unwrap() - 1.0).abs() < 1e-10);
        assert!((g.gaussian_moments(Normalization::UnitMass)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_grid_is_full_tensor_with_index_roundtrip() {
        let g = VelocityGrid::new(6, 6.0).unwrap();
        assert!(g.is_full_tensor());
        for i in 0..g.len() {
            assert_eq!(g.flat_index(g.tensor_index(i)), Some(i));
        }
    }
}
