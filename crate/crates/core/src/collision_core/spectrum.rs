//! Spectral diagnostics of `L` on the orthogonal complement of its null space.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::operator::KernelOperator;
use super::params::sqrt_mu;
use crate::error::Result;
use crate::linalg::lanczos_ritz;

/// Result of the Lanczos coercivity estimate.
#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    /// Smallest Ritz value of `L` restricted to `𝓝⊥` (converges from above).
    pub lambda_min: f64,
    /// Largest Ritz value.
    pub lambda_max: f64,
    /// Lanczos steps performed.
    pub steps: usize,
}

/// Estimates the spectral gap of `L` on `𝓝⊥` with a weighted Lanczos iteration.
///
/// The start vector is a fixed smooth function, so the result is deterministic.
pub fn coercivity_lanczos(op: &KernelOperator, steps: usize) -> Result<CoercivityReport> {
    let start = op.grid.sample(|v| sqrt_mu(v) * (1.0 + 0.3 * v[0] + 0.2 * v[1] * v[2] + 0.1 * v[2] * v[2] * v[0] + (0.7 * v[1]).sin()));
    let w = op.grid.weights.clone();
    let ritz = lanczos_ritz(
        |x, y| {
            let r = op.apply_conservative(x).expect("grid function on operator grid");
            y.copy_from_slice(&r);
        },
        |x| op.basis.remove_null(x),
        &w,
        &start,
        steps,
    )?;
    Ok(CoercivityReport { lambda_min: ritz[0], lambda_max: *ritz.last().unwrap(), steps: ritz.len() })
}

/// Dense `W^{1/2} L_c W^{-1/2}`, symmetrized; intended for small grids only.
pub fn symmetric_conservative_matrix(op: &KernelOperator) -> DMatrix<f64> {
    let n = op.len();
    let sw: Vec<f64> = op.grid.weights.iter().map(|w| w.sqrt()).collect();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0 / sw[j];
        let col = op.apply_conservative(&e).expect("unit vector on operator grid");
        for i in 0..n {
            m[(i, j)] = sw[i] * col[i];
        }
    }
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Eigenvalues of `L_c` sorted ascending; the first five belong to the null space.
pub fn conservative_eigenvalues(op: &KernelOperator) -> Vec<f64> {
    let eig = SymmetricEigen::new(symmetric_conservative_matrix(op));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::collision_core::{assemble_collision, CollisionParams, VelocityGrid};

    #[test]
    fn lanczos_agrees_with_dense_eigensolve() {
        let g = Arc::new(VelocityGrid::new(6, 6.0).unwrap());
        let op = assemble_collision(g, &CollisionParams::default()).unwrap();
        let ev = conservative_eigenvalues(&op);
        assert!(ev[..5].iter().all(|x| x.abs() < 1e-10), "{:?}", &ev[..6]);
        let gap = ev[5];
        assert!(gap > 0.0);
        let rep = coercivity_lanczos(&op, 120).unwrap();
        assert!((rep.lambda_min - gap).abs() < 1e-6 * gap, "{} vs {gap}", rep.lambda_min);
    }
}
