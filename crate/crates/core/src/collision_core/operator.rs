//! Discrete linearized collision operator `L = νI − K`.
//!
//! The kernel matrix is `K_ij = W_j k(v_j, v_i)` for `i ≠ j`, so `W K` is
//! symmetric and `L` is self-adjoint in `⟨·,·⟩_W`. The diagonal entry of `K`
//! replaces the integrable `1/|u − v|` singularity at the self-node: it is
//! calibrated row by row from the exact identity `K[μ^{1/2}] = ν μ^{1/2}`,
//! which makes `L e₀ = 0` hold to rounding on every grid.
//!
//! The remaining null directions are annihilated only up to quadrature
//! error. Solvers that need exact conservation use the conservative form
//! `L_c = (I − P) L (I − P)` ([`KernelOperator::apply_conservative`]), which
//! is self-adjoint, vanishes identically on the null space, and agrees with
//! `L` on `𝓝⊥` up to that same quadrature error.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::basis::{basis_values, NullBasis};
use super::grid::VelocityGrid;
use super::kernel::{kernel_grid, nu_grid};
use super::params::{bracket, CollisionParams};
use crate::error::{Error, Result};

/// Moment tolerance required of a grid before assembly.
pub const ASSEMBLY_MOMENT_TOL: f64 = 1e-6;

/// The assembled operator.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    /// Collision frequency at each node.
    pub nu_diag: Vec<f64>,
    /// `K_ij = W_j k(v_j, v_i)`; the diagonal holds the calibrated self-node weight.
    pub k_matrix: DMatrix<f64>,
    /// The grid the operator lives on.
    pub grid: Arc<VelocityGrid>,
    /// Collision parameters used for assembly.
    pub params: CollisionParams,
    /// Null-space basis on the same grid.
    pub basis: NullBasis,
}

/// Summary diagnostics of an assembled operator.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorDiagnostics {
    /// `‖L e_k‖/‖e_k‖` for `k = 0..4`.
    pub null_residuals: [f64; 5],
    /// `max |gram − I|`.
    pub gram_defect: f64,
    /// `max |k(v_j,v_i) − k(v_i,v_j)|` before weighting.
    pub kernel_symmetry_defect: f64,
    /// `(min, max)` of `ν(v)/⟨v⟩` over the grid.
    pub nu_bracket_bounds: (f64, f64),
}

/// Assembles `L` on `grid`.
pub fn assemble_collision(grid: Arc<VelocityGrid>, params: &CollisionParams) -> Result<KernelOperator> {
    params.validate()?;
    grid.validate_moments(ASSEMBLY_MOMENT_TOL)?;
    let n = grid.len();
    let q0 = params.q0;
    let nu_diag: Vec<f64> = grid.nodes.iter().map(|&v| nu_grid(v, q0)).collect();
    let mut k = DMatrix::<f64>::zeros(n, n);
    // Column j holds W_j k(v_j, v_i) for every row i.
    k.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let vj = grid.nodes[j];
        let wj = grid.weights[j];
        for (i, kij) in col.iter_mut().enumerate() {
            if i != j {
                *kij = wj * kernel_grid(vj, grid.nodes[i], q0);
            }
        }
    });
    let basis = NullBasis::new(&grid);
    let e0 = DVector::from_column_slice(&basis.vectors[0]);
    let ke0 = &k * &e0;
    for i in 0..n {
        let m = basis.vectors[0][i];
        k[(i, i)] = (nu_diag[i] * m - ke0[i]) / m;
    }
    Ok(KernelOperator { nu_diag, k_matrix: k, grid, params: *params, basis })
}

impl KernelOperator {
    /// Number of velocity nodes.
    pub fn len(&self) -> usize {
        self.nu_diag.len()
    }

    /// `true` for an empty grid.
    pub fn is_empty(&self) -> bool {
        self.nu_diag.is_empty()
    }

    /// `K f`.
    pub fn apply_k(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.grid.check(f)?;
        let x = DVector::from_column_slice(f);
        Ok((&self.k_matrix * x).as_slice().to_vec())
    }

    /// `L f = ν f − K f`.
    pub fn apply_l(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply_k(f)?;
        for ((o, nu), fi) in out.iter_mut().zip(&self.nu_diag).zip(f) {
            *o = nu * fi - *o;
        }
        Ok(out)
    }

    /// `L_c f = (I − P) L (I − P) f`.
    pub fn apply_conservative(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.grid.check(f)?;
        let mut g = f.to_vec();
        self.basis.remove_null(&mut g);
        let mut out = self.apply_l(&g)?;
        self.basis.remove_null(&mut out);
        Ok(out)
    }

    /// `ν f − L_c f`: the gain operator consistent with the conservative form.
    pub fn apply_k_conservative(&self, f: &[f64]) -> Result<Vec<f64>> {
        let lc = self.apply_conservative(f)?;
        Ok(lc.iter().zip(&self.nu_diag).zip(f).map(|((l, nu), fi)| nu * fi - l).collect())
    }

    /// Relative null residuals `‖L e_k‖/‖e_k‖`.
    pub fn null_residuals(&self) -> [f64; 5] {
        std::array::from_fn(|k| {
            let e = &self.basis.vectors[k];
            let le = self.apply_l(e).expect("basis lives on the operator grid");
            self.grid.norm(&le) / self.grid.norm(e)
        })
    }

    /// `|⟨Lf, g⟩ − ⟨f, Lg⟩| / (‖f‖‖g‖)`.
    pub fn adjointness_defect(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        let lf = self.apply_l(f)?;
        let lg = self.apply_l(g)?;
        let d = (self.grid.inner(&lf, g) - self.grid.inner(f, &lg)).abs();
        Ok(d / (self.grid.norm(f) * self.grid.norm(g)))
    }

    /// `max |k(v_j, v_i) − k(v_i, v_j)|` over all off-diagonal pairs, from the stored matrix.
    pub fn kernel_symmetry_defect(&self) -> f64 {
        let n = self.len();
        let w = &self.grid.weights;
        (0..n)
            .into_par_iter()
            .map(|j| {
                let mut d = 0.0f64;
                for i in 0..j {
                    let kij = self.k_matrix[(i, j)] / w[j];
                    let kji = self.k_matrix[(j, i)] / w[i];
                    d = d.max((kij - kji).abs());
                }
                d
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `(min, max)` of `ν(v)/⟨v⟩` over the grid nodes.
    pub fn nu_bracket_bounds(&self) -> (f64, f64) {
        self.grid.nodes.iter().zip(&self.nu_diag).fold((f64::INFINITY, 0.0f64), |(lo, hi), (v, nu)| {
            let r = nu / bracket(*v);
            (lo.min(r), hi.max(r))
        })
    }

    /// Smallest collision frequency on the grid (an empirical `ν₀`).
    pub fn nu_min(&self) -> f64 {
        self.nu_diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// All cheap diagnostics at once.
    pub fn diagnostics(&self) -> OperatorDiagnostics {
        OperatorDiagnostics {
            null_residuals: self.null_residuals(),
            gram_defect: self.basis.gram_defect(),
            kernel_symmetry_defect: self.kernel_symmetry_defect(),
            nu_bracket_bounds: self.nu_bracket_bounds(),
        }
    }
}

/// Null residuals `‖L e_k‖/‖e_k‖` on a fine grid without storing `K`.
///
/// Uses the octahedral symmetry of the tensor grid: only rows with
/// `0 < v₁ ≤ v₂ ≤ v₃` are evaluated, and each contributes with the size of
/// its orbit. Scalar residuals (`e₀`, `e₄`) are orbit-invariant; the vector
/// residual of `(e₁, e₂, e₃)` is equidistributed among the three components
/// after summing over an orbit. Requires an even per-axis count.
pub fn null_residuals_matrix_free(per_axis_count: usize, v_max: f64, params: &CollisionParams) -> Result<[f64; 5]> {
    if per_axis_count % 2 != 0 {
        return Err(Error::InvalidParameter("matrix-free residuals need an even per-axis count".into()));
    }
    let grid = VelocityGrid::new(per_axis_count, v_max)?;
    grid.validate_moments(ASSEMBLY_MOMENT_TOL)?;
    let n = per_axis_count;
    let q0 = params.q0;
    let vals: Vec<[f64; 5]> = grid.nodes.iter().map(|&v| basis_values(v)).collect();
    let mut rows = Vec::new();
    for a in n / 2..n {
        for b in a..n {
            for c in b..n {
                if let Some(i) = grid.flat_index([a, b, c]) {
                    let perms = if a == b && b == c {
                        1.0
                    } else if a == b || b == c {
                        3.0
                    } else {
                        6.0
                    };
                    rows.push((i, 8.0 * perms));
                }
            }
        }
    }
    let sums = rows
        .par_iter()
        .map(|&(i, orbit)| {
            let vi = grid.nodes[i];
            let mut acc = [0.0; 5];
            for (j, vj) in grid.nodes.iter().enumerate() {
                if j == i {
                    continue;
                }
                let kij = grid.weights[j] * kernel_grid(*vj, vi, q0);
                for k in 0..5 {
                    acc[k] += kij * vals[j][k];
                }
            }
            let nu = nu_grid(vi, q0);
            let e = vals[i];
            let d = (nu * e[0] - acc[0]) / e[0];
            let r: [f64; 5] = std::array::from_fn(|k| nu * e[k] - acc[k] - d * e[k]);
            let w = grid.weights[i] * orbit;
            [w * r[0] * r[0], w * (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]) / 3.0, w * r[4] * r[4]]
        })
        .reduce(|| [0.0; 3], |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2]]);
    let basis = NullBasis::new(&grid);
    let norm = |k: usize| grid.norm(&basis.vectors[k]);
    Ok([sums[0].sqrt() / norm(0), sums[1].sqrt() / norm(1), sums[1].sqrt() / norm(2), sums[1].sqrt() / norm(3), sums[2].sqrt() / norm(4)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision_core::params::sqrt_mu;

    fn op(n: usize) -> KernelOperator {
        let g = Arc::new(VelocityGrid::new(n, 6.0).unwrap());
        assemble_collision(g, &CollisionParams::default()).unwrap()
    }

    #[test]
    fn zero_maps_to_zero_and_e0_is_annihilated() {
        let o = op(8);
        let z = vec![0.0; o.len()];
        assert!(o.apply_l(&z).unwrap().iter().all(|&x| x == 0.0));
        let r = o.null_residuals();
        assert!(r[0] < 1e-12, "{r:?}");
    }

    #[test]
    fn null_residuals_decrease_under_refinement() {
        let r8 = op(8).null_residuals();
        let r12 = op(12).null_residuals();
        for k in 1..5 {
            assert!(r12[k] < r8[k], "{k}: {r8:?} {r12:?}");
        }
    }

    #[test]
    fn matrix_free_matches_dense() {
        let o = op(8);
        let dense = o.null_residuals();
        let mf = null_residuals_matrix_free(8, 6.0, &CollisionParams::default()).unwrap();
        for k in 0..5 {
            assert!((dense[k] - mf[k]).abs() < 1e-10 * (1.0 + dense[k]), "{k}: {dense:?} {mf:?}");
        }
    }

    #[test]
    fn operator_is_self_adjoint_and_symmetric() {
        let o = op(8);
        let f = o.grid.sample(|v| sqrt_mu(v) * (v[0] - 0.5 * v[1] * v[2]).cos());
        let g = o.grid.sample(|v| sqrt_mu(v) * (1.0 + v[2]).powi(2));
        assert!(o.adjointness_defect(&f, &g).unwrap() < 1e-12);
        assert!(o.kernel_symmetry_defect() <= 1e-12);
    }

    #[test]
    fn conservative_form_kills_null_space_exactly() {
        let o = op(8);
        for k in 0..5 {
            let r = o.apply_conservative(&o.basis.vectors[k]).unwrap();
            assert!(o.grid.norm(&r) < 1e-12);
        }
    }

    #[test]
    fn nu_is_comparable_to_bracket() {
        let o = op(8);
        let (lo, hi) = o.nu_bracket_bounds();
        assert!(lo > 0.0 && hi < f64::INFINITY && lo <= hi);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let o = op(6);
        assert!(matches!(o.apply_l(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }
}
