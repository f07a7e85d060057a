//! Boundary corrector `h̃ ∈ span{e₀, e₂, e₃, e₄}` forcing a decaying solution.
//!
//! The endomorphism `𝓜 : h̃ ↦ g̃_L` maps null-space in-flow data of the
//! homogeneous problem (`S = 0`) to its far-field limit. Solving
//! `𝓜 h̃ = g_L` with the limit `g_L` of the original problem and replacing the
//! in-flow data by `h − h̃` yields a solution whose far-field limit vanishes.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use super::{extract_limit, fit_decay_window, DecayFit, LimitEstimate, MilneSolution, MilneSolver, SourceFn};
use crate::collision_core::MacroState;
use crate::error::{Error, Result};
use crate::quadrature::linear_fit;

/// Null-space directions spanned by the corrector.
pub const CORRECTOR_INDICES: [usize; 4] = [0, 2, 3, 4];

/// Output of [`build_corrector`].
#[derive(Debug, Clone, Serialize)]
pub struct CorrectorResult {
    /// `m[j][k]` = coefficient of `e_{I_j}` in `𝓜[e_{I_k}]`, `I = (0, 2, 3, 4)`.
    pub m: [[f64; 4]; 4],
    /// `max_{jk} |𝓜 − I|`.
    pub deviation_from_identity: f64,
    /// The corrector (its `e₁` coefficient is exactly zero).
    pub tilde_h: MacroState,
    /// Far-field limit of the uncorrected problem.
    pub target: LimitEstimate,
    /// Far-field limit of the corrected problem.
    pub corrected_limit: LimitEstimate,
    /// Decay fit of the corrected solution over `[1, L/2]`.
    pub corrected_decay: Option<DecayFit>,
    /// The corrected solution.
    #[serde(skip)]
    pub corrected: MilneSolution,
    /// The uncorrected solution.
    #[serde(skip)]
    pub uncorrected: MilneSolution,
}

/// Assembles `𝓜` from four homogeneous solves.
pub fn assemble_endomorphism(solver: &MilneSolver, tol: f64, max_iter: usize) -> Result<[[f64; 4]; 4]> {
    let basis = &solver.operator().basis;
    let mut m = [[0.0; 4]; 4];
    for (k, &idx) in CORRECTOR_INDICES.iter().enumerate() {
        let h = basis.vectors[idx].clone();
        let sol = solver.solve(&h, None, 0.0, tol, max_iter)?;
        let lim = extract_limit(&sol, tol)?.g_l.to_array();
        for (j, &jdx) in CORRECTOR_INDICES.iter().enumerate() {
            m[j][k] = lim[jdx];
        }
    }
    Ok(m)
}

/// Builds the corrector for in-flow data `h` and source `S`.
///
/// `𝓜` is assembled with `S = 0`; the target is the limit of the original
/// problem. Fails with a singular-matrix error when `𝓜` is not invertible
/// and with an inconsistency error when the corrected limit exceeds
/// `10 · tol` relative to the data.
pub fn build_corrector(
    solver: &MilneSolver,
    h: &[f64],
    source: Option<&SourceFn>,
    decay_rate_k: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CorrectorResult> {
    let basis = solver.operator().basis.clone();
    let uncorrected = solver.solve(h, source, decay_rate_k, tol, max_iter)?;
    let target = extract_limit(&uncorrected, tol)?;
    let m = assemble_endomorphism(solver, tol, max_iter)?;
    let mm = Matrix4::from_fn(|j, k| m[j][k]);
    let mut deviation = 0.0f64;
    for j in 0..4 {
        for k in 0..4 {
            let id = if j == k { 1.0 } else { 0.0 };
            deviation = deviation.max((m[j][k] - id).abs());
        }
    }
    let t = target.g_l.to_array();
    let rhs = Vector4::new(t[0], t[2], t[3], t[4]);
    let det = mm.determinant();
    if !(det.abs() > 1e-12) {
        return Err(Error::SingularMatrix(format!("corrector endomorphism has determinant {det:e}")));
    }
    let d = mm.lu().solve(&rhs).ok_or_else(|| Error::SingularMatrix("corrector endomorphism".into()))?;
    let tilde_h = MacroState { a: d[0], b: [0.0, d[1], d[2]], c: d[3] };
    let th = tilde_h.reconstruct(&basis);
    let h_corr: Vec<f64> = h.iter().zip(&th).map(|(a, b)| a - b).collect();
    let corrected = solver.solve(&h_corr, source, decay_rate_k, tol, max_iter)?;
    let corrected_limit = extract_limit(&corrected, tol)?;
    let scale = uncorrected.sup_norm().max(1.0);
    if corrected_limit.g_l.norm() > 10.0 * tol * scale {
        return Err(Error::Inconsistent(format!(
            "corrected far-field limit {:e} exceeds 10·tol",
            corrected_limit.g_l.norm()
        )));
    }
    let corrected_decay = fit_decay_window(&corrected, None).ok();
    Ok(CorrectorResult { m, deviation_from_identity: deviation, tilde_h, target, corrected_limit, corrected_decay, corrected, uncorrected })
}

/// Log-log slope of `‖𝓜(ε) − I‖` against `ε`; returns `(slope, R²)`.
pub fn corrector_order_fit(epsilons: &[f64], deviations: &[f64]) -> Result<(f64, f64)> {
    if epsilons.iter().chain(deviations).any(|x| !(*x > 0.0)) {
        return Err(Error::FitDegenerate("order fit needs positive data".into()));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    let (slope, _, r2) = linear_fit(&x, &y)?;
    Ok((slope, r2))
}
