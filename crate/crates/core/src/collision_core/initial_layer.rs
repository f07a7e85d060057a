//! Homogeneous initial-layer relaxation `∂_τ g + L g = S`.
//!
//! The conservative operator `L_c` is diagonalized once in the weighted
//! symmetric form `W^{1/2} L_c W^{-1/2} = Q Λ Qᵀ`; each step is then the
//! exact exponential propagator with a `φ₁` source term evaluated at the step
//! midpoint. The null-space part of the data is carried unchanged, so the
//! late-time limit is exactly the projection of the initial data when
//! `S = 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::basis::{project_null, MacroState};
use super::operator::KernelOperator;
use super::spectrum::symmetric_conservative_matrix;
use crate::error::{Error, Result};
use crate::quadrature::linear_fit;

/// Time-dependent source `τ ↦ S(τ)`.
pub type Source<'a> = &'a dyn Fn(f64) -> Vec<f64>;

/// Output of [`initial_layer_solve`].
#[derive(Debug, Clone, Serialize)]
pub struct InitialLayerResult {
    /// Sample times, starting at 0.
    pub times: Vec<f64>,
    /// `g(τ)` at each sample time.
    #[serde(skip)]
    pub trajectory: Vec<Vec<f64>>,
    /// `P[g(τ_max)]` as a macroscopic state.
    pub g_inf: MacroState,
    /// `‖g(τ) − g∞‖` at each sample time.
    pub distance_to_limit: Vec<f64>,
    /// Fitted exponential rate of `‖g − g∞‖` (if the data allow a fit).
    pub decay_rate: Option<f64>,
    /// Coefficient of determination of the decay fit.
    pub r_squared: Option<f64>,
}

/// Eigen-decomposed conservative operator for exact exponential stepping.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    sqrt_w: Vec<f64>,
}

impl Propagator {
    /// Diagonalizes `L_c` (dense; small grids only).
    pub fn new(op: &KernelOperator) -> Self {
        let eig = SymmetricEigen::new(symmetric_conservative_matrix(op));
        Self { eigenvalues: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors, sqrt_w: op.grid.weights.iter().map(|w| w.sqrt()).collect() }
    }

    /// Eigenvalues of `L_c` (unsorted).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn to_modal(&self, f: &[f64]) -> DVector<f64> {
        let x = DVector::from_iterator(f.len(), f.iter().zip(&self.sqrt_w).map(|(a, s)| a * s));
        self.vectors.tr_mul(&x)
    }

    fn to_nodal(&self, y: &DVector<f64>) -> Vec<f64> {
        let x = &self.vectors * y;
        x.iter().zip(&self.sqrt_w).map(|(a, s)| a / s).collect()
    }

    /// `e^{−L_c τ} f`.
    pub fn evolve(&self, f: &[f64], tau: f64) -> Vec<f64> {
        let mut y = self.to_modal(f);
        for (yk, lam) in y.iter_mut().zip(&self.eigenvalues) {
            *yk *= (-lam * tau).exp();
        }
        self.to_nodal(&y)
    }
}

/// `(e^x − 1)/x`, continued at zero.
fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

/// Integrates `dg/dτ = −L g + S` from `g(0) = z` to `τ_max`.
///
/// Errors with a non-convergence flag if the distance of `g(τ_max)` from the
/// null space exceeds `tol·max(1, ‖z‖)`.
pub fn initial_layer_solve(z: &[f64], source: Option<Source<'_>>, op: &KernelOperator, tau_max: f64, dt: f64, tol: f64) -> Result<InitialLayerResult> {
    let prop = Propagator::new(op);
    initial_layer_solve_with(&prop, z, source, op, tau_max, dt, tol)
}

/// As [`initial_layer_solve`], reusing a precomputed propagator.
pub fn initial_layer_solve_with(prop: &Propagator, z: &[f64], source: Option<Source<'_>>, op: &KernelOperator, tau_max: f64, dt: f64, tol: f64) -> Result<InitialLayerResult> {
    op.grid.check(z)?;
    if !(dt > 0.0) || !(tau_max > 0.0) {
        return Err(Error::InvalidParameter("initial layer needs dt > 0 and tau_max > 0".into()));
    }
    let steps = (tau_max / dt).ceil().max(1.0) as usize;
    let h = tau_max / steps as f64;
    let decay: Vec<f64> = prop.eigenvalues.iter().map(|l| (-l * h).exp()).collect();
    let gain: Vec<f64> = prop.eigenvalues.iter().map(|l| h * phi1(-l * h)).collect();
    let mut y = prop.to_modal(z);
    let mut times = vec![0.0];
    let mut trajectory = vec![z.to_vec()];
    for s in 0..steps {
        let tau = s as f64 * h;
        let forcing = match source {
            Some(src) => {
                let sv = src(tau + 0.5 * h);
                op.grid.check(&sv)?;
                Some(prop.to_modal(&sv))
            }
            None => None,
        };
        for k in 0..y.len() {
            y[k] *= decay[k];
            if let Some(fm) = &forcing {
                y[k] += gain[k] * fm[k];
            }
        }
        times.push(tau + h);
        trajectory.push(prop.to_nodal(&y));
    }
    let last = trajectory.last().unwrap();
    let (g_inf, p_last) = project_null(last, &op.basis)?;
    let distance_to_limit: Vec<f64> = trajectory
        .iter()
        .map(|g| {
            let d: Vec<f64> = g.iter().zip(&p_last).map(|(a, b)| a - b).collect();
            op.grid.norm(&d)
        })
        .collect();
    let scale = op.grid.norm(z).max(1.0);
    let residual = *distance_to_limit.last().unwrap();
    if residual > tol * scale {
        return Err(Error::NonConvergence { what: "initial layer relaxation".into(), iterations: steps, residual: residual / scale });
    }
    let (decay_rate, r_squared) = fit_late_decay(&times, &distance_to_limit);
    Ok(InitialLayerResult { times, trajectory, g_inf, distance_to_limit, decay_rate, r_squared })
}

/// Fits `log d(τ)` on the late half of the window where `d` is above rounding noise.
fn fit_late_decay(times: &[f64], d: &[f64]) -> (Option<f64>, Option<f64>) {
    let d0 = d.iter().copied().fold(0.0f64, f64::max);
    if d0 == 0.0 {
        return (None, None);
    }
    let floor = 1e-10 * d0;
    let end = d.iter().position(|&x| x <= floor).unwrap_or(d.len());
    let start = end / 2;
    if end < start + 3 {
        return (None, None);
    }
    let xs = &times[start..end];
    let ys: Vec<f64> = d[start..end].iter().map(|x| x.ln()).collect();
    match linear_fit(xs, &ys) {
        Ok((slope, _, r2)) => (Some(-slope), Some(r2)),
        Err(_) => (None, None),
    }
}
