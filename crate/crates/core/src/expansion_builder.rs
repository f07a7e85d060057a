//! Second-order Hilbert-expansion coefficients on a one-dimensional slab.
//!
//! The interior expansion `f = ε F₁ + ε² F₂ + …` splits each order into a
//! null-space part `A_k + B_k` and an orthogonal part `C_k`. With the fluid
//! fields `(ρ, u, θ)` prescribed on a uniform slab grid in `x = x₁`:
//!
//! * `F₁ = A₁ = μ^{1/2}(ρ + u·v + θ(|v|²−3)/2)` pointwise in the null space;
//! * `B₂` collects the quadratic products of the `A₁` coefficients;
//! * `C₂ ∈ 𝓝⊥` solves `L C₂ = (I − P)[−v₁ ∂ₓF₁ + Γ[F₁, F₁]]`.
//!
//! Spatial derivatives use fourth-order central differences (one-sided
//! fourth-order stencils at the two ends). `L` is always the conservative
//! form `L_c = (I − P) L (I − P)` of [`KernelOperator::apply_conservative`],
//! so `L[B₂] = 0` holds to rounding.
//!
//! Coefficient arrays of type `[f64; 5]` in this module are in the *paper
//! scale* `(ρ, u₁, u₂, u₃, θ)` on the unnormalized directions
//! `μ^{1/2}{1, v₁, v₂, v₃, (|v|²−3)/2}`; [`paper_to_state`] converts them to
//! coefficients on the orthonormal basis.

use serde::{Deserialize, Serialize};

use crate::collision_core::{GammaOperator, KernelOperator, MacroState, NullBasis};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, cg, norm_w};

/// Relative size of the non-null part below which a kinetic value counts as
/// a null-space element (enables the bilinear table in [`collision_field`]).
pub const NULL_MEMBERSHIP_TOL: f64 = 1e-12;

/// Fluid state at one slab node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FluidState {
    /// Density perturbation `ρ`.
    pub rho: f64,
    /// Velocity `u`.
    pub u: [f64; 3],
    /// Temperature perturbation `θ`.
    pub theta: f64,
    /// Pressure perturbation `p`.
    pub p: f64,
}

/// Fluid fields on a uniform grid of the slab coordinate `x`.
#[derive(Debug, Clone, Serialize)]
pub struct FluidField {
    /// Uniform, ascending nodes.
    pub x: Vec<f64>,
    /// Density at each node.
    pub rho: Vec<f64>,
    /// Velocity at each node.
    pub u: Vec<[f64; 3]>,
    /// Temperature at each node.
    pub theta: Vec<f64>,
    /// Pressure at each node.
    pub p: Vec<f64>,
}

impl FluidField {
    /// Minimum node count for the five-point stencils.
    pub const MIN_NODES: usize = 5;

    /// Builds a field from explicit columns.
    pub fn new(x: Vec<f64>, rho: Vec<f64>, u: Vec<[f64; 3]>, theta: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let n = x.len();
        check_len(n, rho.len())?;
        check_len(n, u.len())?;
        check_len(n, theta.len())?;
        check_len(n, p.len())?;
        uniform_spacing(&x)?;
        let finite = rho.iter().chain(&theta).chain(&p).chain(u.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("fluid field contains non-finite values".into()));
        }
        Ok(Self { x, rho, u, theta, p })
    }

    /// Samples `state(x)` on `n` uniform nodes of `[x0, x1]`.
    pub fn from_fn<F: Fn(f64) -> FluidState>(x0: f64, x1: f64, n: usize, state: F) -> Result<Self> {
        if n < Self::MIN_NODES || !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
            return Err(Error::InvalidParameter(format!("slab grid needs n ≥ {} nodes on a finite interval x0 < x1", Self::MIN_NODES)));
        }
        let h = (x1 - x0) / (n - 1) as f64;
        let x: Vec<f64> = (0..n).map(|i| if i + 1 == n { x1 } else { x0 + h * i as f64 }).collect();
        let states: Vec<FluidState> = x.iter().map(|&xi| state(xi)).collect();
        Self::new(
            x,
            states.iter().map(|s| s.rho).collect(),
            states.iter().map(|s| s.u).collect(),
            states.iter().map(|s| s.theta).collect(),
            states.iter().map(|s| s.p).collect(),
        )
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    /// `true` when the grid is empty (never for a validated field).
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Grid spacing.
    pub fn spacing(&self) -> f64 {
        (self.x[self.len() - 1] - self.x[0]) / (self.len() - 1) as f64
    }

    /// State at node `i`.
    pub fn state(&self, i: usize) -> FluidState {
        FluidState { rho: self.rho[i], u: self.u[i], theta: self.theta[i], p: self.p[i] }
    }

    /// States at the two ends of the slab.
    pub fn boundary_values(&self) -> (FluidState, FluidState) {
        (self.state(0), self.state(self.len() - 1))
    }

    /// Paper-scale coefficients `(ρ, u, θ)` of `A₁` at every node.
    pub fn paper_coefficients(&self) -> Vec<[f64; 5]> {
        (0..self.len()).map(|i| [self.rho[i], self.u[i][0], self.u[i][1], self.u[i][2], self.theta[i]]).collect()
    }

    /// Trapezoidal `L²(x)` norm of a nodal function.
    pub fn grid_norm(&self, values: &[f64]) -> f64 {
        trapezoid_norm(self.spacing(), values.iter().map(|v| v * v))
    }

    /// `‖∂ₓ u₁‖`: the slab form of the divergence constraint.
    pub fn divergence_residual(&self) -> f64 {
        let u1: Vec<f64> = self.u.iter().map(|u| u[0]).collect();
        self.grid_norm(&derivative(&u1, self.spacing()))
    }
}

/// Kinetic field: one velocity-grid function per slab node.
#[derive(Debug, Clone, Serialize)]
pub struct KineticField {
    /// Slab nodes.
    pub x: Vec<f64>,
    /// Grid function at each node.
    pub values: Vec<Vec<f64>>,
}

impl KineticField {
    /// Zero field on the given nodes.
    pub fn zeros(x: &[f64], n_velocity: usize) -> Self {
        Self { x: x.to_vec(), values: vec![vec![0.0; n_velocity]; x.len()] }
    }

    /// `L²(x; L²(v))` norm with trapezoidal weights in `x`.
    pub fn norm(&self, w: &[f64]) -> f64 {
        let h = spacing_of(&self.x);
        trapezoid_norm(h, self.values.iter().map(|f| dot(w, f, f)))
    }

    /// Largest velocity `L²` norm over the nodes.
    pub fn max_norm(&self, w: &[f64]) -> f64 {
        self.values.iter().fold(0.0f64, |m, f| m.max(norm_w(w, f)))
    }

    /// Largest `|⟨f(x), e_k⟩|` over nodes and basis directions.
    pub fn max_null_component(&self, basis: &NullBasis) -> f64 {
        self.values.iter().flat_map(|f| basis.coefficients(f)).fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// The assembled second-order expansion.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionCoeffs {
    /// `F₁ = A₁` on the slab.
    pub f1: KineticField,
    /// Paper-scale `A₁` coefficients at each node.
    pub a1: Vec<[f64; 5]>,
    /// Paper-scale `B₂` coefficients at each node.
    pub b2: Vec<[f64; 5]>,
    /// `C₂ ∈ 𝓝⊥` at each node.
    pub c2: KineticField,
    /// Diagnostics of the `C₂` solves.
    pub c2_solve: C2Diagnostics,
    /// `v₁ ∂ₓF₁` used for `C₂`.
    #[serde(skip)]
    pub streaming: KineticField,
    /// `Γ[F₁, F₁]` used for `C₂`.
    #[serde(skip)]
    pub collision: KineticField,
}

/// Diagnostics of [`compute_c2`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct C2Diagnostics {
    /// Largest CG iteration count over the nodes.
    pub max_iterations: usize,
    /// Largest `‖L C₂ − r‖ / ‖r‖` over the nodes.
    pub max_relative_residual: f64,
    /// `‖L C₂ − r‖` in `L²(x; L²(v))`.
    pub residual: f64,
    /// `‖r‖` in `L²(x; L²(v))`.
    pub rhs_norm: f64,
}

/// Components of the order-two identity residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResidual {
    /// `‖L[B₂ + C₂] + v₁∂ₓF₁ − Γ[F₁,F₁]‖` in `L²(x; L²(v))`.
    pub total: f64,
    /// Largest velocity norm of the residual over the nodes.
    pub max_pointwise: f64,
    /// Norm of the null-space part `P[v₁∂ₓF₁ − Γ[F₁,F₁]]`, which no `F₂`
    /// can remove; it vanishes when `∂ₓu₁ = 0` and `∂ₓ(ρ + θ) = 0`.
    pub solvability: f64,
}

/// Transport coefficients from the bracket integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportCoefficients {
    /// Viscosity `γ₁ = ⟨𝔅, L⁻¹𝔅⟩`.
    pub gamma1: f64,
    /// Conductivity `γ₂ = (2/5)⟨𝔄, L⁻¹𝔄⟩`.
    pub gamma2: f64,
    /// CG iterations for the two solves.
    pub iterations: [usize; 2],
}

fn dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    crate::linalg::dot_w(w, a, b)
}

fn uniform_spacing(x: &[f64]) -> Result<f64> {
    if x.len() < FluidField::MIN_NODES {
        return Err(Error::InvalidParameter(format!("slab grid needs at least {} nodes, got {}", FluidField::MIN_NODES, x.len())));
    }
    let h = spacing_of(x);
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter("slab nodes must be strictly ascending".into()));
    }
    if x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::InvalidParameter("slab nodes must be uniformly spaced".into()));
    }
    Ok(h)
}

fn spacing_of(x: &[f64]) -> f64 {
    (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64
}

fn trapezoid_norm<I: Iterator<Item = f64>>(h: f64, squares: I) -> f64 {
    let s: Vec<f64> = squares.collect();
    let n = s.len();
    let sum: f64 = s.iter().enumerate().map(|(i, v)| if i == 0 || i + 1 == n { 0.5 * v } else { *v }).sum();
    (h * sum).sqrt()
}

/// Five-point fourth-order stencil for the derivative at node `i` of `n`:
/// returns the first node used and the weights (to be divided by `12h`).
fn stencil(i: usize, n: usize) -> (usize, [f64; 5]) {
    const INTERIOR: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    let flip = |w: [f64; 5]| -> [f64; 5] { [-w[4], -w[3], -w[2], -w[1], -w[0]] };
    match i {
        0 => (0, EDGE0),
        1 => (0, EDGE1),
        _ if i + 2 == n => (n - 5, flip(EDGE1)),
        _ if i + 1 == n => (n - 5, flip(EDGE0)),
        _ => (i - 2, INTERIOR),
    }
}

/// Fourth-order finite-difference derivative of nodal values with spacing `h`.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (s, w) = stencil(i, n);
            w.iter().enumerate().map(|(k, wk)| wk * values[s + k]).sum::<f64>() / (12.0 * h)
        })
        .collect()
}

/// Applies [`derivative`] to every velocity component of a kinetic field.
pub fn derivative_field(field: &KineticField) -> Result<KineticField> {
    let h = uniform_spacing(&field.x)?;
    let n = field.x.len();
    let m = field.values[0].len();
    let values = (0..n)
        .map(|i| {
            let (s, w) = stencil(i, n);
            let mut out = vec![0.0; m];
            for (k, wk) in w.iter().enumerate() {
                axpy(wk / (12.0 * h), &field.values[s + k], &mut out);
            }
            out
        })
        .collect();
    Ok(KineticField { x: field.x.clone(), values })
}

/// Converts paper-scale coefficients `(ρ, u, θ)` to an orthonormal-basis state.
pub fn paper_to_state(c: &[f64; 5]) -> MacroState {
    MacroState::from_paper_scale(c[0], [c[1], c[2], c[3]], c[4])
}

/// `F₁ = μ^{1/2}(ρ + u·v + θ(|v|²−3)/2)` at every slab node.
pub fn assemble_f1(fluid: &FluidField, basis: &NullBasis) -> KineticField {
    let values = fluid.paper_coefficients().iter().map(|c| paper_to_state(c).reconstruct(basis)).collect();
    KineticField { x: fluid.x.clone(), values }
}

/// Second-order connecting coefficients from the first-order ones (paper scale):
/// `B₀ = 0`, `Bᵢ = A₀Aᵢ` (`i = 1,2,3`), `B₄ = A₀A₄ + A₁² + A₂² + A₃²`.
pub fn compute_b2(a1: &[f64; 5]) -> [f64; 5] {
    let [a0, a1x, a2x, a3x, a4] = *a1;
    [0.0, a0 * a1x, a0 * a2x, a0 * a3x, a0 * a4 + a1x * a1x + a2x * a2x + a3x * a3x]
}

/// `v₁ f` for a velocity-grid function.
fn times_v1(op: &KernelOperator, f: &[f64]) -> Vec<f64> {
    op.grid.nodes.iter().zip(f).map(|(v, fi)| v[0] * fi).collect()
}

/// `v₁ ∂ₓ F` for a kinetic field.
pub fn streaming_field(field: &KineticField, op: &KernelOperator) -> Result<KineticField> {
    let d = derivative_field(field)?;
    Ok(KineticField { x: d.x, values: d.values.iter().map(|f| times_v1(op, f)).collect() })
}

/// `Γ[F(x), F(x)]` at every node.
///
/// When every value lies in the null space and the nodes outnumber the
/// active coefficient pairs, the bilinear form is tabulated on the pairs
/// `Γ[e_a, e_b]` and combined per node; otherwise `Γ` is evaluated directly
/// at each node.
pub fn collision_field(field: &KineticField, op: &KernelOperator, gamma: &GammaOperator) -> Result<KineticField> {
    let basis = &op.basis;
    let w = basis.weights();
    let n_vel = op.len();
    check_len(n_vel, gamma.grid().len())?;
    let mut coeffs = Vec::with_capacity(field.values.len());
    let mut in_null = true;
    for f in &field.values {
        check_len(n_vel, f.len())?;
        let c = basis.coefficients(f);
        let mut rest = f.clone();
        for (k, ck) in c.iter().enumerate() {
            axpy(-ck, &basis.vectors[k], &mut rest);
        }
        if norm_w(w, &rest) > NULL_MEMBERSHIP_TOL * norm_w(w, f).max(f64::MIN_POSITIVE) {
            in_null = false;
        }
        coeffs.push(c);
    }
    let mut active = [false; 5];
    for c in &coeffs {
        for k in 0..5 {
            active[k] |= c[k] != 0.0;
        }
    }
    let n_active = active.iter().filter(|a| **a).count();
    if !in_null || field.values.len() <= n_active * (n_active + 1) / 2 {
        let values = field.values.iter().map(|f| gamma.apply(f, f)).collect::<Result<Vec<_>>>()?;
        return Ok(KineticField { x: field.x.clone(), values });
    }
    let mut table: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; 5]; 5];
    for a in 0..5 {
        for b in a..5 {
            if active[a] && active[b] {
                table[a][b] = Some(gamma.apply(&basis.vectors[a], &basis.vectors[b])?);
            }
        }
    }
    let values = coeffs
        .iter()
        .map(|c| {
            let mut out = vec![0.0; n_vel];
            for a in 0..5 {
                for b in a..5 {
                    if let Some(g) = &table[a][b] {
                        let s = if a == b { c[a] * c[a] } else { 2.0 * c[a] * c[b] };
                        if s != 0.0 {
                            axpy(s, g, &mut out);
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(KineticField { x: field.x.clone(), values })
}

/// Solves `L_c x = r` on `𝓝⊥` by conjugate gradients (`r` is projected first).
pub fn solve_orthogonal(op: &KernelOperator, r: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)> {
    let mut b = r.to_vec();
    op.basis.remove_null(&mut b);
    let w = op.basis.weights().to_vec();
    let (mut x, stats) = cg(
        |p, out| {
            let lp = op.apply_conservative(p).expect("grid lengths checked");
            out.copy_from_slice(&lp);
        },
        &w,
        &b,
        tol,
        max_iter,
    )?;
    op.basis.remove_null(&mut x);
    Ok((x, stats.iterations, stats.relative_residual))
}

/// `C₂` with the streaming and collision terms of its right-hand side.
#[derive(Debug, Clone)]
pub struct C2Solution {
    /// `C₂ ∈ 𝓝⊥`.
    pub c2: KineticField,
    /// `v₁ ∂ₓF₁`.
    pub streaming: KineticField,
    /// `Γ[F₁, F₁]`.
    pub collision: KineticField,
    /// Solve diagnostics.
    pub diagnostics: C2Diagnostics,
}

/// `C₂ = L⁻¹ (I − P)[−v₁∂ₓF₁ + Γ[F₁,F₁]]` on `𝓝⊥`, node by node, keeping the
/// two right-hand-side terms.
pub fn compute_c2_parts(f1: &KineticField, op: &KernelOperator, gamma: &GammaOperator, tol: f64, max_iter: usize) -> Result<C2Solution> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter("CG needs tol > 0 and max_iter > 0".into()));
    }
    let w = op.basis.weights();
    let streaming = streaming_field(f1, op)?;
    let collision = collision_field(f1, op, gamma)?;
    let mut diag = C2Diagnostics::default();
    let mut rhs = KineticField::zeros(&f1.x, op.len());
    let mut res = KineticField::zeros(&f1.x, op.len());
    let mut values = Vec::with_capacity(f1.x.len());
    for i in 0..f1.x.len() {
        let mut r: Vec<f64> = collision.values[i].iter().zip(&streaming.values[i]).map(|(g, s)| g - s).collect();
        op.basis.remove_null(&mut r);
        let (c, it, rel) = solve_orthogonal(op, &r, tol, max_iter)?;
        let lc = op.apply_conservative(&c)?;
        res.values[i] = lc.iter().zip(&r).map(|(a, b)| a - b).collect();
        diag.max_iterations = diag.max_iterations.max(it);
        diag.max_relative_residual = diag.max_relative_residual.max(rel);
        rhs.values[i] = r;
        values.push(c);
    }
    diag.residual = res.norm(w);
    diag.rhs_norm = rhs.norm(w);
    Ok(C2Solution { c2: KineticField { x: f1.x.clone(), values }, streaming, collision, diagnostics: diag })
}

/// `C₂ = L⁻¹ (I − P)[−v₁∂ₓF₁ + Γ[F₁,F₁]]` on `𝓝⊥`, node by node.
pub fn compute_c2(f1: &KineticField, op: &KernelOperator, gamma: &GammaOperator, tol: f64, max_iter: usize) -> Result<(KineticField, C2Diagnostics)> {
    let s = compute_c2_parts(f1, op, gamma, tol, max_iter)?;
    Ok((s.c2, s.diagnostics))
}

/// Assembles `F₁`, `B₂`, and `C₂` for a fluid field (with `A₂ = 0`).
pub fn build_expansion(fluid: &FluidField, op: &KernelOperator, gamma: &GammaOperator, tol: f64, max_iter: usize) -> Result<ExpansionCoeffs> {
    let f1 = assemble_f1(fluid, &op.basis);
    let a1 = fluid.paper_coefficients();
    let b2 = a1.iter().map(compute_b2).collect();
    let s = compute_c2_parts(&f1, op, gamma, tol, max_iter)?;
    Ok(ExpansionCoeffs { f1, a1, b2, c2: s.c2, c2_solve: s.diagnostics, streaming: s.streaming, collision: s.collision })
}

/// Residual of `L[F₂] = −v₁∂ₓF₁ + Γ[F₁,F₁]` with `F₂ = B₂ + C₂`.
///
/// `L[B₂ + C₂]` is applied afresh; the streaming and collision terms are the
/// ones stored with the expansion.
pub fn order_identity_residual(expansion: &ExpansionCoeffs, op: &KernelOperator) -> Result<IdentityResidual> {
    let basis = &op.basis;
    let w = basis.weights();
    let (stream, coll) = (&expansion.streaming, &expansion.collision);
    let n = expansion.f1.x.len();
    check_len(n, stream.values.len())?;
    check_len(n, coll.values.len())?;
    let mut res = KineticField::zeros(&expansion.f1.x, op.len());
    let mut solv = KineticField::zeros(&expansion.f1.x, op.len());
    for i in 0..n {
        let mut f2 = paper_to_state(&expansion.b2[i]).reconstruct(basis);
        axpy(1.0, &expansion.c2.values[i], &mut f2);
        let mut r = op.apply_conservative(&f2)?;
        axpy(1.0, &stream.values[i], &mut r);
        axpy(-1.0, &coll.values[i], &mut r);
        res.values[i] = r;
        let defect: Vec<f64> = stream.values[i].iter().zip(&coll.values[i]).map(|(s, g)| s - g).collect();
        let c = basis.coefficients(&defect);
        solv.values[i] = MacroState::from_array(c).reconstruct(basis);
    }
    Ok(IdentityResidual { total: res.norm(w), max_pointwise: res.max_norm(w), solvability: solv.norm(w) })
}

/// `‖∂ₓ(ρ + θ)‖` with trapezoidal weights.
pub fn boussinesq_residual(fluid: &FluidField) -> f64 {
    let s: Vec<f64> = fluid.rho.iter().zip(&fluid.theta).map(|(r, t)| r + t).collect();
    fluid.grid_norm(&derivative(&s, fluid.spacing()))
}

/// The shear direction `𝔅 = μ^{1/2} v₁v₂` and heat-flux direction
/// `𝔄 = μ^{1/2} v₁(|v|²−5)/2`, both projected onto `𝓝⊥`.
pub fn bracket_directions(op: &KernelOperator) -> (Vec<f64>, Vec<f64>) {
    use crate::collision_core::params::{norm2, sqrt_mu};
    let mut shear = op.grid.sample(|v| sqrt_mu(v) * v[0] * v[1]);
    let mut heat = op.grid.sample(|v| sqrt_mu(v) * v[0] * (norm2(v) - 5.0) / 2.0);
    op.basis.remove_null(&mut shear);
    op.basis.remove_null(&mut heat);
    (shear, heat)
}

/// Bracket integrals for an arbitrary self-adjoint operator positive on `𝓝⊥`.
///
/// Normalization: `γ₁ = ⟨𝔅, L⁻¹𝔅⟩`, `γ₂ = (2/5)⟨𝔄, L⁻¹𝔄⟩`, so that the
/// relaxation operator `L = I − P` gives `γ₁ = γ₂ = 1`.
pub fn transport_brackets<A>(mut apply: A, op: &KernelOperator, tol: f64, max_iter: usize) -> Result<TransportCoefficients>
where
    A: FnMut(&[f64], &mut [f64]),
{
    let w = op.basis.weights().to_vec();
    let (shear, heat) = bracket_directions(op);
    let (xs, s1) = cg(&mut apply, &w, &shear, tol, max_iter)?;
    let (xh, s2) = cg(&mut apply, &w, &heat, tol, max_iter)?;
    let gamma1 = dot(&w, &shear, &xs);
    let gamma2 = 0.4 * dot(&w, &heat, &xh);
    if !(gamma1 > 0.0 && gamma2 > 0.0) {
        return Err(Error::Inconsistent(format!("non-positive transport coefficients ({gamma1}, {gamma2})")));
    }
    Ok(TransportCoefficients { gamma1, gamma2, iterations: [s1.iterations, s2.iterations] })
}

/// Viscosity and conductivity of the assembled operator (`L_c`, CG on `𝓝⊥`).
pub fn compute_transport_coefficients(op: &KernelOperator, tol: f64, max_iter: usize) -> Result<TransportCoefficients> {
    transport_brackets(
        |p, out| {
            let lp = op.apply_conservative(p).expect("grid lengths checked");
            out.copy_from_slice(&lp);
        },
        op,
        tol,
        max_iter,
    )
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::collision_core::params::sqrt_mu;
    use crate::collision_core::{assemble_collision, CollisionParams, VelocityGrid};
    use crate::quadrature::SphereRule;

    fn setup(n: usize) -> (KernelOperator, GammaOperator) {
        let grid = Arc::new(VelocityGrid::new(n, 6.0).unwrap());
        let p = CollisionParams::default();
        let op = assemble_collision(grid.clone(), &p).unwrap();
        let gm = GammaOperator::new(grid, &p, SphereRule::lebedev26()).unwrap();
        (op, gm)
    }

    #[test]
    fn derivative_is_exact_on_quartics() {
        let x: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        let f: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t + t.powi(3) - 0.5 * t.powi(4)).collect();
        let d = derivative(&f, 0.1);
        for (t, di) in x.iter().zip(&d) {
            let exact = -2.0 + 3.0 * t * t - 2.0 * t.powi(3);
            assert!((di - exact).abs() < 1e-11, "{t}: {di} vs {exact}");
        }
    }

    #[test]
    fn b2_examples() {
        assert_eq!(compute_b2(&[1.0, 0.0, 0.0, 0.0, 0.0]), [0.0; 5]);
        assert_eq!(compute_b2(&[1.0, 1.0, 0.0, 0.0, 1.0]), [0.0, 1.0, 0.0, 0.0, 2.0]);
        assert_eq!(compute_b2(&[0.0, 2.0, 3.0, -1.0, 0.0]), [0.0, 0.0, 0.0, 0.0, 14.0]);
    }

    #[test]
    fn boussinesq_examples() {
        let f = FluidField::from_fn(0.0, 1.0, 11, |x| FluidState { rho: 1.0 - x * x, theta: x * x, ..Default::default() }).unwrap();
        assert!(boussinesq_residual(&f) < 1e-13);
        let f = FluidField::from_fn(0.0, 1.0, 11, |x| FluidState { rho: x, theta: x, ..Default::default() }).unwrap();
        assert!((boussinesq_residual(&f) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn f1_temperature_slot_uses_conversion_factor() {
        let (op, _) = setup(6);
        let f = FluidField::from_fn(0.0, 1.0, 5, |_| FluidState { rho: -1.0, theta: 1.0, ..Default::default() }).unwrap();
        let f1 = assemble_f1(&f, &op.basis);
        // Oracle: project μ^{1/2}(−1 + (|v|²−3)/2) onto e₄ by quadrature.
        let direct = op.grid.sample(|v| sqrt_mu(v) * (-1.0 + (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 3.0) / 2.0));
        let c = op.grid.inner(&direct, &op.basis.vectors[4]);
        assert!((c - 1.5f64.sqrt()).abs() < 1e-10);
        for v in &f1.values {
            assert!((op.basis.coefficients(v)[4] - c).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_holds_for_compliant_fields() {
        let (op, gm) = setup(6);
        let fluid = FluidField::from_fn(0.0, 1.0, 15, |x| {
            let th = 0.3 * (2.0 * x).sin();
            FluidState { rho: 0.1 - th, u: [0.2, 0.5 * x, -0.3 * x * x], theta: th, p: 0.0 }
        })
        .unwrap();
        let e = build_expansion(&fluid, &op, &gm, 1e-10, 500).unwrap();
        assert!(e.c2.max_null_component(&op.basis) < 1e-12);
        let r = order_identity_residual(&e, &op).unwrap();
        assert!(r.total < 1e-7 && r.solvability < 1e-10, "{r:?}");
        // L e₀ = 0: adding e₀ to C₂ leaves the residual unchanged.
        let mut shifted = e.clone();
        for c in &mut shifted.c2.values {
            axpy(1.0, &op.basis.vectors[0], c);
        }
        let r2 = order_identity_residual(&shifted, &op).unwrap();
        assert!((r2.total - r.total).abs() < 1e-12);
    }

    #[test]
    fn bgk_brackets_are_unity() {
        let (op, _) = setup(8);
        let t = transport_brackets(
            |p, out| {
                out.copy_from_slice(p);
                op.basis.remove_null(out);
            },
            &op,
            1e-12,
            50,
        )
        .unwrap();
        assert!((t.gamma1 - 1.0).abs() < 1e-10 && (t.gamma2 - 1.0).abs() < 1e-10, "{t:?}");
    }
}
