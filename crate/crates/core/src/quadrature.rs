//! One-dimensional and spherical quadrature building blocks.
//!
//! * Gauss–Hermite nodes for the weight `e^{-x²/2}`, returned with
//!   *Lebesgue* weights so that `Σ W_i f(x_i) ≈ ∫ f dx` for integrands that
//!   already carry their Gaussian factor.
//! * Gauss–Legendre rules on arbitrary intervals.
//! * Barycentric Lagrange interpolation and collocation derivatives on a
//!   fixed node set, including the Hermite-function variant used for
//!   functions of the form `e^{-x²/4}·p(x)`.
//! * Spherical rules (26-point Lebedev and Gauss–Legendre × trapezoid).
//! * A double-exponential (tanh-sinh) integrator for endpoint singularities.
//! * Least-squares line fitting used by every decay diagnostic.

use std::f64::consts::{PI, SQRT_2};
use std::num::NonZeroUsize;

use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{Error, Result};

/// Normalized Hermite functions `φ_0..φ_{n-1}` at `t`, orthonormal in `L²(ℝ, dt)`.
///
/// Uses the stable three-term recurrence
/// `φ_{k+1} = √(2/(k+1)) t φ_k − √(k/(k+1)) φ_{k−1}`.
pub fn hermite_functions(t: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let phi0 = PI.powf(-0.25) * (-0.5 * t * t).exp();
    out.push(phi0);
    if n == 0 {
        return out;
    }
    out.push(SQRT_2 * t * phi0);
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * t * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Gauss–Hermite rule for the probabilists' weight, in Lebesgue form.
///
/// Returns ascending nodes `x_i` (roots of `He_n`) and weights `W_i` with
/// `Σ W_i e^{-x_i²/2} p(x_i) = ∫ e^{-x²/2} p(x) dx` for every polynomial of
/// degree `≤ 2n − 1`. Golub–Welsch nodes are Newton-polished on the Hermite
/// function `φ_n`, and the weights come from the Christoffel sum
/// `1/Σ_{k<n} φ_k(t)²`, which keeps the tiny outer weights accurate to full
/// relative precision.
pub fn hermite_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nz = NonZeroUsize::new(n).ok_or_else(|| Error::InvalidParameter("Gauss-Hermite order must be positive".into()))?;
    let rule = GaussHermite::new(nz);
    let mut guesses: Vec<f64> = rule.as_node_weight_pairs().iter().map(|p| p.0).collect();
    guesses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (i, &t0) in guesses.iter().enumerate() {
        let mut t = t0;
        for _ in 0..50 {
            let phi = hermite_functions(t, n);
            let dphi = (2.0 * n as f64).sqrt() * phi[n - 1] - t * phi[n];
            if dphi == 0.0 {
                break;
            }
            let dt = phi[n] / dphi;
            t -= dt;
            if dt.abs() <= 1e-15 * t.abs().max(1.0) {
                break;
            }
        }
        if n % 2 == 1 && i == n / 2 {
            t = 0.0;
        }
        let phi = hermite_functions(t, n);
        let christoffel: f64 = phi[..n].iter().map(|p| p * p).sum();
        // Lebesgue weight in t, then change variable x = √2 t.
        nodes.push(SQRT_2 * t);
        weights.push(SQRT_2 / christoffel);
    }
    // Enforce exact mirror symmetry of nodes and weights.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    Ok((nodes, weights))
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`, ascending.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let nz = NonZeroUsize::new(n).ok_or_else(|| Error::InvalidParameter("Gauss-Legendre order must be positive".into()))?;
    let rule = GaussLegendre::new(nz);
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    Ok(pairs.iter().map(|&(x, w)| (c + h * x, h * w)).unzip())
}

/// Barycentric Lagrange interpolation on a fixed set of distinct nodes.
#[derive(Debug, Clone)]
pub struct Barycentric {
    nodes: Vec<f64>,
    lambda: Vec<f64>,
}

impl Barycentric {
    /// Precomputes barycentric weights `λ_j = 1/Π_{k≠j}(x_j − x_k)`, rescaled to unit max.
    pub fn new(nodes: &[f64]) -> Self {
        let n = nodes.len();
        let mut lambda = vec![1.0; n];
        for j in 0..n {
            for k in 0..n {
                if k != j {
                    lambda[j] /= nodes[j] - nodes[k];
                }
            }
        }
        let scale = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        for l in &mut lambda {
            *l /= scale;
        }
        Self { nodes: nodes.to_vec(), lambda }
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// `true` when there are no nodes.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Writes the cardinal polynomials `ℓ_j(x)` into `out`.
    pub fn basis_into(&self, x: f64, out: &mut [f64]) {
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[j] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for (j, o) in out.iter_mut().enumerate() {
            let t = self.lambda[j] / (x - self.nodes[j]);
            *o = t;
            denom += t;
        }
        out.iter_mut().for_each(|o| *o /= denom);
    }

    /// Cardinal polynomials `ℓ_j(x)` as a new vector.
    pub fn basis(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.basis_into(x, &mut out);
        out
    }

    /// Polynomial differentiation matrix `D_ij = ℓ_j'(x_i)`.
    pub fn diff_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    d[i][j] = (self.lambda[j] / self.lambda[i]) / (self.nodes[i] - self.nodes[j]);
                    diag += 1.0 / (self.nodes[i] - self.nodes[j]);
                }
            }
            d[i][i] = diag;
        }
        d
    }
}

/// Collocation derivative for functions `g(x) = e^{-x²/4} p(x)`.
///
/// Interpolates with the cardinal functions `e^{(x_j² − x²)/4} ℓ_j(x)` and
/// differentiates exactly: `D_ij = (ℓ_j'(x_i) − δ_ij x_i/2)·e^{(x_j² − x_i²)/4}`.
/// With Gauss–Hermite nodes and Lebesgue weights `W`, `W D` is
/// skew-symmetric, the discrete counterpart of integration by parts.
pub fn hermite_collocation_derivative(nodes: &[f64]) -> Vec<Vec<f64>> {
    let bary = Barycentric::new(nodes);
    let mut d = bary.diff_matrix();
    for (i, row) in d.iter_mut().enumerate() {
        let xi = nodes[i];
        row[i] -= 0.5 * xi;
        for (j, dij) in row.iter_mut().enumerate() {
            let xj = nodes[j];
            *dij *= (0.25 * (xj * xj - xi * xi)).exp();
        }
    }
    d
}

/// A quadrature rule on the unit sphere `S²`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    /// Unit directions.
    pub dirs: Vec<[f64; 3]>,
    /// Positive weights summing to `4π`.
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// The 26-point Lebedev rule (exact for spherical polynomials of degree 7).
    pub fn lebedev26() -> Self {
        let mut dirs = Vec::with_capacity(26);
        let mut weights = Vec::with_capacity(26);
        let four_pi = 4.0 * PI;
        for axis in 0..3 {
            for s in [-1.0, 1.0] {
                let mut d = [0.0; 3];
                d[axis] = s;
                dirs.push(d);
                weights.push(four_pi / 21.0);
            }
        }
        let r = 1.0 / SQRT_2;
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            for sa in [-1.0, 1.0] {
                for sb in [-1.0, 1.0] {
                    let mut d = [0.0; 3];
                    d[a] = sa * r;
                    d[b] = sb * r;
                    dirs.push(d);
                    weights.push(four_pi * 4.0 / 105.0);
                }
            }
        }
        let r = 1.0 / 3f64.sqrt();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    dirs.push([sx * r, sy * r, sz * r]);
                    weights.push(four_pi * 9.0 / 280.0);
                }
            }
        }
        Self { dirs, weights }
    }

    /// Product rule: Gauss–Legendre in `cos θ` times trapezoid in `φ`.
    pub fn product(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_phi == 0 {
            return Err(Error::InvalidParameter("n_phi must be positive".into()));
        }
        let (c, w) = gauss_legendre(n_theta, -1.0, 1.0)?;
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        let dphi = 2.0 * PI / n_phi as f64;
        for (ci, wi) in c.iter().zip(&w) {
            let s = (1.0 - ci * ci).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = (k as f64 + 0.5) * dphi;
                dirs.push([s * phi.cos(), s * phi.sin(), *ci]);
                weights.push(wi * dphi);
            }
        }
        Ok(Self { dirs, weights })
    }

    /// Number of directions.
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    /// `true` when the rule has no directions.
    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Checks positivity, unit directions, and total weight `4π`.
    pub fn validate(&self) -> Result<()> {
        if self.dirs.len() != self.weights.len() || self.dirs.is_empty() {
            return Err(Error::InvalidParameter("sphere rule is empty or inconsistent".into()));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter("sphere rule weights must be positive".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 4.0 * PI).abs() > 1e-10 * 4.0 * PI {
            return Err(Error::InvalidParameter(format!("sphere rule weights sum to {total}, expected 4π")));
        }
        for d in &self.dirs {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter("sphere rule direction is not a unit vector".into()));
            }
        }
        Ok(())
    }
}

/// Tanh-sinh quadrature of `f` over `[a, b]`.
///
/// The integrand receives `(x, x − a, b − x)` with the two distances computed
/// without cancellation, so integrable endpoint singularities such as
/// `1/√(x − a)` can be evaluated accurately. Refinement halves the step until
/// successive estimates agree to `tol` (relative, with an absolute floor of
/// `tol·1e-300`). Non-finite samples at the extreme abscissae are skipped.
pub fn tanh_sinh<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64, f64, f64) -> f64,
{
    if b < a {
        return Err(Error::InvalidParameter("tanh-sinh requires a <= b".into()));
    }
    let half = 0.5 * (b - a);
    if half == 0.0 {
        return Ok(0.0);
    }
    let c = 0.5 * (a + b);
    let t_max = 4.5;
    let fc = f(c, half, half);
    if !fc.is_finite() {
        return Err(Error::Quadrature("non-finite integrand at interval midpoint".into()));
    }
    let mut eval = |t: f64| -> f64 {
        let u = 0.5 * PI * t.sinh();
        let cu = u.cosh();
        let w = 0.5 * PI * t.cosh() / (cu * cu);
        // δ = 1 − tanh|u| computed without cancellation.
        let delta = 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        let d = half * delta;
        if !(d > 0.0) {
            return 0.0;
        }
        let (x, da, db) = if t < 0.0 { (a + d, d, 2.0 * half - d) } else { (b - d, 2.0 * half - d, d) };
        let fx = f(x, da, db);
        if fx.is_finite() {
            w * fx
        } else {
            0.0
        }
    };
    let mut h = 1.0;
    let mut sum = 0.5 * PI * fc;
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = h * half * sum;
    for _level in 1..=14 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = h * half * sum;
        if (next - estimate).abs() <= tol * next.abs().max(1e-300) {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Quadrature(format!("tanh-sinh did not reach tolerance {tol:e}")))
}

/// Ordinary least-squares line `y ≈ slope·x + intercept`; returns `(slope, intercept, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::FitDegenerate("need at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let syy: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitDegenerate("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, intercept, r2))
}
