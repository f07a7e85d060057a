//! Matrix-free Krylov solvers in a weighted inner product.
//!
//! Grid functions live in `ℓ²(W)` with `⟨f, g⟩ = Σ W_i f_i g_i`; every solver
//! here takes the weight vector explicitly so that operators self-adjoint in
//! that product (such as the discrete `L`) are handled by the symmetric
//! methods. Passing unit weights recovers the Euclidean product.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Weighted inner product `Σ w_i a_i b_i`.
pub fn dot_w(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((wi, ai), bi)| wi * ai * bi).sum()
}

/// Weighted norm `√⟨a, a⟩`.
pub fn norm_w(w: &[f64], a: &[f64]) -> f64 {
    dot_w(w, a, a).sqrt()
}

/// `y ← y + α x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct SolveStats {
    /// Matrix-vector products or iterations performed.
    pub iterations: usize,
    /// Final relative residual.
    pub relative_residual: f64,
}

/// Conjugate gradients for `A x = b` with `A` self-adjoint positive definite in `⟨·,·⟩_w`.
pub fn cg<A>(mut apply: A, w: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)>
where
    A: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm_w(w, b);
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot_w(w, &r, &r);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot_w(w, &p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence { what: "conjugate gradients (indefinite operator)".into(), iterations: it, residual: rr.sqrt() / bnorm });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot_w(w, &r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            return Ok((x, SolveStats { iterations: it, relative_residual: rel }));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(Error::NonConvergence { what: "conjugate gradients".into(), iterations: max_iter, residual: rr.sqrt() / bnorm })
}

/// Restarted GMRES for `A x = b` in the Euclidean inner product.
///
/// Modified Gram–Schmidt Arnoldi with Givens rotations; stops when the
/// relative residual falls below `tol` or `max_iter` products are spent.
pub fn gmres<A>(mut apply: A, b: &[f64], x0: Option<&[f64]>, restart: usize, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)>
where
    A: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let ones = vec![1.0; n];
    let bnorm = norm_w(&ones, b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 && x.iter().all(|&v| v == 0.0) {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let m = restart.max(1);
    let mut total = 0;
    let mut tmp = vec![0.0; n];
    let mut rel = f64::INFINITY;
    while total < max_iter {
        apply(&x, &mut tmp);
        let r: Vec<f64> = b.iter().zip(&tmp).map(|(bi, ti)| bi - ti).collect();
        let beta = norm_w(&ones, &r);
        rel = beta / scale;
        if rel <= tol {
            return Ok((x, SolveStats { iterations: total, relative_residual: rel }));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if total >= max_iter {
                break;
            }
            let mut wv = vec![0.0; n];
            apply(&v[k], &mut wv);
            total += 1;
            for (j, vj) in v.iter().enumerate() {
                let hjk = dot_w(&ones, &wv, vj);
                h[j][k] = hjk;
                axpy(-hjk, vj, &mut wv);
            }
            // One reorthogonalization pass keeps the basis orthogonal for long cycles.
            for (j, vj) in v.iter().enumerate() {
                let c = dot_w(&ones, &wv, vj);
                h[j][k] += c;
                axpy(-c, vj, &mut wv);
            }
            let hn = norm_w(&ones, &wv);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            rel = g[k + 1].abs() / scale;
            if rel <= tol || hn == 0.0 {
                break;
            }
            v.push(wv.iter().map(|wi| wi / hn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &v[j], &mut x);
        }
        if rel <= tol {
            apply(&x, &mut tmp);
            let r: f64 = b.iter().zip(&tmp).map(|(bi, ti)| (bi - ti).powi(2)).sum::<f64>().sqrt();
            let true_rel = r / scale;
            if true_rel <= 10.0 * tol {
                return Ok((x, SolveStats { iterations: total, relative_residual: true_rel }));
            }
        }
    }
    Err(Error::NonConvergence { what: "GMRES".into(), iterations: total, residual: rel })
}

/// Ritz values from a Lanczos run with full reorthogonalization.
///
/// `apply` must be self-adjoint in `⟨·,·⟩_w`; `project` maps a vector into the
/// invariant subspace of interest (for example the orthogonal complement of
/// a null space) and is applied to the start vector and to every new Krylov
/// vector. Returns the Ritz values in ascending order.
pub fn lanczos_ritz<A, P>(mut apply: A, mut project: P, w: &[f64], start: &[f64], steps: usize) -> Result<Vec<f64>>
where
    A: FnMut(&[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    let n = start.len();
    let mut q0 = start.to_vec();
    project(&mut q0);
    let nrm = norm_w(w, &q0);
    if nrm == 0.0 {
        return Err(Error::InvalidParameter("Lanczos start vector vanishes after projection".into()));
    }
    q0.iter_mut().for_each(|x| *x /= nrm);
    let mut basis = vec![q0];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut z = vec![0.0; n];
    for k in 0..steps {
        apply(&basis[k], &mut z);
        project(&mut z);
        let a = dot_w(w, &z, &basis[k]);
        alpha.push(a);
        // Full reorthogonalization, twice for stability; re-projecting keeps
        // rounding noise from re-entering the excluded subspace.
        for _ in 0..2 {
            project(&mut z);
            for q in &basis {
                let c = dot_w(w, &z, q);
                axpy(-c, q, &mut z);
            }
        }
        let b = norm_w(w, &z);
        if k + 1 == steps || b <= 1e-13 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        basis.push(z.iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 4.0 + i as f64 } else { 1.0 / (1.0 + (i + j) as f64) }).collect())
            .collect()
    }

    fn mv(a: &[Vec<f64>], x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = a[i].iter().zip(x).map(|(aij, xj)| aij * xj).sum();
        }
    }

    #[test]
    fn cg_and_gmres_agree_on_spd_system() {
        let a = spd(12);
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let w = vec![1.0; 12];
        let (x1, _) = cg(|x, y| mv(&a, x, y), &w, &b, 1e-13, 100).unwrap();
        let (x2, _) = gmres(|x, y| mv(&a, x, y), &b, None, 5, 1e-13, 200).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 10;
        let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 3.0 } else if j == i + 1 { 1.5 } else { 0.1 * ((i * j) as f64).cos() }).collect()).collect();
        let xt: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let mut b = vec![0.0; n];
        mv(&a, &xt, &mut b);
        let (x, _) = gmres(|x, y| mv(&a, x, y), &b, None, 4, 1e-12, 500).unwrap();
        for (p, q) in x.iter().zip(&xt) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn lanczos_finds_extreme_eigenvalues() {
        let n = 30;
        let diag: Vec<f64> = (0..n).map(|i| 0.5 + i as f64).collect();
        let w = vec![1.0; n];
        let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let ritz = lanczos_ritz(
            |x, y| {
                for i in 0..n {
                    y[i] = diag[i] * x[i];
                }
            },
            |_| {},
            &w,
            &start,
            30,
        )
        .unwrap();
        assert!((ritz[0] - 0.5).abs() < 1e-8);
        assert!((ritz[ritz.len() - 1] - 29.5).abs() < 1e-8);
    }
}
