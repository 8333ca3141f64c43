//! Krylov solvers: Jacobi-preconditioned CG and restarted GMRES.

use super::sparse::{dot, norm2, SparseMat};
use super::SolveError;

fn jacobi(a: &SparseMat) -> Vec<f64> {
    a.diagonal().into_iter().map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }).collect()
}

/// Returns the solution, iteration count and relative residual history.
pub fn conjugate_gradient(
    a: &SparseMat,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, Vec<f64>), SolveError> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, vec![0.0]));
    }
    let dinv = jacobi(a);
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = vec![1.0];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolveError::NotPositiveDefinite {
                detail: format!("p^T A p = {pap:e} at iteration {it}"),
                residual_history: history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok((x, it, history));
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::Stagnation { iterations: max_iter, residual_history: history })
}

/// Right-preconditioned restarted GMRES with a Jacobi preconditioner
/// (zero diagonal entries are left unscaled).
pub fn gmres(
    a: &SparseMat,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, Vec<f64>), SolveError> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, vec![0.0]));
    }
    let dinv = jacobi(a);
    let m = restart.max(1).min(n.max(1));
    let mut history = vec![1.0];
    let mut total = 0;
    let mut w = vec![0.0; n];
    while total < max_iter {
        let mut r = a.mul_vec(&x);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm2(&r);
        if beta / bnorm <= tol {
            return Ok((x, total, history));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let zk: Vec<f64> = v[k].iter().zip(&dinv).map(|(a, d)| a * d).collect();
            a.mul_vec_into(&zk, &mut w);
            for j in 0..=k {
                h[j][k] = dot(&w, &v[j]);
                for i in 0..n {
                    w[i] -= h[j][k] * v[j][i];
                }
            }
            // second pass for orthogonality
            for j in 0..=k {
                let c = dot(&w, &v[j]);
                h[j][k] += c;
                for i in 0..n {
                    w[i] -= c * v[j][i];
                }
            }
            let wnorm = norm2(&w);
            h[k + 1][k] = wnorm;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                return Err(SolveError::Stagnation { iterations: total, residual_history: history });
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            let rel = g[k + 1].abs() / bnorm;
            history.push(rel);
            if rel <= 0.5 * tol || total >= max_iter || wnorm == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / wnorm).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * v[j][i] * dinv[i];
            }
        }
    }
    let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, b)| b - ax).collect();
    if norm2(&r) / bnorm <= tol {
        return Ok((x, total, history));
    }
    Err(SolveError::Stagnation { iterations: total, residual_history: history })
}
