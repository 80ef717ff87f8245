//! Right-preconditioned GMRES without restarts.

use super::ilu::Preconditioner;
use super::sparse::SparseMatrix;
use super::LinalgError;

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Target relative residual `||b - Ax|| / ||b||`.
    pub tol: f64,
    /// Maximum Krylov dimension; there is no restart.
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual recomputed from `b - A x` after the solve.
    pub residual: f64,
    pub converged: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn true_residual(a: &SparseMatrix, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    norm2(&r) / bnorm
}

/// Solves `Ax = b` starting from `x0` (zero when `None`).
pub fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    precond: &dyn Preconditioner,
    x0: Option<&[f64]>,
    opts: GmresOptions,
) -> Result<GmresOutcome, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare { rows: n, cols: a.ncols() });
    }
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: b.len() });
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(GmresOutcome { x: vec![0.0; n], iterations: 0, residual: 0.0, converged: true });
    }
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let ax = a.matvec(&x);
    let r0: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let beta = norm2(&r0);
    if beta / bnorm <= opts.tol {
        return Ok(GmresOutcome { x, iterations: 0, residual: beta / bnorm, converged: true });
    }

    let m = opts.max_iter.max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(r0.iter().map(|v| v / beta).collect());
    // column-major Hessenberg, column j has j + 2 entries
    let mut hess: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut cs: Vec<f64> = Vec::with_capacity(m);
    let mut sn: Vec<f64> = Vec::with_capacity(m);
    let mut g = vec![0.0; m + 1];
    g[0] = beta;

    let form_solution = |hess: &[Vec<f64>], g: &[f64], basis: &[Vec<f64>], k: usize, x: &[f64]| {
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[j][i] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut z = vec![0.0; n];
        for (yi, v) in y.iter().zip(basis) {
            for (zz, vv) in z.iter_mut().zip(v) {
                *zz += yi * vv;
            }
        }
        let mz = precond.apply(&z);
        x.iter().zip(&mz).map(|(a, b)| a + b).collect::<Vec<f64>>()
    };

    for j in 0..m {
        let z = precond.apply(&basis[j]);
        let mut w = a.matvec(&z);
        let mut h = vec![0.0; j + 2];
        // modified Gram-Schmidt
        for (i, v) in basis.iter().enumerate() {
            let hij: f64 = w.iter().zip(v).map(|(p, q)| p * q).sum();
            h[i] = hij;
            for (ww, vv) in w.iter_mut().zip(v) {
                *ww -= hij * vv;
            }
        }
        let hnext = norm2(&w);
        h[j + 1] = hnext;
        for i in 0..j {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let denom = (h[j] * h[j] + h[j + 1] * h[j + 1]).sqrt();
        if denom == 0.0 {
            return Err(LinalgError::Breakdown { iteration: j + 1 });
        }
        let (c, s) = (h[j] / denom, h[j + 1] / denom);
        cs.push(c);
        sn.push(s);
        h[j] = denom;
        h[j + 1] = 0.0;
        g[j + 1] = -s * g[j];
        g[j] *= c;
        hess.push(h);

        let estimate = g[j + 1].abs() / bnorm;
        let happy = hnext <= 1e-14 * beta;
        if estimate <= opts.tol || happy || j + 1 == m {
            let candidate = form_solution(&hess, &g, &basis, j + 1, &x);
            let residual = true_residual(a, &candidate, b, bnorm);
            if residual <= opts.tol || j + 1 == m || happy {
                if happy && residual > opts.tol.max(1e-8) {
                    return Err(LinalgError::Breakdown { iteration: j + 1 });
                }
                let converged = residual <= opts.tol;
                x = candidate;
                return Ok(GmresOutcome { x, iterations: j + 1, residual, converged });
            }
        }
        basis.push(w.into_iter().map(|v| v / hnext).collect());
    }
    unreachable!("loop returns at the final iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::dense_solve;
    use crate::linalg::ilu::{IdentityPreconditioner, IluPreconditioner};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = SparseMatrix::identity(10);
        let b: Vec<f64> = (0..10).map(|i| i as f64 - 3.0).collect();
        let out = gmres(&a, &b, &IdentityPreconditioner, None, GmresOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        for (p, q) in out.x.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_dense_solution_on_random_system() {
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 6.0));
            for _ in 0..6 {
                t.push((i, rng.random_range(0..n), rng.random_range(-1.0..1.0)));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ilu = IluPreconditioner::new(&a, 1e-2).unwrap();
        let out = gmres(&a, &b, &ilu, None, GmresOptions { tol: 1e-12, max_iter: 200 }).unwrap();
        assert!(out.converged);
        assert!(out.residual <= 1e-12);
        let exact = dense_solve(&a.to_dense(), &b).unwrap();
        for (p, q) in out.x.iter().zip(&exact) {
            assert!((p - q).abs() < 1e-9);
        }
        // recomputed residual confirms the reported one
        let r: Vec<f64> = a.matvec(&out.x).iter().zip(&b).map(|(p, q)| q - p).collect();
        let rel = norm2(&r) / norm2(&b);
        assert!((rel - out.residual).abs() <= 1e-15 + 1e-6 * rel);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let n = 50;
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0 + i as f64)).collect();
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b = vec![1.0; n];
        let out = gmres(&a, &b, &IdentityPreconditioner, None, GmresOptions { tol: 1e-14, max_iter: 3 }).unwrap();
        assert_eq!(out.iterations, 3);
        assert!(!out.converged);
    }
}
