//! Hager-Higham 1-norm estimation and the stability estimate
//! `condest(A^T) / ||A||_inf`, which approximates `||A^{-1}||_inf`.

use super::direct::SparseLu;
use super::sparse::SparseMatrix;
use super::LinalgError;

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn signs(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x >= 0.0 { 1.0 } else { -1.0 }).collect()
}

fn argmax_abs(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, -1.0), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best }).0
}

/// Lower-bound estimate of `||B||_1` from products with `B` and `B^T`
/// (Higham's refinement of Hager's method, as in LAPACK `xLACN2`).
pub fn onenorm_estimate(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_transpose: impl Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let x = vec![1.0 / n as f64; n];
    let y = apply(&x);
    if n == 1 {
        return y[0].abs();
    }
    let mut est = norm1(&y);
    let mut xi = signs(&y);
    let mut z = apply_transpose(&xi);
    let mut j = argmax_abs(&z);

    for _ in 2..=5 {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let y = apply(&e);
        let est_old = est;
        est = norm1(&y);
        let xi_new = signs(&y);
        if xi_new == xi || est <= est_old {
            est = est.max(est_old);
            break;
        }
        xi = xi_new;
        z = apply_transpose(&xi);
        let jlast = j;
        j = argmax_abs(&z);
        if z[jlast].abs() == z[j].abs() {
            break;
        }
    }

    let alt: Vec<f64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n - 1) as f64)
        })
        .collect();
    let y = apply(&alt);
    let temp = 2.0 * norm1(&y) / (3.0 * n as f64);
    est.max(temp)
}

/// Stability estimate `condest(A^T) / ||A||_inf` using an existing factorization of `A`.
pub fn stability_estimate_with(a: &SparseMatrix, lu: &SparseLu) -> f64 {
    let n = a.nrows();
    // B = (A^T)^{-1}, B^T = A^{-1}
    let inv_norm = onenorm_estimate(n, |v| lu.solve_transpose(v), |v| lu.solve(v));
    let condest_at = a.norm_inf() * inv_norm; // ||A^T||_1 = ||A||_inf
    condest_at / a.norm_inf()
}

/// `C̃_S(A)`: estimate of `||A^{-1}||_inf` for a square sparse matrix.
pub fn cond_estimate_stability(a: &SparseMatrix) -> Result<f64, LinalgError> {
    let lu = SparseLu::factorize(a)?;
    Ok(stability_estimate_with(a, &lu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{dense_solve, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact_inverse_inf_norm(a: &SparseMatrix) -> f64 {
        let n = a.nrows();
        let d = a.to_dense();
        let mut rows = vec![0.0; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = dense_solve(&d, &e).unwrap();
            for i in 0..n {
                rows[i] += col[i].abs();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    #[test]
    fn scaled_identity() {
        let a = SparseMatrix::from_dense(&DenseMatrix::from_fn(7, 7, |i, j| if i == j { 2.0 } else { 0.0 }));
        assert!((cond_estimate_stability(&a).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn diagonal_one_ten() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 10.0)]);
        assert!((cond_estimate_stability(&a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_sparse_within_factor_three_and_below_exact() {
        for seed in 0..4 {
            let n = 300;
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut t = Vec::new();
            for i in 0..n {
                t.push((i, i, rng.random_range(0.5..2.0)));
                for _ in 0..4 {
                    t.push((i, rng.random_range(0..n), rng.random_range(-1.0..1.0)));
                }
            }
            let a = SparseMatrix::from_triplets(n, n, &t);
            let est = cond_estimate_stability(&a).unwrap();
            let exact = exact_inverse_inf_norm(&a);
            assert!(est <= exact * (1.0 + 1e-8), "est {est} exact {exact}");
            assert!(est >= exact / 3.0, "est {est} exact {exact}");
        }
    }
}
