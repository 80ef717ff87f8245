//! Dense spectra and extreme singular values for desk-scale matrices.

use faer::Mat;
use num_complex::Complex64;

use super::sparse::SparseMatrix;
use super::LinalgError;

pub const MAX_EIGEN_DIM: usize = 3000;
pub const MAX_SVD_DIM: usize = 2000;

fn densify(a: &SparseMatrix) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            m[(i, c)] = v;
        }
    }
    m
}

/// All eigenvalues of the densified matrix (Hessenberg reduction followed by
/// shifted QR), in no particular order.
pub fn eigenvalues_dense(a: &SparseMatrix) -> Result<Vec<Complex64>, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if a.nrows() > MAX_EIGEN_DIM {
        return Err(LinalgError::TooLarge { dim: a.nrows(), max: MAX_EIGEN_DIM });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let ev = densify(a).eigenvalues().map_err(|_| LinalgError::NonConvergence)?;
    Ok(ev.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// Smallest singular value; `1 / σ_min` is the 2-norm stability constant.
pub fn min_singular_value(a: &SparseMatrix) -> Result<f64, LinalgError> {
    if a.nrows().max(a.ncols()) > MAX_SVD_DIM {
        return Err(LinalgError::TooLarge { dim: a.nrows().max(a.ncols()), max: MAX_SVD_DIM });
    }
    let sv = densify(a).singular_values().map_err(|_| LinalgError::NonConvergence)?;
    Ok(sv.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<f64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        v.into_iter().map(|z| z.re).collect()
    }

    #[test]
    fn diagonal_spectrum() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]);
        let ev = eigenvalues_dense(&a).unwrap();
        assert!(ev.iter().all(|z| z.im.abs() < 1e-14));
        let re = sorted_re(ev);
        for (k, r) in re.iter().enumerate() {
            assert!((r - (k as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_generator_has_imaginary_pair() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, -1.0)]);
        let mut ev = eigenvalues_dense(&a).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn tridiagonal_toeplitz_closed_form() {
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, -2.0));
            if i + 1 < n {
                t.push((i, i + 1, 1.0));
                t.push((i + 1, i, 1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let re = sorted_re(eigenvalues_dense(&a).unwrap());
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| {
                let s = (k as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
                -4.0 * s * s
            })
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (p, q) in re.iter().zip(&expected) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn trace_and_determinant_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 6;
        let d = crate::linalg::dense::DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = SparseMatrix::from_dense(&d);
        let ev = eigenvalues_dense(&a).unwrap();
        let trace: f64 = (0..n).map(|i| d[(i, i)]).sum();
        let sum: Complex64 = ev.iter().sum();
        let fro = d.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((sum.re - trace).abs() < 1e-8 * fro && sum.im.abs() < 1e-8 * fro);
        let prod: Complex64 = ev.iter().product();
        let det = {
            let lu = crate::linalg::dense::DenseLu::factorize(d.clone()).unwrap();
            let r = lu.reconstruct();
            let _ = r;
            // determinant via Gaussian elimination without the packed API
            let mut m = d.clone();
            let mut det = 1.0;
            for k in 0..n {
                let p = (k..n).max_by(|&i, &j| m[(i, k)].abs().partial_cmp(&m[(j, k)].abs()).unwrap()).unwrap();
                if p != k {
                    for j in 0..n {
                        let t = m[(k, j)];
                        m[(k, j)] = m[(p, j)];
                        m[(p, j)] = t;
                    }
                    det = -det;
                }
                det *= m[(k, k)];
                for i in k + 1..n {
                    let f = m[(i, k)] / m[(k, k)];
                    for j in k..n {
                        m[(i, j)] -= f * m[(k, j)];
                    }
                }
            }
            det
        };
        assert!((prod.re - det).abs() < 1e-8 * det.abs().max(1.0) && prod.im.abs() < 1e-8);
    }

    #[test]
    fn singular_values_of_simple_matrices() {
        assert!((min_singular_value(&SparseMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-14);
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 3.0), (1, 1, 0.5)]);
        assert!((min_singular_value(&a).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn min_singular_value_squared_is_min_eigenvalue_of_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 40;
        let d =
            crate::linalg::dense::DenseMatrix::from_fn(
                n,
                n,
                |i, j| {
                    if i == j {
                        3.0
                    } else {
                        rng.random_range(-0.3..0.3)
                    }
                },
            );
        let a = SparseMatrix::from_dense(&d);
        let smin = min_singular_value(&a).unwrap();
        let gram = SparseMatrix::from_dense(&d.transpose().matmul(&d));
        let lmin = eigenvalues_dense(&gram).unwrap().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        assert!((smin * smin - lmin).abs() < 1e-8);
    }
}
