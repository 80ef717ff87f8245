//! Small dense kernels: partial-pivoting LU for local saddle systems and a
//! one-sided Jacobi SVD used for rank checks.

use super::LinalgError;

/// Relative pivot size below which a matrix is treated as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factors `PA = LU` with unit lower triangle.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factorizes a square matrix with partial pivoting. A pivot smaller than
    /// `PIVOT_TOLERANCE` times the largest entry of the input is rejected.
    pub fn factorize(a: DenseMatrix) -> Result<Self, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::NotSquare { rows: a.rows, cols: a.cols });
        }
        let n = a.rows;
        let threshold = PIVOT_TOLERANCE * a.max_abs();
        let mut lu = a.data;
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[i * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > threshold) {
                return Err(LinalgError::Singular { index: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n + k + 1..k * n + n];
            for row in tail.chunks_exact_mut(n) {
                let factor = row[k] / pivot;
                row[k] = factor;
                if factor != 0.0 {
                    for (r, u) in row[k + 1..].iter_mut().zip(pivot_row) {
                        *r -= factor * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_many_in_place(&mut x, 1);
        x
    }

    /// Solves for `nrhs` right-hand sides stored row-major as an `n x nrhs` block.
    pub fn solve_many_in_place(&self, rhs: &mut [f64], nrhs: usize) {
        let n = self.n;
        assert_eq!(rhs.len(), n * nrhs);
        let mut permuted = vec![0.0; n * nrhs];
        for (i, &p) in self.perm.iter().enumerate() {
            permuted[i * nrhs..(i + 1) * nrhs].copy_from_slice(&rhs[p * nrhs..(p + 1) * nrhs]);
        }
        // forward: unit lower triangle
        for i in 1..n {
            let (done, rest) = permuted.split_at_mut(i * nrhs);
            let row_i = &mut rest[..nrhs];
            for k in 0..i {
                let l = self.lu[i * n + k];
                if l != 0.0 {
                    let row_k = &done[k * nrhs..(k + 1) * nrhs];
                    for (x, y) in row_i.iter_mut().zip(row_k) {
                        *x -= l * y;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            let (head, rest) = permuted.split_at_mut((i + 1) * nrhs);
            let row_i = &mut head[i * nrhs..];
            for k in i + 1..n {
                let u = self.lu[i * n + k];
                if u != 0.0 {
                    let row_k = &rest[(k - i - 1) * nrhs..(k - i) * nrhs];
                    for (x, y) in row_i.iter_mut().zip(row_k) {
                        *x -= u * y;
                    }
                }
            }
            let d = self.lu[i * n + i];
            row_i.iter_mut().for_each(|x| *x /= d);
        }
        rhs.copy_from_slice(&permuted);
    }

    /// Reassembles `P^T L U`, i.e. the original matrix.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    let l = if k == i { 1.0 } else { self.lu[i * n + k] };
                    s += l * self.lu[k * n + j];
                }
                out[(self.perm[i], j)] = s;
            }
        }
        out
    }
}

/// Solves `Ax = b` by partial-pivoting LU.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::DimensionMismatch { expected: a.rows, found: b.len() });
    }
    Ok(DenseLu::factorize(a.clone())?.solve(b))
}

/// Singular values (descending) of a tall or square matrix by one-sided
/// Jacobi rotations. Intended for matrices with a few dozen columns.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    // Work on columns of A (or of A^T when A is wide).
    let (m, n, mut cols) = if a.rows >= a.cols {
        let t = a.transpose();
        (a.rows, a.cols, t.data)
    } else {
        (a.cols, a.rows, a.data.clone())
    };
    // cols holds n vectors of length m
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    let x = cols[p * m + k];
                    let y = cols[q * m + k];
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let x = cols[p * m + k];
                    let y = cols[q * m + k];
                    cols[p * m + k] = c * x - s * y;
                    cols[q * m + k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|j| cols[j * m..(j + 1) * m].iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        let x = dense_solve(&DenseMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_two_by_two() {
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0, 0.0, 0.0, 4.0]);
        let x = dense_solve(&a, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_shifted_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let b_mat = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut a = b_mat.transpose().matmul(&b_mat);
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = dense_solve(&a, &b).unwrap();
        let r = a.matvec(&x);
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * nb, "residual {res}");
    }

    #[test]
    fn reconstruction_matches_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseMatrix::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
        let lu = DenseLu::factorize(a.clone()).unwrap();
        let r = lu.reconstruct();
        for i in 0..12 {
            for j in 0..12 {
                assert!((r[(i, j)] - a[(i, j)]).abs() < 1e-12 * a.max_abs());
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(DenseLu::factorize(a), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn many_rhs_agree_with_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 9;
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let lu = DenseLu::factorize(a).unwrap();
        let block: Vec<f64> = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut solved = block.clone();
        lu.solve_many_in_place(&mut solved, 3);
        for c in 0..3 {
            let col: Vec<f64> = (0..n).map(|i| block[i * 3 + c]).collect();
            let x = lu.solve(&col);
            for i in 0..n {
                assert!((x[i] - solved[i * 3 + c]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_singular_values_of_diagonal() {
        let a = DenseMatrix::from_row_major(3, 2, vec![3.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
        let sv = singular_values(&a);
        assert!((sv[0] - 3.0).abs() < 1e-14 && (sv[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn jacobi_detects_rank_deficiency() {
        // columns 1, t, 2t -> rank 2
        let a = DenseMatrix::from_fn(5, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64,
        });
        let sv = singular_values(&a);
        assert!(sv[2] < 1e-12 * sv[0]);
    }
}
