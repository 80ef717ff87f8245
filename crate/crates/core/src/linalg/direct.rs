//! Sparse direct factorization of global collocation matrices.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use super::sparse::SparseMatrix;
use super::LinalgError;

/// Sparse LU factors of a square matrix, able to solve with `A` and `A^T`.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish_non_exhaustive()
    }
}

pub(crate) fn to_faer(a: &SparseMatrix) -> SparseColMat<usize, f64> {
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            triplets.push(Triplet::new(i, c, v));
        }
    }
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &triplets).expect("CSR arrays are valid by construction")
}

impl SparseLu {
    pub fn factorize(a: &SparseMatrix) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        let lu = to_faer(a).sp_lu().map_err(|_| LinalgError::Singular { index: 0 })?;
        let this = Self { n: a.nrows(), lu };
        // faer does not report tiny pivots; catch non-finite solutions instead.
        let probe = this.solve(&vec![1.0; this.n]);
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Singular { index: 0 });
        }
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve_transpose(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_both_orientations() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 3.0), (2, 0, 1.0), (2, 2, 4.0)]);
        let lu = SparseLu::factorize(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        let ax = a.matvec(&x);
        let xt = lu.solve_transpose(&b);
        let atx = a.transpose().matvec(&xt);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-14);
            assert!((atx[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn structurally_singular_is_an_error() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(SparseLu::factorize(&a).is_err());
    }
}
