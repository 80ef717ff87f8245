//! Threshold incomplete LU (ILUT) with a relative drop tolerance and no fill cap.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::sparse::{reverse_cuthill_mckee, SparseMatrix};
use super::LinalgError;

/// Anything that can approximate `A^{-1} v`.
pub trait Preconditioner {
    fn apply(&self, v: &[f64]) -> Vec<f64>;
}

/// No preconditioning.
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }
}

/// Incomplete factors `P A P^T ≈ L U`, `L` unit lower triangular.
///
/// Entries of row `i` smaller than `tau * ||A(i,:)||_2` are dropped while the
/// row is eliminated. With `tau = 0` and no reordering the factors are the
/// exact LU factors without pivoting.
#[derive(Debug, Clone)]
pub struct IluPreconditioner {
    n: usize,
    perm: Option<Vec<usize>>,
    lower: SparseMatrix,
    // diagonal stored first in every row
    upper: SparseMatrix,
    tau: f64,
}

impl IluPreconditioner {
    /// ILUT on a reverse Cuthill-McKee reordering of `a`.
    pub fn new(a: &SparseMatrix, tau: f64) -> Result<Self, LinalgError> {
        let perm = reverse_cuthill_mckee(a);
        let permuted = a.permute_symmetric(&perm);
        let mut ilu = Self::factorize(&permuted, tau)?;
        ilu.perm = Some(perm);
        Ok(ilu)
    }

    /// ILUT in the original ordering.
    pub fn new_unordered(a: &SparseMatrix, tau: f64) -> Result<Self, LinalgError> {
        Self::factorize(a, tau)
    }

    fn factorize(a: &SparseMatrix, tau: f64) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        let n = a.nrows();
        let mut work = vec![0.0; n];
        let mut present = vec![false; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();

        let mut l_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        // (row pointer into u_cols/u_vals), diagonal first
        let mut u_ptr = vec![0usize];
        let mut u_cols: Vec<usize> = Vec::new();
        let mut u_vals: Vec<f64> = Vec::new();

        for i in 0..n {
            let (cols, vals) = a.row(i);
            let row_norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            let drop = tau * row_norm;
            for (&c, &v) in cols.iter().zip(vals) {
                work[c] = v;
                present[c] = true;
                pattern.push(c);
                if c < i {
                    heap.push(Reverse(c));
                }
            }
            let mut lower = Vec::new();
            while let Some(Reverse(k)) = heap.pop() {
                let mut factor = work[k];
                if factor == 0.0 {
                    continue;
                }
                let (ks, ke) = (u_ptr[k], u_ptr[k + 1]);
                factor /= u_vals[ks];
                if factor.abs() < drop {
                    work[k] = 0.0;
                    continue;
                }
                work[k] = 0.0;
                lower.push((k, factor));
                for p in ks + 1..ke {
                    let j = u_cols[p];
                    if !present[j] {
                        present[j] = true;
                        pattern.push(j);
                        work[j] = 0.0;
                        if j < i {
                            heap.push(Reverse(j));
                        }
                    }
                    work[j] -= factor * u_vals[p];
                }
            }
            lower.sort_by_key(|&(k, _)| k);
            l_rows.push(lower);

            let mut diag = if present[i] { work[i] } else { 0.0 };
            if diag == 0.0 {
                // zero pivot: perturb so the factor stays usable
                diag = if drop > 0.0 { drop } else { return Err(LinalgError::Singular { index: i }) };
            }
            u_cols.push(i);
            u_vals.push(diag);
            let mut upper: Vec<(usize, f64)> = pattern
                .iter()
                .copied()
                .filter(|&j| j > i && work[j] != 0.0 && work[j].abs() >= drop)
                .map(|j| (j, work[j]))
                .collect();
            upper.sort_by_key(|&(j, _)| j);
            for (j, v) in upper {
                u_cols.push(j);
                u_vals.push(v);
            }
            u_ptr.push(u_cols.len());

            for &j in &pattern {
                work[j] = 0.0;
                present[j] = false;
            }
            pattern.clear();
        }

        let lower = SparseMatrix::from_row_entries(n, l_rows);
        let upper_rows = (0..n).map(|i| (u_ptr[i]..u_ptr[i + 1]).map(|p| (u_cols[p], u_vals[p])).collect()).collect();
        let upper = SparseMatrix::from_row_entries(n, upper_rows);
        Ok(Self { n, perm: None, lower, upper, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Stored entries in both factors.
    pub fn nnz(&self) -> usize {
        self.lower.nnz() + self.upper.nnz()
    }

    fn solve_factors(&self, y: &mut [f64]) {
        for i in 0..self.n {
            let (cols, vals) = self.lower.row(i);
            let s: f64 = cols.iter().zip(vals).map(|(&c, v)| v * y[c]).sum();
            y[i] -= s;
        }
        for i in (0..self.n).rev() {
            let (cols, vals) = self.upper.row(i);
            // sorted ascending, so the diagonal comes first
            let mut s = y[i];
            for (&c, v) in cols[1..].iter().zip(&vals[1..]) {
                s -= v * y[c];
            }
            y[i] = s / vals[0];
        }
    }
}

impl Preconditioner for IluPreconditioner {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.perm {
            None => {
                let mut y = v.to_vec();
                self.solve_factors(&mut y);
                y
            }
            Some(perm) => {
                let mut y: Vec<f64> = perm.iter().map(|&p| v[p]).collect();
                self.solve_factors(&mut y);
                let mut out = vec![0.0; self.n];
                for (i, &p) in perm.iter().enumerate() {
                    out[p] = y[i];
                }
                out
            }
        }
    }
}
