//! Polyharmonic kernels, monomial bases and the local saddle-point systems
//! that produce (generalized) Lagrange weights.

use crate::domain::Point;
use crate::linalg::{singular_values, DenseLu, DenseMatrix, LinalgError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("{have} trial points cannot determine {need} polynomial coefficients")]
    TooFewPoints { have: usize, need: usize },
    #[error("local saddle system is singular")]
    SingularLocalSystem,
    #[error("kernel exponent {0} is not supported (need k >= 3)")]
    InvalidExponent(u32),
    #[error("polynomial degree {degree} is below the minimum {min} for this kernel")]
    DegreeTooLow { degree: usize, min: usize },
}

/// `φ(r) = r^k` for odd `k`, `r^k log r` for even `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhsKernel {
    pub exponent: u32,
    pub has_log: bool,
    pub dim: usize,
}

impl PhsKernel {
    pub fn new(exponent: u32, dim: usize) -> Result<Self, KernelError> {
        if exponent < 3 {
            return Err(KernelError::InvalidExponent(exponent));
        }
        Ok(Self { exponent, has_log: exponent % 2 == 0, dim })
    }

    /// Order of conditional positive definiteness.
    pub fn cpd_order(&self) -> usize {
        let k = self.exponent as usize;
        if self.has_log {
            k / 2 + 1
        } else {
            k.div_ceil(2)
        }
    }

    /// Smallest admissible polynomial degree.
    pub fn min_degree(&self) -> usize {
        self.cpd_order() - 1
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let p = r.powi(self.exponent as i32);
        if self.has_log {
            p * r.ln()
        } else {
            p
        }
    }

    /// `φ'(r) / r`.
    fn g1(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let k = self.exponent as f64;
        let p = r.powi(self.exponent as i32 - 2);
        if self.has_log {
            p * (k * r.ln() + 1.0)
        } else {
            k * p
        }
    }

    /// `(1/r) d/dr (φ'(r) / r)`.
    fn g2(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let k = self.exponent as f64;
        let p = r.powi(self.exponent as i32 - 4);
        if self.has_log {
            p * ((k - 2.0) * (k * r.ln() + 1.0) + k)
        } else {
            k * (k - 2.0) * p
        }
    }

    pub fn laplacian(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let k = self.exponent as f64;
        let d = self.dim as f64;
        let p = r.powi(self.exponent as i32 - 2);
        if self.has_log {
            p * (k * (k + d - 2.0) * r.ln() + 2.0 * k + d - 2.0)
        } else {
            k * (k + d - 2.0) * p
        }
    }

    /// `(op φ)(offset)` for `φ` viewed as the function `x -> φ(‖x‖)`.
    pub fn op_eval(&self, op: &LocalOperator, x: &Point) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        match op {
            LocalOperator::Identity => self.eval(r),
            LocalOperator::Laplacian => self.laplacian(r),
            LocalOperator::NormalDeriv(nu) => self.g1(r) * (nu[0] * x[0] + nu[1] * x[1] + nu[2] * x[2]),
            LocalOperator::PartialDeriv(alpha) => {
                let order: u8 = alpha.iter().sum();
                match order {
                    0 => self.eval(r),
                    1 => {
                        let i = alpha.iter().position(|&a| a == 1).unwrap();
                        self.g1(r) * x[i]
                    }
                    2 => {
                        let mut idx = [0usize; 2];
                        let mut n = 0;
                        for (i, &a) in alpha.iter().enumerate() {
                            for _ in 0..a {
                                idx[n] = i;
                                n += 1;
                            }
                        }
                        let (i, j) = (idx[0], idx[1]);
                        let delta = if i == j { self.g1(r) } else { 0.0 };
                        delta + x[i] * x[j] * self.g2(r)
                    }
                    _ => panic!("derivatives of order above 2 are not supported"),
                }
            }
        }
    }
}

impl std::fmt::Display for PhsKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PHS{}", self.exponent)
    }
}

/// Linear differential operators of order at most two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalOperator {
    Identity,
    Laplacian,
    /// Directional derivative along a unit vector.
    NormalDeriv(Point),
    /// `D^α` with `|α| <= 2`.
    PartialDeriv([u8; 3]),
}

impl LocalOperator {
    pub fn order(&self) -> i32 {
        match self {
            Self::Identity => 0,
            Self::Laplacian => 2,
            Self::NormalDeriv(_) => 1,
            Self::PartialDeriv(a) => a.iter().map(|&v| v as i32).sum(),
        }
    }

    pub fn gradient(i: usize) -> Self {
        let mut a = [0u8; 3];
        a[i] = 1;
        Self::PartialDeriv(a)
    }
}

/// Monomials `x^α`, `|α| <= degree`, in graded lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyBasis {
    pub degree: usize,
    pub dim: usize,
    exponents: Vec<[u8; 3]>,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

impl PolyBasis {
    pub fn new(degree: usize, dim: usize) -> Self {
        let mut exponents = Vec::new();
        for t in 0..=degree {
            match dim {
                1 => exponents.push([t as u8, 0, 0]),
                2 => {
                    for a in (0..=t).rev() {
                        exponents.push([a as u8, (t - a) as u8, 0]);
                    }
                }
                3 => {
                    for a in (0..=t).rev() {
                        for b in (0..=t - a).rev() {
                            exponents.push([a as u8, b as u8, (t - a - b) as u8]);
                        }
                    }
                }
                _ => panic!("dimension {dim} not supported"),
            }
        }
        debug_assert_eq!(exponents.len(), binomial(degree + dim, dim));
        Self { degree, dim, exponents }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[[u8; 3]] {
        &self.exponents
    }

    /// `D^β x^α` at `x`.
    fn monomial_deriv(alpha: &[u8; 3], beta: &[u8; 3], x: &Point) -> f64 {
        let mut v = 1.0;
        for i in 0..3 {
            if beta[i] > alpha[i] {
                return 0.0;
            }
            let mut c = 1.0;
            for j in 0..beta[i] {
                c *= (alpha[i] - j) as f64;
            }
            v *= c * x[i].powi((alpha[i] - beta[i]) as i32);
        }
        v
    }

    /// `(op p_k)(x)` for every basis monomial.
    pub fn op_eval(&self, op: &LocalOperator, x: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.op_eval_into(op, x, &mut out);
        out
    }

    pub fn op_eval_into(&self, op: &LocalOperator, x: &Point, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.exponents) {
            *o = match op {
                LocalOperator::Identity => Self::monomial_deriv(a, &[0, 0, 0], x),
                LocalOperator::PartialDeriv(b) => Self::monomial_deriv(a, b, x),
                LocalOperator::Laplacian => (0..self.dim)
                    .map(|i| {
                        let mut b = [0u8; 3];
                        b[i] = 2;
                        Self::monomial_deriv(a, &b, x)
                    })
                    .sum(),
                LocalOperator::NormalDeriv(nu) => (0..self.dim)
                    .map(|i| {
                        let mut b = [0u8; 3];
                        b[i] = 1;
                        nu[i] * Self::monomial_deriv(a, &b, x)
                    })
                    .sum(),
            };
        }
    }
}

fn shift_scale(x: &Point, center: &Point, scale: f64) -> Point {
    [(x[0] - center[0]) / scale, (x[1] - center[1]) / scale, (x[2] - center[2]) / scale]
}

/// True iff the Vandermonde matrix of `points` (shifted by `center`, scaled by
/// `scale`) has full column rank.
pub fn unisolvency_check(points: &[Point], basis: &PolyBasis, center: &Point, scale: f64) -> bool {
    let q = basis.len();
    if points.len() < q {
        return false;
    }
    let id = LocalOperator::Identity;
    let mut p = DenseMatrix::zeros(points.len(), q);
    for (i, x) in points.iter().enumerate() {
        let row = basis.op_eval(&id, &shift_scale(x, center, scale));
        for (k, v) in row.into_iter().enumerate() {
            p[(i, k)] = v;
        }
    }
    let sv = singular_values(&p);
    let (smax, smin) = (sv[0], sv[q - 1]);
    smax > 0.0 && smin > 1e-10 * smax
}

/// The saddle matrix `[Φ P; Pᵀ 0]` of a point cloud in scaled coordinates.
pub fn saddle_matrix(scaled: &[Point], kernel: &PhsKernel, basis: &PolyBasis) -> DenseMatrix {
    let n = scaled.len();
    let q = basis.len();
    let mut a = DenseMatrix::zeros(n + q, n + q);
    for i in 0..n {
        for j in i + 1..n {
            let d = [scaled[i][0] - scaled[j][0], scaled[i][1] - scaled[j][1], scaled[i][2] - scaled[j][2]];
            let v = kernel.eval((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        let row = basis.op_eval(&LocalOperator::Identity, &scaled[i]);
        for (k, v) in row.into_iter().enumerate() {
            a[(i, n + k)] = v;
            a[(n + k, i)] = v;
        }
    }
    a
}

/// A factorized local saddle system, reusable for any operator and
/// evaluation point.
#[derive(Debug, Clone)]
pub struct LocalSystem {
    center: Point,
    scale: f64,
    kernel: PhsKernel,
    basis: PolyBasis,
    scaled: Vec<Point>,
    lu: DenseLu,
}

impl LocalSystem {
    pub fn new(
        points: &[Point],
        center: &Point,
        scale: f64,
        kernel: &PhsKernel,
        basis: &PolyBasis,
    ) -> Result<Self, KernelError> {
        if points.len() < basis.len() {
            return Err(KernelError::TooFewPoints { have: points.len(), need: basis.len() });
        }
        let scaled: Vec<Point> = points.iter().map(|x| shift_scale(x, center, scale)).collect();
        let a = saddle_matrix(&scaled, kernel, basis);
        let lu = DenseLu::factorize(a).map_err(|e| match e {
            LinalgError::Singular { .. } => KernelError::SingularLocalSystem,
            _ => KernelError::SingularLocalSystem,
        })?;
        Ok(Self { center: *center, scale, kernel: *kernel, basis: basis.clone(), scaled, lu })
    }

    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }

    fn fill_rhs(&self, op: &LocalOperator, y: &Point, out: &mut [f64]) {
        let n = self.scaled.len();
        let yh = shift_scale(y, &self.center, self.scale);
        for (o, x) in out[..n].iter_mut().zip(&self.scaled) {
            *o = self.kernel.op_eval(op, &[yh[0] - x[0], yh[1] - x[1], yh[2] - x[2]]);
        }
        self.basis.op_eval_into(op, &yh, &mut out[n..]);
    }

    /// Weights `ξ` with `Σ ξ_j u(x_j) ≈ (op u)(y)`.
    pub fn weights(&self, op: &LocalOperator, y: &Point) -> Vec<f64> {
        self.weights_batch(&[(*op, *y)]).pop().unwrap()
    }

    /// Weights for several (operator, point) requests sharing the factorization.
    pub fn weights_batch(&self, requests: &[(LocalOperator, Point)]) -> Vec<Vec<f64>> {
        let n = self.scaled.len();
        let m = n + self.basis.len();
        let k = requests.len();
        if k == 0 {
            return Vec::new();
        }
        // column-major gather, then transpose into the row-major RHS block
        let mut cols = vec![0.0; m * k];
        for (c, (op, y)) in requests.iter().enumerate() {
            self.fill_rhs(op, y, &mut cols[c * m..(c + 1) * m]);
        }
        let mut rhs = vec![0.0; m * k];
        for c in 0..k {
            for r in 0..m {
                rhs[r * k + c] = cols[c * m + r];
            }
        }
        self.lu.solve_many_in_place(&mut rhs, k);
        requests
            .iter()
            .enumerate()
            .map(|(c, (op, _))| {
                let s = self.scale.powi(-op.order());
                (0..n).map(|r| rhs[r * k + c] * s).collect()
            })
            .collect()
    }
}

/// One-shot weights for `op` at `eval_point`.
pub fn local_weights(
    trial_points: &[Point],
    center: &Point,
    scale: f64,
    kernel: &PhsKernel,
    basis: &PolyBasis,
    op: &LocalOperator,
    eval_point: &Point,
) -> Result<Vec<f64>, KernelError> {
    Ok(LocalSystem::new(trial_points, center, scale, kernel, basis)?.weights(op, eval_point))
}
