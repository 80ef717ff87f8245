//! Sparse collocation matrices for D-RBF-PU, standard RBF-PU and RBF-FD.

use std::time::Instant;

use rayon::prelude::*;

use crate::domain::{Domain, NodeKind, NodeSet, Point};
use crate::kernel::{unisolvency_check, KernelError, LocalOperator, LocalSystem, PhsKernel, PolyBasis};
use crate::linalg::SparseMatrix;
use crate::partition::{build_covering, Covering, PartitionError, SpatialIndex, WeightScheme};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("local system of patch {patch} failed: {source}")]
    Patch { patch: usize, source: KernelError },
    #[error("stencil of test point {point} failed: {source}")]
    Stencil { point: usize, source: KernelError },
    #[error("test point {point} is not covered by any patch")]
    CoverageGap { point: usize },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("the standard RBF-PU method needs smooth weights, got {0}")]
    NotDifferentiable(WeightScheme),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{test} test points but {ops} row operators")]
    LengthMismatch { test: usize, ops: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    DRbfPu,
    RbfPu,
    RbfFd,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "drbfpu" => Ok(Self::DRbfPu),
            "rbfpu" => Ok(Self::RbfPu),
            "rbffd" => Ok(Self::RbfFd),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DRbfPu => "drbfpu",
            Self::RbfPu => "rbfpu",
            Self::RbfFd => "rbffd",
        })
    }
}

/// Instrumentation gathered during assembly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AssemblyStats {
    /// Local saddle matrices factorized.
    pub local_factorizations: usize,
    /// Right-hand sides solved against those factorizations.
    pub local_rhs: usize,
    pub seconds: f64,
}

/// Row operators for a node set: `interior_op` on interior nodes, point
/// evaluation on Dirichlet nodes and the normal derivative on Neumann nodes.
pub fn row_operators(nodes: &NodeSet, interior_op: LocalOperator) -> Vec<LocalOperator> {
    nodes
        .kinds
        .iter()
        .zip(&nodes.normals)
        .map(|(k, n)| match k {
            NodeKind::Interior => interior_op,
            NodeKind::Dirichlet => LocalOperator::Identity,
            NodeKind::Neumann => LocalOperator::NormalDeriv(*n),
        })
        .collect()
}

/// Sum of per-source row contributions, merged in source order so the
/// result does not depend on thread scheduling.
fn merge(n_rows: usize, n_cols: usize, parts: Vec<Vec<(usize, Vec<(usize, f64)>)>>) -> SparseMatrix {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
    for part in parts {
        for (k, entries) in part {
            rows[k].extend(entries);
        }
    }
    SparseMatrix::from_row_entries(n_cols, rows)
}

/// Test points assigned to each patch with their PU weight.
fn patch_tasks(
    covering: &Covering,
    scheme: WeightScheme,
    test: &[Point],
) -> Result<Vec<Vec<(usize, f64)>>, AssemblyError> {
    let weights: Vec<Result<Vec<(usize, f64)>, AssemblyError>> = test
        .par_iter()
        .enumerate()
        .map(|(k, y)| covering.pu_weights(scheme, y).map_err(|_| AssemblyError::CoverageGap { point: k }))
        .collect();
    let mut tasks = vec![Vec::new(); covering.len()];
    for (k, w) in weights.into_iter().enumerate() {
        for (l, v) in w? {
            if v != 0.0 {
                tasks[l].push((k, v));
            }
        }
    }
    Ok(tasks)
}

fn local_system(
    covering: &Covering,
    l: usize,
    trial: &[Point],
    kernel: &PhsKernel,
    basis: &PolyBasis,
) -> Result<LocalSystem, AssemblyError> {
    let pts: Vec<Point> = covering.members[l].iter().map(|&j| trial[j]).collect();
    LocalSystem::new(&pts, &covering.centers[l], covering.radii[l], kernel, basis)
        .map_err(|source| AssemblyError::Patch { patch: l, source })
}

/// D-RBF-PU: row `k` is `Σ_ℓ w_ℓ(y_k) ξ(ℓ; y_k)` where `ξ` are the local
/// weights of the row operator. One factorization per patch in use.
pub fn assemble_drbfpu(
    trial: &[Point],
    test: &[Point],
    ops: &[LocalOperator],
    covering: &Covering,
    scheme: WeightScheme,
    kernel: &PhsKernel,
    basis: &PolyBasis,
) -> Result<(SparseMatrix, AssemblyStats), AssemblyError> {
    if test.len() != ops.len() {
        return Err(AssemblyError::LengthMismatch { test: test.len(), ops: ops.len() });
    }
    let start = Instant::now();
    let tasks = patch_tasks(covering, scheme, test)?;
    let parts: Vec<Result<Vec<(usize, Vec<(usize, f64)>)>, AssemblyError>> = tasks
        .par_iter()
        .enumerate()
        .map(|(l, task)| {
            if task.is_empty() {
                return Ok(Vec::new());
            }
            let sys = local_system(covering, l, trial, kernel, basis)?;
            let requests: Vec<(LocalOperator, Point)> = task.iter().map(|&(k, _)| (ops[k], test[k])).collect();
            let xi = sys.weights_batch(&requests);
            let members = &covering.members[l];
            Ok(task
                .iter()
                .zip(xi)
                .map(|(&(k, w), xi)| (k, members.iter().zip(xi).map(|(&j, v)| (j, w * v)).collect()))
                .collect())
        })
        .collect();
    let parts = parts.into_iter().collect::<Result<Vec<_>, _>>()?;
    let stats = AssemblyStats {
        local_factorizations: tasks.iter().filter(|t| !t.is_empty()).count(),
        local_rhs: tasks.iter().map(Vec::len).sum(),
        seconds: 0.0,
    };
    let a = merge(test.len(), trial.len(), parts);
    Ok((a, AssemblyStats { seconds: start.elapsed().as_secs_f64(), ..stats }))
}

/// Local operators whose weights the Leibniz expansion of `op` needs.
fn leibniz_requests(op: &LocalOperator, dim: usize) -> Vec<LocalOperator> {
    let mut out = vec![LocalOperator::Identity];
    match op {
        LocalOperator::Identity => {}
        LocalOperator::Laplacian => {
            out.extend((0..dim).map(LocalOperator::gradient));
            out.push(LocalOperator::Laplacian);
        }
        LocalOperator::NormalDeriv(_) => {
            out.extend((0..dim).map(LocalOperator::gradient));
        }
        LocalOperator::PartialDeriv(a) => {
            out.extend((0..dim).map(LocalOperator::gradient));
            if a.iter().sum::<u8>() == 2 {
                out.push(*op);
            }
        }
    }
    out
}

/// Combines local weights `[u*, ∂_1 u*, .., ∂_d u*, (second order)]` with the
/// weight derivatives according to the product rule.
fn leibniz_combine(
    op: &LocalOperator,
    dim: usize,
    w: f64,
    grad: &Point,
    hess: &[[f64; 3]; 3],
    xi: &[Vec<f64>],
) -> Vec<f64> {
    let n = xi[0].len();
    let mut row = vec![0.0; n];
    match op {
        LocalOperator::Identity => {
            for j in 0..n {
                row[j] = w * xi[0][j];
            }
        }
        LocalOperator::Laplacian => {
            let lap_w = (0..dim).map(|i| hess[i][i]).sum::<f64>();
            for j in 0..n {
                let mut v = w * xi[dim + 1][j] + lap_w * xi[0][j];
                for i in 0..dim {
                    v += 2.0 * grad[i] * xi[1 + i][j];
                }
                row[j] = v;
            }
        }
        LocalOperator::NormalDeriv(nu) => {
            let dn_w: f64 = (0..dim).map(|i| nu[i] * grad[i]).sum();
            for j in 0..n {
                let mut v = dn_w * xi[0][j];
                for i in 0..dim {
                    v += w * nu[i] * xi[1 + i][j];
                }
                row[j] = v;
            }
        }
        LocalOperator::PartialDeriv(a) => {
            let order: u8 = a.iter().sum();
            if order == 0 {
                return leibniz_combine(&LocalOperator::Identity, dim, w, grad, hess, xi);
            }
            let mut idx = Vec::new();
            for (i, &k) in a.iter().enumerate() {
                for _ in 0..k {
                    idx.push(i);
                }
            }
            if order == 1 {
                let i = idx[0];
                for j in 0..n {
                    row[j] = w * xi[1 + i][j] + grad[i] * xi[0][j];
                }
            } else {
                let (p, q) = (idx[0], idx[1]);
                for j in 0..n {
                    row[j] =
                        w * xi[dim + 1][j] + grad[p] * xi[1 + q][j] + grad[q] * xi[1 + p][j] + hess[p][q] * xi[0][j];
                }
            }
        }
    }
    row
}

/// Standard RBF-PU: rows apply the operator to `Σ_ℓ w_ℓ s_ℓ`, expanded with
/// the product rule. Requires smooth weights.
pub fn assemble_rbfpu_standard(
    trial: &[Point],
    test: &[Point],
    ops: &[LocalOperator],
    covering: &Covering,
    kernel: &PhsKernel,
    basis: &PolyBasis,
) -> Result<(SparseMatrix, AssemblyStats), AssemblyError> {
    if test.len() != ops.len() {
        return Err(AssemblyError::LengthMismatch { test: test.len(), ops: ops.len() });
    }
    let start = Instant::now();
    let dim = covering.dim;
    let derivs: Vec<_> = test
        .par_iter()
        .enumerate()
        .map(|(k, y)| covering.pu_weight_derivs_all(y).map_err(|_| AssemblyError::CoverageGap { point: k }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut tasks = vec![Vec::new(); covering.len()];
    for (k, ds) in derivs.into_iter().enumerate() {
        for d in ds {
            tasks[d.patch].push((k, d));
        }
    }
    let parts: Vec<Result<Vec<(usize, Vec<(usize, f64)>)>, AssemblyError>> = tasks
        .par_iter()
        .enumerate()
        .map(|(l, task)| {
            if task.is_empty() {
                return Ok(Vec::new());
            }
            let sys = local_system(covering, l, trial, kernel, basis)?;
            let members = &covering.members[l];
            let mut requests = Vec::new();
            let mut spans = Vec::with_capacity(task.len());
            for (k, _) in task {
                let r = leibniz_requests(&ops[*k], dim);
                spans.push((requests.len(), r.len()));
                requests.extend(r.into_iter().map(|op| (op, test[*k])));
            }
            let xi = sys.weights_batch(&requests);
            Ok(task
                .iter()
                .zip(spans)
                .map(|((k, d), (s, len))| {
                    let row = leibniz_combine(&ops[*k], dim, d.w, &d.grad, &d.hess, &xi[s..s + len]);
                    (*k, members.iter().copied().zip(row).collect())
                })
                .collect())
        })
        .collect();
    let parts = parts.into_iter().collect::<Result<Vec<_>, _>>()?;
    let stats = AssemblyStats {
        local_factorizations: tasks.iter().filter(|t| !t.is_empty()).count(),
        local_rhs: tasks.iter().map(Vec::len).sum(),
        seconds: 0.0,
    };
    let a = merge(test.len(), trial.len(), parts);
    Ok((a, AssemblyStats { seconds: start.elapsed().as_secs_f64(), ..stats }))
}

const INFLATION: f64 = 1.25;
const MAX_INFLATIONS: usize = 3;

/// Stencil radius of every test point: `δ`, times 1.5 within `δ` of the
/// boundary, inflated until the stencil is unisolvent.
pub fn rbffd_stencil_radii(
    domain: &Domain,
    trial: &[Point],
    test: &[Point],
    delta: f64,
    basis: &PolyBasis,
) -> Result<Vec<f64>, AssemblyError> {
    let index = SpatialIndex::new(trial, 1.5 * delta * INFLATION.powi(MAX_INFLATIONS as i32));
    test.par_iter()
        .enumerate()
        .map(|(k, y)| {
            let mut r = if domain.boundary_gap(y) <= delta { 1.5 * delta } else { delta };
            for attempt in 0..=MAX_INFLATIONS {
                let m = index.within(trial, y, r);
                let pts: Vec<Point> = m.iter().map(|&j| trial[j]).collect();
                if unisolvency_check(&pts, basis, y, r) {
                    return Ok(r);
                }
                if attempt < MAX_INFLATIONS {
                    r *= INFLATION;
                }
            }
            Err(AssemblyError::Stencil {
                point: k,
                source: KernelError::TooFewPoints { have: index.within(trial, y, r).len(), need: basis.len() },
            })
        })
        .collect()
}

/// RBF-FD: one stencil `X ∩ B(y_k, δ_k)` and one local solve per test point.
pub fn assemble_rbffd(
    domain: &Domain,
    trial: &[Point],
    test: &[Point],
    ops: &[LocalOperator],
    delta: f64,
    kernel: &PhsKernel,
    basis: &PolyBasis,
) -> Result<(SparseMatrix, AssemblyStats), AssemblyError> {
    if test.len() != ops.len() {
        return Err(AssemblyError::LengthMismatch { test: test.len(), ops: ops.len() });
    }
    let start = Instant::now();
    let radii = rbffd_stencil_radii(domain, trial, test, delta, basis)?;
    let index = SpatialIndex::new(trial, radii.iter().copied().fold(0.0, f64::max));
    let rows: Vec<Result<Vec<(usize, f64)>, AssemblyError>> = test
        .par_iter()
        .enumerate()
        .map(|(k, y)| {
            let m = index.within(trial, y, radii[k]);
            let pts: Vec<Point> = m.iter().map(|&j| trial[j]).collect();
            let sys = LocalSystem::new(&pts, y, radii[k], kernel, basis)
                .map_err(|source| AssemblyError::Stencil { point: k, source })?;
            let xi = sys.weights(&ops[k], y);
            Ok(m.into_iter().zip(xi).collect())
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let a = SparseMatrix::from_row_entries(trial.len(), rows);
    let stats = AssemblyStats {
        local_factorizations: test.len(),
        local_rhs: test.len(),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((a, stats))
}

/// A scalar field with first and second derivatives, possibly time dependent.
pub trait Field: Sync {
    fn value(&self, x: &Point, t: f64) -> f64;
    fn gradient(&self, x: &Point, t: f64) -> Point;
    fn hessian(&self, x: &Point, t: f64) -> [[f64; 3]; 3];

    fn laplacian(&self, x: &Point, t: f64) -> f64 {
        let h = self.hessian(x, t);
        h[0][0] + h[1][1] + h[2][2]
    }
}

/// `(op u)(x, t)`.
pub fn apply_operator(field: &dyn Field, op: &LocalOperator, x: &Point, t: f64) -> f64 {
    match op {
        LocalOperator::Identity => field.value(x, t),
        LocalOperator::Laplacian => field.laplacian(x, t),
        LocalOperator::NormalDeriv(nu) => {
            let g = field.gradient(x, t);
            nu[0] * g[0] + nu[1] * g[1] + nu[2] * g[2]
        }
        LocalOperator::PartialDeriv(a) => {
            let mut idx = Vec::new();
            for (i, &k) in a.iter().enumerate() {
                for _ in 0..k {
                    idx.push(i);
                }
            }
            match idx.len() {
                0 => field.value(x, t),
                1 => field.gradient(x, t)[idx[0]],
                2 => field.hessian(x, t)[idx[0]][idx[1]],
                _ => panic!("derivatives of order above 2 are not supported"),
            }
        }
    }
}

/// Right-hand side `b_k = (op_k u)(y_k)`: the forcing on interior rows and
/// the boundary data on boundary rows.
pub fn assemble_rhs(field: &dyn Field, test: &[Point], ops: &[LocalOperator], t: f64) -> Vec<f64> {
    test.iter().zip(ops).map(|(y, op)| apply_operator(field, op, y, t)).collect()
}

/// Discretization settings shared by all three methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub scheme: WeightScheme,
    pub kernel: PhsKernel,
    pub degree: usize,
    /// Patch-centre spacing as a multiple of the fill distance.
    pub hc_factor: f64,
    /// Overlap constant `C_c`.
    pub c_c: f64,
    /// RBF-FD stencil radius relative to the patch radius `C_c h_c`.
    pub delta_ratio: f64,
}

impl MethodConfig {
    pub fn new(method: Method, scheme: WeightScheme, kernel: PhsKernel, degree: usize) -> Self {
        Self { method, scheme, kernel, degree, hc_factor: 4.0, c_c: 1.0, delta_ratio: 1.0 }
    }

    pub fn basis(&self) -> PolyBasis {
        PolyBasis::new(self.degree, self.kernel.dim)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.degree < self.kernel.min_degree() {
            return Err(KernelError::DegreeTooLow { degree: self.degree, min: self.kernel.min_degree() });
        }
        Ok(())
    }
}

/// An assembled square collocation matrix on a node set.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub a: SparseMatrix,
    pub ops: Vec<LocalOperator>,
    pub row_kinds: Vec<NodeKind>,
    pub covering: Option<Covering>,
    pub stats: AssemblyStats,
}

impl Discretization {
    pub fn rhs(&self, field: &dyn Field, nodes: &NodeSet, t: f64) -> Vec<f64> {
        assemble_rhs(field, &nodes.points, &self.ops, t)
    }
}

/// Builds the covering (for the PU methods) and assembles `A` with test
/// points equal to trial points.
pub fn discretize(
    domain: &Domain,
    nodes: &NodeSet,
    cfg: &MethodConfig,
    interior_op: LocalOperator,
) -> Result<Discretization, AssemblyError> {
    cfg.validate()?;
    let basis = cfg.basis();
    let ops = row_operators(nodes, interior_op);
    let h_c = cfg.hc_factor * nodes.h;
    let pts = &nodes.points;
    let (a, stats, covering) = match cfg.method {
        Method::RbfFd => {
            let delta = cfg.delta_ratio * cfg.c_c * h_c;
            let (a, s) = assemble_rbffd(domain, pts, pts, &ops, delta, &cfg.kernel, &basis)?;
            (a, s, None)
        }
        Method::DRbfPu | Method::RbfPu => {
            let t0 = Instant::now();
            let cov = build_covering(domain, pts, h_c, cfg.c_c, &basis)?;
            let cover_time = t0.elapsed().as_secs_f64();
            let (a, mut s) = if cfg.method == Method::DRbfPu {
                assemble_drbfpu(pts, pts, &ops, &cov, cfg.scheme, &cfg.kernel, &basis)?
            } else {
                if cfg.scheme != WeightScheme::Smooth {
                    return Err(AssemblyError::NotDifferentiable(cfg.scheme));
                }
                assemble_rbfpu_standard(pts, pts, &ops, &cov, &cfg.kernel, &basis)?
            };
            s.seconds += cover_time;
            (a, s, Some(cov))
        }
    };
    Ok(Discretization { a, ops, row_kinds: nodes.kinds.clone(), covering, stats })
}
