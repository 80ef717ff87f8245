//! Steady Poisson and heat-equation solvers on top of the assembled
//! collocation matrices, with manufactured solutions and convergence fits.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;

use crate::assembly::{discretize, AssemblyError, Discretization, Field, MethodConfig};
use crate::domain::{generate_nodes, BcMode, Domain, DomainError, Generator, NodeKind, NodeSet, Point};
use crate::kernel::LocalOperator;
use crate::linalg::{
    eigenvalues_dense, gmres, stability_estimate_with, GmresOptions, IluPreconditioner, LinalgError, SparseLu,
    SparseMatrix,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdeError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("convergence fit needs at least 3 distinct sizes")]
    DegenerateFit,
    #[error("GMRES did not converge at step {step}: residual {residual:e} after {iterations} iterations")]
    SolverDivergence { step: usize, iterations: usize, residual: f64 },
    #[error("time step {dt} does not divide the final time {t_final}")]
    BadTimeStep { dt: f64, t_final: f64 },
}

/// One quadratic exponent `a t^2 + b t + c`.
#[derive(Debug, Clone, Copy)]
struct Quad {
    a: f64,
    b: f64,
    c: f64,
}

impl Quad {
    /// `-k (9t - m)^2`
    const fn squared(k: f64, m: f64) -> Self {
        Self { a: -81.0 * k, b: 18.0 * k * m, c: -k * m * m }
    }

    fn value(&self, t: f64) -> f64 {
        (self.a * t + self.b) * t + self.c
    }

    fn slope(&self, t: f64) -> f64 {
        2.0 * self.a * t + self.b
    }
}

const FRANKE_TERMS: [(f64, Quad, Quad); 4] = [
    (0.75, Quad::squared(0.25, 2.0), Quad::squared(0.25, 2.0)),
    (0.75, Quad::squared(1.0 / 49.0, -1.0), Quad { a: 0.0, b: -0.9, c: -0.1 }),
    (0.5, Quad::squared(0.25, 7.0), Quad::squared(0.25, 3.0)),
    (-0.2, Quad::squared(1.0, 4.0), Quad::squared(1.0, 7.0)),
];

/// Franke's test function
/// `0.75 e^{-((9x-2)^2+(9y-2)^2)/4} + 0.75 e^{-(9x+1)^2/49-(9y+1)/10}
///  + 0.5 e^{-((9x-7)^2+(9y-3)^2)/4} - 0.2 e^{-(9x-4)^2-(9y-7)^2}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Franke;

pub fn franke(x: &Point) -> f64 {
    Franke.value(x, 0.0)
}

impl Field for Franke {
    fn value(&self, x: &Point, _t: f64) -> f64 {
        FRANKE_TERMS.iter().map(|(c, qx, qy)| c * (qx.value(x[0]) + qy.value(x[1])).exp()).sum()
    }

    fn gradient(&self, x: &Point, _t: f64) -> Point {
        let mut g = [0.0; 3];
        for (c, qx, qy) in &FRANKE_TERMS {
            let e = c * (qx.value(x[0]) + qy.value(x[1])).exp();
            g[0] += e * qx.slope(x[0]);
            g[1] += e * qy.slope(x[1]);
        }
        g
    }

    fn hessian(&self, x: &Point, _t: f64) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for (c, qx, qy) in &FRANKE_TERMS {
            let e = c * (qx.value(x[0]) + qy.value(x[1])).exp();
            let (sx, sy) = (qx.slope(x[0]), qy.slope(x[1]));
            h[0][0] += e * (sx * sx + 2.0 * qx.a);
            h[1][1] += e * (sy * sy + 2.0 * qy.a);
            h[0][1] += e * sx * sy;
        }
        h[1][0] = h[0][1];
        h
    }
}

/// `u(x) = sin(π (x1 - 0.5) x3 / log(x2 + 3))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Solution3d;

pub fn solution3d(x: &Point) -> f64 {
    Solution3d.value(x, 0.0)
}

impl Solution3d {
    /// The phase `g`, its gradient and Hessian.
    fn phase(x: &Point) -> (f64, Point, [[f64; 3]; 3]) {
        let a = x[0] - 0.5;
        let s = x[1] + 3.0;
        let l = s.ln();
        let g = PI * a * x[2] / l;
        let grad = [PI * x[2] / l, -PI * a * x[2] / (l * l * s), PI * a / l];
        let mut h = [[0.0; 3]; 3];
        h[0][1] = -PI * x[2] / (l * l * s);
        h[0][2] = PI / l;
        h[1][2] = -PI * a / (l * l * s);
        h[1][1] = PI * a * x[2] * (2.0 + l) / (l.powi(3) * s * s);
        h[1][0] = h[0][1];
        h[2][0] = h[0][2];
        h[2][1] = h[1][2];
        (g, grad, h)
    }
}

impl Field for Solution3d {
    fn value(&self, x: &Point, _t: f64) -> f64 {
        Self::phase(x).0.sin()
    }

    fn gradient(&self, x: &Point, _t: f64) -> Point {
        let (g, dg, _) = Self::phase(x);
        let c = g.cos();
        [c * dg[0], c * dg[1], c * dg[2]]
    }

    fn hessian(&self, x: &Point, _t: f64) -> [[f64; 3]; 3] {
        let (g, dg, hg) = Self::phase(x);
        let (s, c) = g.sin_cos();
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = c * hg[i][j] - s * dg[i] * dg[j];
            }
        }
        h
    }
}

/// `u = 1 + sin(πx) cos(πy) [sin(πz)] e^{-πt}`, solving `u_t = κ Δu + f` with
/// `f = π (dπκ - 1) sin(πx) cos(πy) [sin(πz)] e^{-πt}`.
#[derive(Debug, Clone, Copy)]
pub struct HeatSolution {
    pub dim: usize,
    pub kappa: f64,
}

pub fn heat_manufactured(dim: usize, kappa: f64) -> HeatSolution {
    assert!(dim == 2 || dim == 3);
    HeatSolution { dim, kappa }
}

/// A time-dependent problem `u_t = κ Δu + f` with known solution `u`.
pub trait HeatProblem: Field {
    fn kappa(&self) -> f64;

    fn forcing(&self, x: &Point, t: f64) -> f64;
}

impl HeatProblem for HeatSolution {
    fn kappa(&self) -> f64 {
        self.kappa
    }

    fn forcing(&self, x: &Point, t: f64) -> f64 {
        PI * (self.dim as f64 * PI * self.kappa - 1.0) * self.spatial(x) * (-PI * t).exp()
    }
}

impl HeatSolution {
    fn factors(&self, x: &Point) -> ([f64; 3], [f64; 3]) {
        let v = [(PI * x[0]).sin(), (PI * x[1]).cos(), if self.dim == 3 { (PI * x[2]).sin() } else { 1.0 }];
        let d =
            [PI * (PI * x[0]).cos(), -PI * (PI * x[1]).sin(), if self.dim == 3 { PI * (PI * x[2]).cos() } else { 0.0 }];
        (v, d)
    }

    fn spatial(&self, x: &Point) -> f64 {
        let (v, _) = self.factors(x);
        v[0] * v[1] * v[2]
    }

    pub fn time_derivative(&self, x: &Point, t: f64) -> f64 {
        -PI * self.spatial(x) * (-PI * t).exp()
    }
}

impl Field for HeatSolution {
    fn value(&self, x: &Point, t: f64) -> f64 {
        1.0 + self.spatial(x) * (-PI * t).exp()
    }

    fn gradient(&self, x: &Point, t: f64) -> Point {
        let (v, d) = self.factors(x);
        let e = (-PI * t).exp();
        [d[0] * v[1] * v[2] * e, v[0] * d[1] * v[2] * e, v[0] * v[1] * d[2] * e]
    }

    fn hessian(&self, x: &Point, t: f64) -> [[f64; 3]; 3] {
        let (v, d) = self.factors(x);
        let e = (-PI * t).exp();
        let p2 = PI * PI;
        // second derivative of each factor is -π^2 times the factor (z factor is constant in 2D)
        let dd = [-p2 * v[0], -p2 * v[1], if self.dim == 3 { -p2 * v[2] } else { 0.0 }];
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut prod = e;
                for k in 0..3 {
                    prod *= if i == j && k == i {
                        dd[k]
                    } else if k == i || k == j {
                        d[k]
                    } else {
                        v[k]
                    };
                }
                h[i][j] = prod;
            }
        }
        h
    }
}

/// `‖a - b‖_∞ / ‖b‖_∞`.
pub fn relative_linf_error(approx: &[f64], exact: &[f64]) -> f64 {
    let num = approx.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let den = exact.iter().map(|v| v.abs()).fold(0.0, f64::max);
    num / den
}

fn linf(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Result of one steady solve.
#[derive(Debug, Clone)]
pub struct PoissonRun {
    pub n: usize,
    pub h: f64,
    pub solution: Vec<f64>,
    /// Relative nodal `ℓ∞` error.
    pub error: f64,
    /// Absolute nodal `ℓ∞` error.
    pub abs_error: f64,
    /// `‖A u_exact - b‖_∞`.
    pub residual: f64,
    /// Estimate of `‖A^{-1}‖_∞`.
    pub stability: f64,
    pub nnz_pct: f64,
    pub t_assembly: f64,
    pub t_solve: f64,
    pub local_factorizations: usize,
}

impl PoissonRun {
    /// Whether `‖u - û‖_∞ <= factor · C̃_S · ‖A u - b‖_∞`.
    pub fn chain_holds(&self, factor: f64) -> bool {
        self.abs_error <= factor * self.stability * self.residual
    }
}

/// Size above which steady systems go to GMRES instead of sparse LU.
pub const DIRECT_SOLVE_LIMIT: usize = 20_000;

/// Solves `A û = b` for the Poisson problem `Δu = f` with boundary data
/// taken from `exact`.
pub fn solve_poisson(
    domain: &Domain,
    nodes: &NodeSet,
    cfg: &MethodConfig,
    exact: &dyn Field,
) -> Result<PoissonRun, PdeError> {
    let disc = discretize(domain, nodes, cfg, LocalOperator::Laplacian)?;
    solve_assembled(nodes, &disc, exact)
}

/// Solves an already assembled steady system.
pub fn solve_assembled(nodes: &NodeSet, disc: &Discretization, exact: &dyn Field) -> Result<PoissonRun, PdeError> {
    let a = &disc.a;
    let b = disc.rhs(exact, nodes, 0.0);
    let u_ex: Vec<f64> = nodes.points.iter().map(|x| exact.value(x, 0.0)).collect();
    let t0 = Instant::now();
    let (solution, stability) = if a.nrows() <= DIRECT_SOLVE_LIMIT {
        let lu = SparseLu::factorize(a)?;
        let x = lu.solve(&b);
        let s = stability_estimate_with(a, &lu);
        (x, s)
    } else {
        let ilu = IluPreconditioner::new(a, 1e-8)?;
        let out = gmres(a, &b, &ilu, None, GmresOptions::default())?;
        if !out.converged {
            return Err(PdeError::SolverDivergence { step: 0, iterations: out.iterations, residual: out.residual });
        }
        (out.x, f64::NAN)
    };
    let t_solve = t0.elapsed().as_secs_f64();
    let au = a.matvec(&u_ex);
    let residual = au.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let diff: Vec<f64> = solution.iter().zip(&u_ex).map(|(p, q)| p - q).collect();
    Ok(PoissonRun {
        n: nodes.len(),
        h: nodes.h,
        error: relative_linf_error(&solution, &u_ex),
        abs_error: linf(&diff),
        residual,
        stability,
        nnz_pct: a.nnz_percent(),
        t_assembly: disc.stats.seconds,
        t_solve,
        local_factorizations: disc.stats.local_factorizations,
        solution,
    })
}

/// Negative slope of the least-squares line through `(log N^{1/d}, log e)`.
pub fn convergence_order(ns: &[usize], errors: &[f64], dim: usize) -> Result<f64, PdeError> {
    assert_eq!(ns.len(), errors.len());
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln() / dim as f64).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if xs.len() < 2 || sxx <= 1e-14 * (1.0 + mx * mx) {
        return Err(PdeError::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(-sxy / sxx)
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub method: String,
    pub weight: String,
    pub kernel: String,
    pub polydeg: usize,
    pub n: usize,
    pub h: f64,
    pub error: f64,
    /// Order fitted on this and all previous rows (NaN for the first row).
    pub order_running: f64,
    pub nnz_pct: f64,
    pub stability: f64,
    pub t_assembly_s: f64,
    pub t_solve_s: f64,
}

pub const RECORD_HEADER: &str =
    "method,weight,kernel,polydeg,N,h,error,order_running,nnz_pct,stability,t_assembly_s,t_solve_s";

impl ConvergenceRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.method,
            self.weight,
            self.kernel,
            self.polydeg,
            self.n,
            self.h,
            self.error,
            self.order_running,
            self.nnz_pct,
            self.stability,
            self.t_assembly_s,
            self.t_solve_s
        )
    }

    pub fn from_csv_row(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 12 {
            return None;
        }
        Some(Self {
            method: f[0].to_string(),
            weight: f[1].to_string(),
            kernel: f[2].to_string(),
            polydeg: f[3].parse().ok()?,
            n: f[4].parse().ok()?,
            h: f[5].parse().ok()?,
            error: f[6].parse().ok()?,
            order_running: f[7].parse().ok()?,
            nnz_pct: f[8].parse().ok()?,
            stability: f[9].parse().ok()?,
            t_assembly_s: f[10].parse().ok()?,
            t_solve_s: f[11].parse().ok()?,
        })
    }
}

/// Steady runs over a sequence of node counts.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub runs: Vec<PoissonRun>,
    pub records: Vec<ConvergenceRecord>,
    pub dim: usize,
}

impl ConvergenceStudy {
    pub fn order(&self) -> Result<f64, PdeError> {
        let ns: Vec<usize> = self.runs.iter().map(|r| r.n).collect();
        let es: Vec<f64> = self.runs.iter().map(|r| r.error).collect();
        convergence_order(&ns, &es, self.dim)
    }

    /// Largest over smallest stability estimate.
    pub fn stability_spread(&self) -> f64 {
        let s: Vec<f64> = self.runs.iter().map(|r| r.stability).collect();
        s.iter().copied().fold(0.0, f64::max) / s.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Every run satisfies the consistency-stability bound with `factor`.
    pub fn chain_holds(&self, factor: f64) -> bool {
        self.runs.iter().all(|r| r.chain_holds(factor))
    }
}

/// Runs `solve_poisson` for each node count in `ns`.
pub fn convergence_study(
    domain: &Domain,
    generator: Generator,
    mode: BcMode,
    cfg: &MethodConfig,
    exact: &dyn Field,
    ns: &[usize],
) -> Result<ConvergenceStudy, PdeError> {
    let mut runs: Vec<PoissonRun> = Vec::new();
    let mut records = Vec::new();
    for &n in ns {
        let nodes = generate_nodes(domain, n, generator, mode)?;
        let run = solve_poisson(domain, &nodes, cfg, exact)?;
        runs.push(run);
        let r = runs.last().unwrap();
        let order_running = if runs.len() >= 2 {
            let ns: Vec<usize> = runs.iter().map(|r| r.n).collect();
            let es: Vec<f64> = runs.iter().map(|r| r.error).collect();
            convergence_order(&ns, &es, domain.dim).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        records.push(ConvergenceRecord {
            method: cfg.method.to_string(),
            weight: cfg.scheme.to_string(),
            kernel: cfg.kernel.to_string(),
            polydeg: cfg.degree,
            n: r.n,
            h: r.h,
            error: r.error,
            order_running,
            nnz_pct: r.nnz_pct,
            stability: r.stability,
            t_assembly_s: r.t_assembly,
            t_solve_s: r.t_solve,
        });
    }
    Ok(ConvergenceStudy { runs, records, dim: domain.dim })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    Bdf1,
    Bdf4,
}

impl std::str::FromStr for TimeScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bdf1" => Ok(Self::Bdf1),
            "bdf4" => Ok(Self::Bdf4),
            _ => Err(format!("unknown time scheme `{s}`")),
        }
    }
}

impl std::fmt::Display for TimeScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bdf1 => "bdf1",
            Self::Bdf4 => "bdf4",
        })
    }
}

/// How the first BDF4 history values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bootstrap {
    /// Exact solution at the first three steps.
    #[default]
    Exact,
    /// BDF1, BDF2 and BDF3 steps.
    Ramp,
}

impl std::str::FromStr for Bootstrap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "ramp" => Ok(Self::Ramp),
            _ => Err(format!("unknown bootstrap `{s}`")),
        }
    }
}

impl std::fmt::Display for Bootstrap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Ramp => "ramp",
        })
    }
}

/// BDF coefficients: `u^{k+1} - c Δt F(u^{k+1}) = Σ_j a_j u^{k-j}`.
fn bdf_coefficients(order: usize) -> (f64, &'static [f64]) {
    match order {
        1 => (1.0, &[1.0]),
        2 => (2.0 / 3.0, &[4.0 / 3.0, -1.0 / 3.0]),
        3 => (6.0 / 11.0, &[18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0]),
        4 => (12.0 / 25.0, &[48.0 / 25.0, -36.0 / 25.0, 16.0 / 25.0, -3.0 / 25.0]),
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone)]
pub struct HeatRun {
    pub n: usize,
    pub h: f64,
    /// Relative nodal `ℓ∞` error at the final time.
    pub error: f64,
    /// Largest `|û|` over all nodes and steps.
    pub max_abs: f64,
    pub max_iterations: usize,
    pub max_residual: f64,
    pub steps: usize,
    pub solution: Vec<f64>,
}

/// Implicit time-step matrix: interior rows `I - c κ Δt A`, boundary rows `A`.
fn step_matrix(a: &SparseMatrix, kinds: &[NodeKind], scale: f64) -> SparseMatrix {
    let rows = (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            if kinds[i] == NodeKind::Interior {
                let mut r: Vec<(usize, f64)> = cols.iter().zip(vals).map(|(&c, &v)| (c, -scale * v)).collect();
                r.push((i, 1.0));
                r
            } else {
                cols.iter().copied().zip(vals.iter().copied()).collect()
            }
        })
        .collect();
    SparseMatrix::from_row_entries(a.ncols(), rows)
}

struct Stepper<'a> {
    a: &'a SparseMatrix,
    nodes: &'a NodeSet,
    disc: &'a Discretization,
    problem: &'a dyn HeatProblem,
    dt: f64,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    dirichlet_only: bool,
    systems: Vec<Option<(SparseMatrix, IluPreconditioner)>>,
    max_iterations: usize,
    max_residual: f64,
}

impl<'a> Stepper<'a> {
    fn system(&mut self, order: usize) -> Result<usize, PdeError> {
        if self.systems[order].is_none() {
            let (c, _) = bdf_coefficients(order);
            let scale = c * self.problem.kappa() * self.dt;
            let m = if self.dirichlet_only {
                let aii = self.a.submatrix(&self.interior, &self.interior);
                SparseMatrix::identity(self.interior.len()).add_scaled(1.0, &aii, -scale)
            } else {
                step_matrix(self.a, &self.disc.row_kinds, scale)
            };
            let ilu = IluPreconditioner::new(&m, 1e-8)?;
            self.systems[order] = Some((m, ilu));
        }
        Ok(order)
    }

    /// Advances from `history` (newest first) to time `t_new`.
    fn step(&mut self, history: &[Vec<f64>], order: usize, t_new: f64, step: usize) -> Result<Vec<f64>, PdeError> {
        let (c, coeffs) = bdf_coefficients(order);
        self.system(order)?;
        let n = self.nodes.len();
        let mut comb = vec![0.0; n];
        for (aj, u) in coeffs.iter().zip(history) {
            for (x, v) in comb.iter_mut().zip(u) {
                *x += aj * v;
            }
        }
        let pts = &self.nodes.points;
        let (m, ilu) = self.systems[order].as_ref().unwrap();
        if self.dirichlet_only {
            let g: Vec<f64> = self.boundary.iter().map(|&j| self.problem.value(&pts[j], t_new)).collect();
            let mut full = vec![0.0; n];
            for (&j, v) in self.boundary.iter().zip(&g) {
                full[j] = *v;
            }
            let ag = self.a.matvec(&full);
            let rhs: Vec<f64> = self
                .interior
                .iter()
                .map(|&i| comb[i] + c * self.dt * (self.problem.forcing(&pts[i], t_new) + self.problem.kappa() * ag[i]))
                .collect();
            let x0: Vec<f64> = self.interior.iter().map(|&i| history[0][i]).collect();
            let out = gmres(m, &rhs, ilu, Some(&x0), GmresOptions::default())?;
            self.record(&out, step)?;
            let mut u = full;
            for (&i, v) in self.interior.iter().zip(out.x) {
                u[i] = v;
            }
            Ok(u)
        } else {
            let rhs: Vec<f64> = (0..n)
                .map(|i| match self.disc.row_kinds[i] {
                    NodeKind::Interior => comb[i] + c * self.dt * self.problem.forcing(&pts[i], t_new),
                    _ => crate::assembly::apply_operator(self.problem, &self.disc.ops[i], &pts[i], t_new),
                })
                .collect();
            let out = gmres(m, &rhs, ilu, Some(&history[0]), GmresOptions::default())?;
            self.record(&out, step)?;
            Ok(out.x)
        }
    }

    fn record(&mut self, out: &crate::linalg::GmresOutcome, step: usize) -> Result<(), PdeError> {
        if !out.converged {
            return Err(PdeError::SolverDivergence { step, iterations: out.iterations, residual: out.residual });
        }
        self.max_iterations = self.max_iterations.max(out.iterations);
        self.max_residual = self.max_residual.max(out.residual);
        Ok(())
    }
}

/// Integrates `u_t = κ Δu + f` to `t_final` with the given BDF scheme on an
/// existing discretization (its interior operator must be the Laplacian).
pub fn run_heat_assembled(
    nodes: &NodeSet,
    disc: &Discretization,
    problem: &dyn HeatProblem,
    scheme: TimeScheme,
    dt: f64,
    t_final: f64,
    bootstrap: Bootstrap,
) -> Result<HeatRun, PdeError> {
    let steps_f = t_final / dt;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(PdeError::BadTimeStep { dt, t_final });
    }
    let interior = nodes.interior_indices();
    let boundary = nodes.boundary_indices();
    let dirichlet_only = boundary.iter().all(|&j| disc.row_kinds[j] == NodeKind::Dirichlet);
    let mut st = Stepper {
        a: &disc.a,
        nodes,
        disc,
        problem,
        dt,
        interior,
        boundary,
        dirichlet_only,
        systems: vec![None, None, None, None, None],
        max_iterations: 0,
        max_residual: 0.0,
    };
    let exact_at = |t: f64| -> Vec<f64> { nodes.points.iter().map(|x| problem.value(x, t)).collect() };
    let mut history: Vec<Vec<f64>> = vec![exact_at(0.0)];
    let mut max_abs = linf(&history[0]);
    let target = match scheme {
        TimeScheme::Bdf1 => 1,
        TimeScheme::Bdf4 => 4,
    };
    for k in 1..=steps {
        let t_new = k as f64 * dt;
        let u = if target == 4 && k < 4 && bootstrap == Bootstrap::Exact {
            exact_at(t_new)
        } else {
            let order = target.min(k);
            st.step(&history, order, t_new, k)?
        };
        max_abs = max_abs.max(linf(&u));
        history.insert(0, u);
        history.truncate(4);
    }
    let exact = exact_at(steps as f64 * dt);
    Ok(HeatRun {
        n: nodes.len(),
        h: nodes.h,
        error: relative_linf_error(&history[0], &exact),
        max_abs,
        max_iterations: st.max_iterations,
        max_residual: st.max_residual,
        steps,
        solution: history.swap_remove(0),
    })
}

/// Assembles the Laplacian on `nodes` and integrates the heat problem.
pub fn run_heat(
    domain: &Domain,
    nodes: &NodeSet,
    cfg: &MethodConfig,
    problem: &dyn HeatProblem,
    scheme: TimeScheme,
    dt: f64,
    t_final: f64,
    bootstrap: Bootstrap,
) -> Result<HeatRun, PdeError> {
    let disc = discretize(domain, nodes, cfg, LocalOperator::Laplacian)?;
    run_heat_assembled(nodes, &disc, problem, scheme, dt, t_final, bootstrap)
}

/// Eigenvalues of the interior block `A_ΩΩ` of the discrete Laplacian and
/// the largest real part among them.
pub fn spectrum_study(domain: &Domain, nodes: &NodeSet, cfg: &MethodConfig) -> Result<(Vec<Complex64>, f64), PdeError> {
    let disc = discretize(domain, nodes, cfg, LocalOperator::Laplacian)?;
    spectrum_of(&disc.a, nodes)
}

pub fn spectrum_of(a: &SparseMatrix, nodes: &NodeSet) -> Result<(Vec<Complex64>, f64), PdeError> {
    let interior = nodes.interior_indices();
    let aii = a.submatrix(&interior, &interior);
    let eig = eigenvalues_dense(&aii)?;
    let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok((eig, max_re))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn franke_at_origin() {
        let e = |v: f64| v.exp();
        let expected =
            0.75 * e(-2.0) + 0.75 * e(-1.0 / 49.0 - 0.1) + 0.5 * e(-(49.0 + 9.0) / 4.0) - 0.2 * e(-16.0 - 49.0);
        assert!((franke(&[0.0; 3]) - expected).abs() < 1e-15);
    }

    #[test]
    fn solution3d_examples() {
        assert_eq!(solution3d(&[0.5, 0.3, 0.9]), 0.0);
        let t: f64 = 0.7;
        let direct = (PI * 0.5 * t / 3f64.ln()).sin();
        assert!((solution3d(&[1.0, 0.0, t]) - direct).abs() < 1e-15);
    }

    #[test]
    fn heat_values() {
        let p = heat_manufactured(2, 1.0);
        assert!((p.value(&[0.5, 0.0, 0.0], 0.0) - 2.0).abs() < 1e-15);
        assert!((p.value(&[0.3, 0.2, 0.0], 50.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_fit_examples() {
        let ns = [1000, 2000, 4000, 8000];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-1.0)).collect();
        assert!((convergence_order(&ns, &errs, 2).unwrap() - 2.0).abs() < 1e-10);
        assert!(matches!(convergence_order(&[5, 5, 5], &[1.0, 2.0, 3.0], 2), Err(PdeError::DegenerateFit)));
    }
}
