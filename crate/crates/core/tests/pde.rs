use drbfpu::assembly::{discretize, Field, Method, MethodConfig};
use drbfpu::domain::{generate_nodes, BcMode, Domain, DomainKind, Generator, NodeSet, Point};
use drbfpu::kernel::{LocalOperator, PhsKernel};
use drbfpu::linalg::{eigenvalues_dense, SparseMatrix};
use drbfpu::partition::WeightScheme;
use drbfpu::pde::{
    convergence_order, convergence_study, franke, heat_manufactured, run_heat_assembled, solve_assembled,
    solve_poisson, spectrum_of, Bootstrap, ConvergenceRecord, Franke, HeatProblem, PdeError, Solution3d, TimeScheme,
    RECORD_HEADER,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fd_laplacian(f: &dyn Fn(&Point) -> f64, x: &Point, dim: usize, e: f64) -> f64 {
    (0..dim)
        .map(|i| {
            let mut a = *x;
            let mut b = *x;
            a[i] += e;
            b[i] -= e;
            (f(&a) - 2.0 * f(x) + f(&b)) / (e * e)
        })
        .sum()
}

fn fd_gradient(f: &dyn Fn(&Point) -> f64, x: &Point, dim: usize, e: f64) -> Point {
    let mut g = [0.0; 3];
    for (i, gi) in g.iter_mut().enumerate().take(dim) {
        let mut a = *x;
        let mut b = *x;
        a[i] += e;
        b[i] -= e;
        *gi = (f(&a) - f(&b)) / (2.0 * e);
    }
    g
}

fn cfg(method: Method, scheme: WeightScheme, k: u32, dim: usize, degree: usize) -> MethodConfig {
    MethodConfig::new(method, scheme, PhsKernel::new(k, dim).unwrap(), degree)
}

#[test]
fn franke_laplacian_matches_finite_differences() {
    let x = [0.4, 0.4, 0.0];
    let fd = fd_laplacian(&|y| franke(y), &x, 2, 1e-4);
    assert!((Franke.laplacian(&x, 0.0) - fd).abs() < 1e-4);
    let g = Franke.gradient(&x, 0.0);
    let gfd = fd_gradient(&|y| franke(y), &x, 2, 1e-6);
    assert!((g[0] - gfd[0]).abs() < 1e-7 && (g[1] - gfd[1]).abs() < 1e-7);
    assert_eq!(franke(&x).to_bits(), franke(&x).to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn franke_derivatives_match_finite_differences(x in prop::array::uniform2(0.0f64..1.0)) {
        let x = [x[0], x[1], 0.0];
        let f = |y: &Point| franke(y);
        let lap = Franke.laplacian(&x, 0.0);
        prop_assert!((lap - fd_laplacian(&f, &x, 2, 1e-4)).abs() < 1e-4 * (1.0 + lap.abs()));
        let h = Franke.hessian(&x, 0.0);
        let e = 1e-5;
        let gx = |dy: f64| Franke.gradient(&[x[0], x[1] + dy, 0.0], 0.0)[0];
        prop_assert!((h[0][1] - (gx(e) - gx(-e)) / (2.0 * e)).abs() < 1e-5 * (1.0 + h[0][1].abs()));
    }

    #[test]
    fn solution3d_derivatives_match_finite_differences(x in prop::array::uniform3(-1.0f64..1.0)) {
        let f = |y: &Point| drbfpu::pde::solution3d(y);
        let lap = Solution3d.laplacian(&x, 0.0);
        prop_assert!((lap - fd_laplacian(&f, &x, 3, 1e-4)).abs() < 1e-4 * (1.0 + lap.abs()));
        let g = Solution3d.gradient(&x, 0.0);
        let gfd = fd_gradient(&f, &x, 3, 1e-6);
        for i in 0..3 {
            prop_assert!((g[i] - gfd[i]).abs() < 1e-7);
        }
        let h = Solution3d.hessian(&x, 0.0);
        let e = 1e-5;
        for i in 0..3 {
            let mut a = x;
            let mut b = x;
            a[i] += e;
            b[i] -= e;
            let (ga, gb) = (Solution3d.gradient(&a, 0.0), Solution3d.gradient(&b, 0.0));
            for j in 0..3 {
                prop_assert!((h[i][j] - (ga[j] - gb[j]) / (2.0 * e)).abs() < 1e-6 * (1.0 + h[i][j].abs()));
            }
        }
    }

    #[test]
    fn heat_solution_satisfies_the_equation(
        x in prop::array::uniform3(-1.0f64..1.0),
        t in 0.0f64..2.0,
        kappa in 0.1f64..3.0,
        three_d in any::<bool>(),
    ) {
        let dim = if three_d { 3 } else { 2 };
        let p = heat_manufactured(dim, kappa);
        let mut x = x;
        if dim == 2 {
            x[2] = 0.0;
        }
        let e = 1e-6;
        let ut = (p.value(&x, t + e) - p.value(&x, t - e)) / (2.0 * e);
        prop_assert!((ut - p.time_derivative(&x, t)).abs() < 1e-8);
        let residual = p.time_derivative(&x, t) - kappa * p.laplacian(&x, t) - p.forcing(&x, t);
        prop_assert!(residual.abs() < 1e-10);
        let f = |y: &Point| p.value(y, t);
        prop_assert!((p.laplacian(&x, t) - fd_laplacian(&f, &x, dim, 1e-4)).abs() < 1e-4);
    }

    #[test]
    fn record_csv_round_trips(
        n in 1usize..1_000_000,
        vals in prop::array::uniform7(prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), Just(f64::NAN)]),
        degree in 0usize..9,
    ) {
        let r = ConvergenceRecord {
            method: "drbfpu".into(),
            weight: "hybrid".into(),
            kernel: "PHS6".into(),
            polydeg: degree,
            n,
            h: vals[0],
            error: vals[1],
            order_running: vals[2],
            nnz_pct: vals[3],
            stability: vals[4],
            t_assembly_s: vals[5],
            t_solve_s: vals[6],
        };
        let back = ConvergenceRecord::from_csv_row(&r.to_csv_row()).unwrap();
        let bits = |r: &ConvergenceRecord| {
            [r.h, r.error, r.order_running, r.nnz_pct, r.stability, r.t_assembly_s, r.t_solve_s].map(f64::to_bits)
        };
        prop_assert_eq!(bits(&back), bits(&r));
        prop_assert_eq!((back.method, back.weight, back.kernel, back.polydeg, back.n), (r.method, r.weight, r.kernel, r.polydeg, r.n));
    }
}

#[test]
fn heat_solution_decays_to_one() {
    let p = heat_manufactured(3, 1.0);
    assert!((p.value(&[0.5, 0.0, 0.5], 0.0) - 2.0).abs() < 1e-15);
    assert!((p.value(&[0.2, 0.7, 0.1], 40.0) - 1.0).abs() < 1e-15);
}

#[test]
fn record_header_matches_fields() {
    assert_eq!(RECORD_HEADER.split(',').count(), 12);
    assert!(ConvergenceRecord::from_csv_row("a,b,c").is_none());
}

#[test]
fn noisy_power_law_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ns = [500, 1000, 2000, 4000, 8000, 16000];
    let errs: Vec<f64> =
        ns.iter().map(|&n| 2.0 * (n as f64).powf(-3.5 / 2.0) * (1.0 + 0.01 * rng.random_range(-1.0..1.0))).collect();
    let order = convergence_order(&ns, &errs, 2).unwrap();
    assert!((order - 3.5).abs() < 0.1, "{order}");
    let exact: Vec<f64> = ns.iter().map(|&n| 5.0 * (n as f64).powf(-2.0 / 3.0)).collect();
    assert!((convergence_order(&ns, &exact, 3).unwrap() - 2.0).abs() < 1e-10);
}

/// Classical five-point Dirichlet Laplacian on an `m × m` interior grid.
fn five_point(m: usize) -> SparseMatrix {
    let h = 1.0 / (m + 1) as f64;
    let s = 1.0 / (h * h);
    let idx = |i: usize, j: usize| i * m + j;
    let mut rows = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let mut r = vec![(idx(i, j), -4.0 * s)];
            if i > 0 {
                r.push((idx(i - 1, j), s));
            }
            if i + 1 < m {
                r.push((idx(i + 1, j), s));
            }
            if j > 0 {
                r.push((idx(i, j - 1), s));
            }
            if j + 1 < m {
                r.push((idx(i, j + 1), s));
            }
            rows.push(r);
        }
    }
    SparseMatrix::from_row_entries(m * m, rows)
}

#[test]
fn five_point_laplacian_spectrum_is_real_and_negative() {
    let m = 12;
    let h = 1.0 / (m + 1) as f64;
    let eig = eigenvalues_dense(&five_point(m)).unwrap();
    let mut expected: Vec<f64> = (1..=m)
        .flat_map(|i| (1..=m).map(move |j| (i, j)))
        .map(|(i, j)| {
            let s = |k: usize| (k as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2);
            -4.0 / (h * h) * (s(i) + s(j))
        })
        .collect();
    let mut got: Vec<f64> = eig.iter().map(|z| z.re).collect();
    assert!(eig.iter().all(|z| z.im.abs() < 1e-8 && z.re < 0.0));
    expected.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-8 * b.abs());
    }
}

fn permuted(nodes: &NodeSet, perm: &[usize]) -> NodeSet {
    NodeSet {
        dim: nodes.dim,
        points: perm.iter().map(|&i| nodes.points[i]).collect(),
        kinds: perm.iter().map(|&i| nodes.kinds[i]).collect(),
        normals: perm.iter().map(|&i| nodes.normals[i]).collect(),
        h: nodes.h,
    }
}

#[test]
fn spectrum_is_invariant_under_node_reordering() {
    let domain = Domain::new(DomainKind::Disk2D);
    let nodes = generate_nodes(&domain, 400, Generator::Halton, BcMode::Dirichlet).unwrap();
    let c = cfg(Method::DRbfPu, WeightScheme::Smooth, 6, 2, 3);
    let mut perm: Vec<usize> = (0..nodes.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let shuffled = permuted(&nodes, &perm);
    let a1 = discretize(&domain, &nodes, &c, LocalOperator::Laplacian).unwrap().a;
    let a2 = discretize(&domain, &shuffled, &c, LocalOperator::Laplacian).unwrap().a;
    let (e1, m1) = spectrum_of(&a1, &nodes).unwrap();
    let (e2, m2) = spectrum_of(&a2, &shuffled).unwrap();
    assert!(m1 < 0.0 && m2 < 0.0);
    let radius = e1.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let key = |z: &num_complex::Complex64| (z.re, z.im);
    let mut s1: Vec<_> = e1.iter().map(key).collect();
    let mut s2: Vec<_> = e2.iter().map(key).collect();
    s1.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in s1.iter().zip(&s2) {
        assert!((a.0 - b.0).abs() < 1e-8 * radius && (a.1.abs() - b.1.abs()).abs() < 1e-8 * radius);
    }
}

/// `Σ c_a x^a`, cubic in 2D.
struct Cubic;

impl Field for Cubic {
    fn value(&self, x: &Point, _t: f64) -> f64 {
        1.0 - 2.0 * x[0] + x[1] * x[1] + 0.5 * x[0] * x[0] * x[1] - x[1].powi(3)
    }

    fn gradient(&self, x: &Point, _t: f64) -> Point {
        [-2.0 + x[0] * x[1], 2.0 * x[1] + 0.5 * x[0] * x[0] - 3.0 * x[1] * x[1], 0.0]
    }

    fn hessian(&self, x: &Point, _t: f64) -> [[f64; 3]; 3] {
        [[x[1], x[0], 0.0], [x[0], 2.0 - 6.0 * x[1], 0.0], [0.0; 3]]
    }
}

#[test]
fn poisson_reproduces_polynomials_for_every_method() {
    let domain = Domain::new(DomainKind::Star2D);
    let nodes = generate_nodes(&domain, 1500, Generator::Hammersley, BcMode::Mixed).unwrap();
    for (method, scheme) in [
        (Method::DRbfPu, WeightScheme::Smooth),
        (Method::DRbfPu, WeightScheme::ConstGen1),
        (Method::DRbfPu, WeightScheme::ConstGen2),
        (Method::DRbfPu, WeightScheme::Hybrid),
        (Method::RbfPu, WeightScheme::Smooth),
        (Method::RbfFd, WeightScheme::Smooth),
    ] {
        let run = solve_poisson(&domain, &nodes, &cfg(method, scheme, 6, 2, 3), &Cubic).unwrap();
        assert!(run.error <= 1e-7, "{method}/{scheme}: {}", run.error);
        assert!(run.chain_holds(20.0));
    }
}

#[test]
fn poisson_runs_are_deterministic() {
    let domain = Domain::new(DomainKind::Ball3D);
    let c = cfg(Method::DRbfPu, WeightScheme::Hybrid, 5, 3, 2);
    let nodes = generate_nodes(&domain, 1200, Generator::Halton, BcMode::Mixed).unwrap();
    let a = solve_poisson(&domain, &nodes, &c, &Solution3d).unwrap();
    let b = solve_poisson(&domain, &nodes, &c, &Solution3d).unwrap();
    assert_eq!(a.error.to_bits(), b.error.to_bits());
    assert_eq!(a.stability.to_bits(), b.stability.to_bits());
    assert!(a.solution.iter().zip(&b.solution).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn convergence_study_records_are_consistent() {
    let domain = Domain::new(DomainKind::Box2D);
    let c = cfg(Method::DRbfPu, WeightScheme::Smooth, 8, 2, 4);
    let study = convergence_study(&domain, Generator::Halton, BcMode::Mixed, &c, &Franke, &[500, 1000, 2000]).unwrap();
    assert_eq!(study.records.len(), 3);
    assert!(study.records[0].order_running.is_nan());
    assert!(study.records.windows(2).all(|w| w[0].n < w[1].n && w[1].error < w[0].error));
    assert_eq!(study.records[2].order_running, study.order().unwrap());
    assert_eq!(study.records[0].method, "drbfpu");
    assert_eq!(study.records[0].kernel, "PHS8");
    assert!(study.chain_holds(20.0));
}

struct Constant;

impl Field for Constant {
    fn value(&self, _x: &Point, _t: f64) -> f64 {
        1.0
    }

    fn gradient(&self, _x: &Point, _t: f64) -> Point {
        [0.0; 3]
    }

    fn hessian(&self, _x: &Point, _t: f64) -> [[f64; 3]; 3] {
        [[0.0; 3]; 3]
    }
}

impl HeatProblem for Constant {
    fn kappa(&self) -> f64 {
        1.0
    }

    fn forcing(&self, _x: &Point, _t: f64) -> f64 {
        0.0
    }
}

/// Time-independent `u = Franke` with `f = -κ Δu`.
struct Stationary;

impl Field for Stationary {
    fn value(&self, x: &Point, t: f64) -> f64 {
        Franke.value(x, t)
    }

    fn gradient(&self, x: &Point, t: f64) -> Point {
        Franke.gradient(x, t)
    }

    fn hessian(&self, x: &Point, t: f64) -> [[f64; 3]; 3] {
        Franke.hessian(x, t)
    }
}

impl HeatProblem for Stationary {
    fn kappa(&self) -> f64 {
        0.5
    }

    fn forcing(&self, x: &Point, t: f64) -> f64 {
        -0.5 * Franke.laplacian(x, t)
    }
}

#[test]
fn constant_state_is_preserved() {
    let domain = Domain::new(DomainKind::Disk2D);
    let c = cfg(Method::DRbfPu, WeightScheme::Hybrid, 6, 2, 3);
    for mode in [BcMode::Dirichlet, BcMode::Mixed] {
        let nodes = generate_nodes(&domain, 600, Generator::Halton, mode).unwrap();
        let disc = discretize(&domain, &nodes, &c, LocalOperator::Laplacian).unwrap();
        for (scheme, bootstrap) in [
            (TimeScheme::Bdf1, Bootstrap::Exact),
            (TimeScheme::Bdf4, Bootstrap::Exact),
            (TimeScheme::Bdf4, Bootstrap::Ramp),
        ] {
            let run = run_heat_assembled(&nodes, &disc, &Constant, scheme, 0.005, 0.05, bootstrap).unwrap();
            assert_eq!(run.steps, 10);
            assert!(run.error < 1e-12, "{mode:?} {scheme:?}: {}", run.error);
        }
    }
}

#[test]
fn stationary_solution_is_a_fixed_point() {
    let domain = Domain::new(DomainKind::Disk2D);
    let c = cfg(Method::DRbfPu, WeightScheme::Smooth, 6, 2, 3);
    let nodes = generate_nodes(&domain, 1000, Generator::Halton, BcMode::Dirichlet).unwrap();
    let disc = discretize(&domain, &nodes, &c, LocalOperator::Laplacian).unwrap();
    let steady = solve_assembled(&nodes, &disc, &Stationary).unwrap().error;
    for scheme in [TimeScheme::Bdf1, TimeScheme::Bdf4] {
        let e1 = run_heat_assembled(&nodes, &disc, &Stationary, scheme, 0.05, 4.0, Bootstrap::Exact).unwrap().error;
        let e2 = run_heat_assembled(&nodes, &disc, &Stationary, scheme, 0.1, 4.0, Bootstrap::Exact).unwrap().error;
        assert!((e1 - steady).abs() < 1e-3 * steady, "{scheme:?}: {e1} vs {steady}");
        assert!((e2 - steady).abs() < 1e-3 * steady, "{scheme:?}: {e2} vs {steady}");
    }
}

#[test]
fn fourth_order_stepping_beats_first_order() {
    let domain = Domain::new(DomainKind::Disk2D);
    let c = cfg(Method::DRbfPu, WeightScheme::Smooth, 6, 2, 3);
    let nodes = generate_nodes(&domain, 1000, Generator::Halton, BcMode::Dirichlet).unwrap();
    let disc = discretize(&domain, &nodes, &c, LocalOperator::Laplacian).unwrap();
    let p = heat_manufactured(2, 1.0);
    let e1 = run_heat_assembled(&nodes, &disc, &p, TimeScheme::Bdf1, 0.005, 0.2, Bootstrap::Exact).unwrap();
    let e4 = run_heat_assembled(&nodes, &disc, &p, TimeScheme::Bdf4, 0.005, 0.2, Bootstrap::Exact).unwrap();
    let e4r = run_heat_assembled(&nodes, &disc, &p, TimeScheme::Bdf4, 0.005, 0.2, Bootstrap::Ramp).unwrap();
    assert!(e4.error <= e1.error, "{} vs {}", e4.error, e1.error);
    assert!(e4r.error <= e1.error);
    assert!(e1.max_iterations <= 10 && e4.max_iterations <= 10);
}

#[test]
fn time_step_must_divide_final_time() {
    let domain = Domain::new(DomainKind::Disk2D);
    let c = cfg(Method::DRbfPu, WeightScheme::Smooth, 6, 2, 3);
    let nodes = generate_nodes(&domain, 300, Generator::Halton, BcMode::Dirichlet).unwrap();
    let disc = discretize(&domain, &nodes, &c, LocalOperator::Laplacian).unwrap();
    let err = run_heat_assembled(&nodes, &disc, &Constant, TimeScheme::Bdf1, 0.03, 0.1, Bootstrap::Exact).unwrap_err();
    assert!(matches!(err, PdeError::BadTimeStep { .. }));
}
