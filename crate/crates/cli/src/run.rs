//! Command-line surface and the experiment drivers behind each subcommand.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use drbfpu::assembly::{discretize, Discretization, Field, Method};
use drbfpu::domain::{generate_nodes, NodeKind, NodeSet};
use drbfpu::kernel::LocalOperator;
use drbfpu::linalg::SparseMatrix;
use drbfpu::partition::{build_covering, WeightScheme};
use drbfpu::pde::{
    convergence_order, heat_manufactured, run_heat_assembled, solve_assembled, spectrum_of, ConvergenceRecord, Franke,
    Solution3d, RECORD_HEADER,
};
use serde_json::{json, Value};

use crate::config::{ConfigError, ConfigOverrides, Experiment, ExperimentConfig};
use crate::plot::{render, Series, Style};

#[derive(Debug, Parser)]
#[command(name = "drbfpu", version, about = "Meshfree PDE experiments with polyharmonic partition-of-unity methods")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady Poisson convergence study over the node counts in `--n`.
    Converge(CommonArgs),
    /// Heat-equation convergence study.
    Heat(CommonArgs),
    /// Eigenvalues of the interior block of the discrete Laplacian.
    Spectrum(CommonArgs),
    /// Matrix density for each PU weight in `--weights`.
    Sparsity(CommonArgs),
    /// Assembly and solve wall-clock times for every method.
    Timing(CommonArgs),
    /// Writes node sets and patch coverings as CSV.
    DumpNodes(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file (or a previous run manifest); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

impl Command {
    pub fn split(&self) -> (Experiment, &CommonArgs) {
        match self {
            Self::Converge(a) => (Experiment::Converge, a),
            Self::Heat(a) => (Experiment::Heat, a),
            Self::Spectrum(a) => (Experiment::Spectrum, a),
            Self::Sparsity(a) => (Experiment::Sparsity, a),
            Self::Timing(a) => (Experiment::Timing, a),
            Self::DumpNodes(a) => (Experiment::DumpNodes, a),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure during {stage}: {message}")]
    Numerical { stage: &'static str, message: String },
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl RunError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures, 1 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical { .. } => 3,
            Self::Io { .. } => 1,
        }
    }
}

fn numerical<E: Display>(stage: &'static str) -> impl Fn(E) -> RunError {
    move |e| RunError::Numerical { stage, message: e.to_string() }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// What an experiment produced, before it is written to disk.
struct Outcome {
    header: String,
    rows: Vec<String>,
    plot: String,
    results: Value,
    matrix: Option<SparseMatrix>,
    extra_files: Vec<(String, Vec<u8>)>,
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Resolves the configuration for `command` and runs it.
pub fn execute(command: &Command) -> Result<RunSummary, RunError> {
    let (experiment, args) = command.split();
    let base = match &args.config {
        Some(path) => ConfigOverrides::from_file(path)?,
        None => ConfigOverrides::default(),
    };
    let cfg = ExperimentConfig::resolve(experiment, &base.merge(&args.overrides))?;
    run_experiment(&cfg)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| ConfigError::Field { field: "threads", message: e.to_string() })?;
    let outcome = pool.install(|| match cfg.experiment {
        Experiment::Converge => converge(cfg),
        Experiment::Heat => heat(cfg),
        Experiment::Spectrum => spectrum(cfg),
        Experiment::Sparsity => sparsity(cfg),
        Experiment::Timing => timing(cfg),
        Experiment::DumpNodes => dump_nodes(cfg),
    })?;
    write_outputs(cfg, outcome)
}

fn write_outputs(cfg: &ExperimentConfig, outcome: Outcome) -> Result<RunSummary, RunError> {
    let dir = &cfg.output;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    let put = |files: &mut Vec<PathBuf>, name: &str, bytes: &[u8]| -> Result<(), RunError> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        files.push(path);
        Ok(())
    };
    let mut csv = outcome.header.clone();
    csv.push('\n');
    for r in &outcome.rows {
        csv.push_str(r);
        csv.push('\n');
    }
    put(&mut files, "results.csv", csv.as_bytes())?;
    put(&mut files, "plot.svg", outcome.plot.as_bytes())?;
    for (name, bytes) in &outcome.extra_files {
        put(&mut files, name, bytes)?;
    }
    if let Some(a) = &outcome.matrix {
        let path = dir.join("matrix.mtx");
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        a.write_matrix_market(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
        files.push(path);
    }
    let names: Vec<String> =
        files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    let manifest = json!({
        "tool": "drbfpu",
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "results": outcome.results,
        "files": names,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    put(&mut files, "manifest.json", text.as_bytes())?;
    Ok(RunSummary { output: dir.clone(), files })
}

fn exact_field(dim: usize) -> &'static dyn Field {
    if dim == 2 {
        &Franke
    } else {
        &Solution3d
    }
}

fn nodes_for(cfg: &ExperimentConfig, n: usize) -> Result<NodeSet, RunError> {
    generate_nodes(&cfg.parsed.domain, n, cfg.parsed.generator, cfg.parsed.bc).map_err(numerical("node generation"))
}

fn assemble(
    cfg: &ExperimentConfig,
    nodes: &NodeSet,
    method: Method,
    weight: WeightScheme,
) -> Result<Discretization, RunError> {
    let mc = cfg.method_config(method, weight);
    discretize(&cfg.parsed.domain, nodes, &mc, LocalOperator::Laplacian).map_err(numerical("assembly"))
}

fn resolution(n: usize, dim: usize) -> f64 {
    (n as f64).powf(1.0 / dim as f64)
}

fn order_label(name: &str, ns: &[usize], errors: &[f64], dim: usize) -> (String, f64) {
    match convergence_order(ns, errors, dim) {
        Ok(p) => (format!("{name} (order {p:.2})"), p),
        Err(_) => (name.to_string(), f64::NAN),
    }
}

fn record_json(r: &ConvergenceRecord) -> Value {
    json!({
        "method": r.method, "weight": r.weight, "kernel": r.kernel, "polydeg": r.polydeg, "N": r.n, "h": r.h,
        "error": r.error, "order_running": r.order_running, "nnz_pct": r.nnz_pct, "stability": r.stability,
        "t_assembly_s": r.t_assembly_s, "t_solve_s": r.t_solve_s,
    })
}

fn running_order(records: &[ConvergenceRecord], dim: usize) -> f64 {
    if records.len() < 2 {
        return f64::NAN;
    }
    let ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    let es: Vec<f64> = records.iter().map(|r| r.error).collect();
    convergence_order(&ns, &es, dim).unwrap_or(f64::NAN)
}

fn study_outcome(
    cfg: &ExperimentConfig,
    title: &str,
    records: Vec<ConvergenceRecord>,
    extra: Value,
    with_stability: bool,
    matrix: Option<SparseMatrix>,
) -> Outcome {
    let dim = cfg.parsed.domain.dim;
    let ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    let es: Vec<f64> = records.iter().map(|r| r.error).collect();
    let (label, order) = order_label("relative error", &ns, &es, dim);
    let mut series = vec![Series::new(label, records.iter().map(|r| (resolution(r.n, dim), r.error)).collect())];
    if with_stability {
        series.push(Series::new("stability", records.iter().map(|r| (resolution(r.n, dim), r.stability)).collect()));
    }
    let plot = render(title, &format!("N^(1/{dim})"), "error / stability", &series, Style::LogLog);
    Outcome {
        header: RECORD_HEADER.to_string(),
        rows: records.iter().map(ConvergenceRecord::to_csv_row).collect(),
        plot,
        results: json!({
            "order": order,
            "records": records.iter().map(record_json).collect::<Vec<_>>(),
            "details": extra,
        }),
        matrix,
        extra_files: Vec::new(),
    }
}

fn converge(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let dim = cfg.parsed.domain.dim;
    let exact = exact_field(dim);
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let mut details = Vec::new();
    let mut matrix = None;
    for &n in &cfg.n {
        let nodes = nodes_for(cfg, n)?;
        let disc = assemble(cfg, &nodes, cfg.parsed.method, cfg.parsed.weight)?;
        let run = solve_assembled(&nodes, &disc, exact).map_err(numerical("solve"))?;
        eprintln!("converge N={} error={:.3e} stability={:.3e}", run.n, run.error, run.stability);
        records.push(ConvergenceRecord {
            method: cfg.method.clone(),
            weight: cfg.weight.clone(),
            kernel: cfg.kernel.clone(),
            polydeg: cfg.polydeg,
            n: run.n,
            h: run.h,
            error: run.error,
            order_running: f64::NAN,
            nnz_pct: run.nnz_pct,
            stability: run.stability,
            t_assembly_s: run.t_assembly,
            t_solve_s: run.t_solve,
        });
        let order = running_order(&records, dim);
        records.last_mut().unwrap().order_running = order;
        details.push(json!({
            "N": run.n, "abs_error": run.abs_error, "residual": run.residual,
            "local_factorizations": run.local_factorizations,
        }));
        if cfg.write_matrix {
            matrix = Some(disc.a);
        }
    }
    Ok(study_outcome(cfg, "Poisson convergence", records, Value::Array(details), true, matrix))
}

fn heat(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let dim = cfg.parsed.domain.dim;
    let problem = heat_manufactured(dim, cfg.kappa);
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let mut details = Vec::new();
    let mut matrix = None;
    for &n in &cfg.n {
        let nodes = nodes_for(cfg, n)?;
        let disc = assemble(cfg, &nodes, cfg.parsed.method, cfg.parsed.weight)?;
        let t0 = Instant::now();
        let run = run_heat_assembled(
            &nodes,
            &disc,
            &problem,
            cfg.parsed.time_scheme,
            cfg.dt,
            cfg.t_final,
            cfg.parsed.bootstrap,
        )
        .map_err(numerical("time integration"))?;
        let t_solve = t0.elapsed().as_secs_f64();
        eprintln!("heat N={} error={:.3e} max|u|={:.3}", run.n, run.error, run.max_abs);
        records.push(ConvergenceRecord {
            method: cfg.method.clone(),
            weight: cfg.weight.clone(),
            kernel: cfg.kernel.clone(),
            polydeg: cfg.polydeg,
            n: run.n,
            h: run.h,
            error: run.error,
            order_running: f64::NAN,
            nnz_pct: disc.a.nnz_percent(),
            stability: f64::NAN,
            t_assembly_s: disc.stats.seconds,
            t_solve_s: t_solve,
        });
        let order = running_order(&records, dim);
        records.last_mut().unwrap().order_running = order;
        details.push(json!({
            "N": run.n, "steps": run.steps, "max_abs": run.max_abs,
            "max_gmres_iterations": run.max_iterations, "max_gmres_residual": run.max_residual,
        }));
        if cfg.write_matrix {
            matrix = Some(disc.a);
        }
    }
    Ok(study_outcome(cfg, "Heat equation convergence", records, Value::Array(details), false, matrix))
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut summary = Vec::new();
    let mut matrix = None;
    for &n in &cfg.n {
        let nodes = nodes_for(cfg, n)?;
        let disc = assemble(cfg, &nodes, cfg.parsed.method, cfg.parsed.weight)?;
        let (eig, max_re) = spectrum_of(&disc.a, &nodes).map_err(numerical("eigenvalue computation"))?;
        eprintln!("spectrum N={} max Re={max_re:.4e}", nodes.len());
        for z in &eig {
            rows.push(format!("{},{:e},{:e}", nodes.len(), z.re, z.im));
        }
        series.push(Series::new(format!("N={}", nodes.len()), eig.iter().map(|z| (z.re, z.im)).collect()));
        summary.push(json!({ "N": nodes.len(), "eigenvalues": eig.len(), "max_re": max_re }));
        if cfg.write_matrix {
            matrix = Some(disc.a);
        }
    }
    Ok(Outcome {
        header: "N,re,im".to_string(),
        rows,
        plot: render("Spectrum of the interior block", "Re", "Im", &series, Style::Scatter),
        results: Value::Array(summary),
        matrix,
        extra_files: Vec::new(),
    })
}

fn sparsity(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let dim = cfg.parsed.domain.dim;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut summary = Vec::new();
    let mut matrix = None;
    let node_sets = cfg.n.iter().map(|&n| nodes_for(cfg, n)).collect::<Result<Vec<_>, _>>()?;
    for &w in &cfg.parsed.weights {
        let mut pts = Vec::new();
        for nodes in &node_sets {
            let disc = assemble(cfg, nodes, Method::DRbfPu, w)?;
            let a = &disc.a;
            let patches = disc.covering.as_ref().map_or(0, |c| c.len());
            rows.push(format!(
                "{},{},{},{},{:e},{},{}",
                Method::DRbfPu,
                w,
                nodes.len(),
                a.nnz(),
                a.nnz_percent(),
                disc.stats.local_factorizations,
                patches
            ));
            eprintln!("sparsity {w} N={} nnz={:.3}%", nodes.len(), a.nnz_percent());
            pts.push((resolution(nodes.len(), dim), a.nnz_percent()));
            summary.push(json!({
                "weight": w.to_string(), "N": nodes.len(), "nnz": a.nnz(), "nnz_pct": a.nnz_percent(),
                "local_factorizations": disc.stats.local_factorizations, "patches": patches,
            }));
            if cfg.write_matrix {
                matrix = Some(disc.a);
            }
        }
        series.push(Series::new(w.to_string(), pts));
    }
    Ok(Outcome {
        header: "method,weight,N,nnz,nnz_pct,local_factorizations,patches".to_string(),
        rows,
        plot: render("Matrix density", &format!("N^(1/{dim})"), "nonzeros (%)", &series, Style::LogLog),
        results: Value::Array(summary),
        matrix,
        extra_files: Vec::new(),
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn same_matrix(a: &SparseMatrix, b: &SparseMatrix) -> bool {
    a.row_ptr() == b.row_ptr() && a.col_idx() == b.col_idx() && same_bits(a.values(), b.values())
}

/// Three significant digits.
fn sig3(v: f64) -> String {
    format!("{v:.2e}")
}

fn timing(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let dim = cfg.parsed.domain.dim;
    let exact = exact_field(dim);
    let methods = [
        (Method::DRbfPu, cfg.parsed.weight),
        (Method::RbfPu, WeightScheme::Smooth),
        (Method::RbfFd, WeightScheme::Smooth),
    ];
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut series: Vec<Series> = methods.iter().map(|(m, w)| Series::new(format!("{m} ({w})"), Vec::new())).collect();
    for &n in &cfg.n {
        let nodes = nodes_for(cfg, n)?;
        for (k, &(method, weight)) in methods.iter().enumerate() {
            let mut ta = Vec::new();
            let mut ts = Vec::new();
            let mut reference: Option<(SparseMatrix, Vec<f64>)> = None;
            let mut local_solves = 0;
            for _ in 0..cfg.repetitions {
                let t0 = Instant::now();
                let disc = assemble(cfg, &nodes, method, weight)?;
                ta.push(t0.elapsed().as_secs_f64());
                let run = solve_assembled(&nodes, &disc, exact).map_err(numerical("solve"))?;
                ts.push(run.t_solve);
                local_solves = disc.stats.local_factorizations;
                match &reference {
                    None => reference = Some((disc.a, run.solution)),
                    Some((a, u)) => {
                        if !same_matrix(a, &disc.a) || !same_bits(u, &run.solution) {
                            return Err(RunError::Numerical {
                                stage: "determinism check",
                                message: format!("{method} results differ between repetitions at N={n}"),
                            });
                        }
                    }
                }
            }
            let tot: Vec<f64> = ta.iter().zip(&ts).map(|(a, b)| a + b).collect();
            let (a, s, t) = (median(&mut ta), median(&mut ts), median(&mut tot.clone()));
            eprintln!("timing {method} N={} assembly={a:.3}s solve={s:.3}s", nodes.len());
            rows.push(format!("{method},{},{},{},{}", nodes.len(), sig3(a), sig3(s), sig3(t)));
            series[k].points.push((nodes.len() as f64, t));
            summary.push(json!({
                "method": method.to_string(), "weight": weight.to_string(), "N": nodes.len(),
                "t_assembly": a, "t_solve": s, "t_total": t, "repetitions": cfg.repetitions,
                "local_factorizations": local_solves,
            }));
        }
    }
    Ok(Outcome {
        header: "method,N,t_assembly,t_solve,t_total".to_string(),
        rows,
        plot: render("Wall-clock time (median)", "N", "seconds", &series, Style::LogLog),
        results: Value::Array(summary),
        matrix: None,
        extra_files: Vec::new(),
    })
}

fn dump_nodes(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let domain = &cfg.parsed.domain;
    let basis = cfg.method_config(cfg.parsed.method, cfg.parsed.weight).basis();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut extra_files = Vec::new();
    let mut last = None;
    for &n in &cfg.n {
        let nodes = nodes_for(cfg, n)?;
        let cov = build_covering(domain, &nodes.points, cfg.hc_factor * nodes.h, cfg.cc, &basis)
            .map_err(numerical("patch covering"))?;
        let mut node_csv = Vec::new();
        nodes.write_csv(&mut node_csv).expect("writing to memory");
        let mut cov_csv = Vec::new();
        cov.write_csv(&mut cov_csv).expect("writing to memory");
        extra_files.push((format!("nodes_{}.csv", nodes.len()), node_csv));
        extra_files.push((format!("covering_{}.csv", nodes.len()), cov_csv));
        let nb = nodes.len() - nodes.n_interior();
        rows.push(format!("{},{},{},{:e},{}", nodes.len(), nodes.n_interior(), nb, nodes.h, cov.len()));
        summary.push(json!({
            "N": nodes.len(), "interior": nodes.n_interior(), "boundary": nb, "h": nodes.h, "patches": cov.len(),
        }));
        last = Some(nodes);
    }
    let nodes = last.expect("at least one node count");
    let pick = |kind: NodeKind| -> Vec<(f64, f64)> {
        nodes.points.iter().zip(&nodes.kinds).filter(|(_, k)| **k == kind).map(|(p, _)| (p[0], p[1])).collect()
    };
    let series = [
        Series::new("interior", pick(NodeKind::Interior)),
        Series::new("Dirichlet", pick(NodeKind::Dirichlet)),
        Series::new("Neumann", pick(NodeKind::Neumann)),
    ];
    Ok(Outcome {
        header: "N,n_interior,n_boundary,h,patches".to_string(),
        rows,
        plot: render(&format!("Nodes, N={}", nodes.len()), "x1", "x2", &series, Style::Scatter),
        results: Value::Array(summary),
        matrix: None,
        extra_files,
    })
}
