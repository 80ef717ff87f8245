//! Experiment configuration: a JSON document merged with command-line
//! overrides, then resolved into a fully specified [`ExperimentConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use drbfpu::assembly::{Method, MethodConfig};
use drbfpu::domain::{BcMode, Domain, DomainKind, Generator};
use drbfpu::kernel::PhsKernel;
use drbfpu::partition::WeightScheme;
use drbfpu::pde::{Bootstrap, TimeScheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Converge,
    Heat,
    Spectrum,
    Sparsity,
    Timing,
    DumpNodes,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converge => "converge",
            Self::Heat => "heat",
            Self::Spectrum => "spectrum",
            Self::Sparsity => "sparsity",
            Self::Timing => "timing",
            Self::DumpNodes => "dump-nodes",
        })
    }
}

/// A configuration problem, reported with exit status 2.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("invalid config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field_err(field: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Field { field, message: message.to_string() }
}

/// Every field is optional so that a config file and command-line flags
/// can each supply a subset.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigOverrides {
    /// Domain: box, disk, star, ball or quasi.
    #[arg(long)]
    pub domain: Option<String>,
    /// Point generator: halton, hammersley or grid.
    #[arg(long)]
    pub generator: Option<String>,
    /// Method: drbfpu, rbfpu or rbffd.
    #[arg(long)]
    pub method: Option<String>,
    /// PU weight: smooth, const1, const2 or hybrid.
    #[arg(long)]
    pub weight: Option<String>,
    /// Weights compared by the sparsity experiment.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<String>>,
    /// Polyharmonic kernel, e.g. PHS6 (even exponents carry the log factor).
    #[arg(long)]
    pub kernel: Option<String>,
    /// Degree of the appended polynomial space.
    #[arg(long)]
    pub polydeg: Option<usize>,
    /// Total node counts, ascending.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Patch spacing h_c as a multiple of the fill distance.
    #[arg(long)]
    pub hc_factor: Option<f64>,
    /// Overlap constant C_c.
    #[arg(long)]
    pub cc: Option<f64>,
    /// RBF-FD stencil radius relative to C_c h_c.
    #[arg(long)]
    pub delta_ratio: Option<f64>,
    /// Boundary conditions: mixed, dirichlet or neumann.
    #[arg(long)]
    pub bc: Option<String>,
    /// Diffusivity.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Time integrator: bdf1 or bdf4.
    #[arg(long)]
    pub time_scheme: Option<String>,
    /// BDF4 start-up: exact or ramp.
    #[arg(long)]
    pub bootstrap: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write the matrix of the largest run as matrix.mtx.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub write_matrix: Option<bool>,
    /// Timing repetitions (the median is reported).
    #[arg(long)]
    pub repetitions: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ConfigOverrides {
    /// Reads a config document. A run manifest is accepted too, in which
    /// case its resolved `config` object is used.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let parse_err = |message: String| ConfigError::Parse { path: path.to_path_buf(), message };
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), message: e.to_string() })?;
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
        if let Some(inner) = value.get_mut("config").map(serde_json::Value::take) {
            value = inner;
            if let Some(obj) = value.as_object_mut() {
                obj.remove("experiment");
            }
        }
        serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn merge(mut self, top: &ConfigOverrides) -> Self {
        overlay!(
            self,
            top,
            domain,
            generator,
            method,
            weight,
            weights,
            kernel,
            polydeg,
            n,
            hc_factor,
            cc,
            delta_ratio,
            bc,
            kappa,
            dt,
            t_final,
            time_scheme,
            bootstrap,
            output,
            threads,
            write_matrix,
            repetitions
        );
        self
    }
}

/// A fully resolved experiment; serialized verbatim into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub domain: String,
    pub generator: String,
    pub method: String,
    pub weight: String,
    pub weights: Vec<String>,
    pub kernel: String,
    pub polydeg: usize,
    pub n: Vec<usize>,
    pub hc_factor: f64,
    pub cc: f64,
    pub delta_ratio: f64,
    pub bc: String,
    pub kappa: f64,
    pub dt: f64,
    pub t_final: f64,
    pub time_scheme: String,
    pub bootstrap: String,
    pub output: PathBuf,
    pub threads: usize,
    pub write_matrix: bool,
    pub repetitions: usize,
    #[serde(skip)]
    pub parsed: Parsed,
}

/// Typed views of the string fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub domain: Domain,
    pub generator: Generator,
    pub method: Method,
    pub weight: WeightScheme,
    pub weights: Vec<WeightScheme>,
    pub kernel: PhsKernel,
    pub bc: BcMode,
    pub time_scheme: TimeScheme,
    pub bootstrap: Bootstrap,
}

fn parse<T: FromStr>(field: &'static str, s: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| field_err(field, e))
}

/// Parses `PHS6`, `phs6` or `6`.
pub fn parse_kernel(s: &str, dim: usize) -> Result<PhsKernel, ConfigError> {
    let lower = s.to_ascii_lowercase();
    let digits = lower.strip_prefix("phs").unwrap_or(&lower);
    let k: u32 = digits.parse().map_err(|_| field_err("kernel", format!("expected PHS<k>, got `{s}`")))?;
    PhsKernel::new(k, dim).map_err(|e| field_err("kernel", e))
}

pub fn default_generator(kind: DomainKind) -> Generator {
    match kind {
        DomainKind::Star2D => Generator::Hammersley,
        DomainKind::Quasi3D => Generator::Grid,
        _ => Generator::Halton,
    }
}

fn positive(field: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(field_err(field, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    /// Applies defaults and validates every field.
    pub fn resolve(experiment: Experiment, o: &ConfigOverrides) -> Result<Self, ConfigError> {
        let domain_name = o.domain.clone().unwrap_or_else(|| "box".into());
        let kind: DomainKind = parse("domain", &domain_name)?;
        let domain = Domain::new(kind);
        let dim = domain.dim;
        let generator = match &o.generator {
            Some(g) => parse("generator", g)?,
            None => default_generator(kind),
        };
        let method: Method = parse("method", o.method.as_deref().unwrap_or("drbfpu"))?;
        let weight: WeightScheme = parse("weight", o.weight.as_deref().unwrap_or("smooth"))?;
        let weight_names = o.weights.clone().unwrap_or_else(|| vec!["smooth".into(), "const2".into(), "hybrid".into()]);
        let weights = weight_names.iter().map(|w| parse("weights", w)).collect::<Result<Vec<WeightScheme>, _>>()?;
        if method == Method::RbfPu && weight != WeightScheme::Smooth {
            return Err(field_err("weight", "the standard RBF-PU method needs the smooth weight"));
        }
        let kernel = parse_kernel(o.kernel.as_deref().unwrap_or(if dim == 2 { "PHS6" } else { "PHS5" }), dim)?;
        let polydeg = o.polydeg.unwrap_or(kernel.min_degree());
        if polydeg < kernel.min_degree() {
            return Err(field_err(
                "polydeg",
                format!("{kernel} needs polynomial degree at least {}, got {polydeg}", kernel.min_degree()),
            ));
        }
        let n = o.n.clone().unwrap_or_else(|| vec![1000, 2000, 4000]);
        if n.is_empty() || n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field_err("n", "expected a non-empty, strictly ascending list"));
        }
        if n[0] < 20 {
            return Err(field_err("n", "node counts below 20 are not supported"));
        }
        let hc_factor = positive("hc-factor", o.hc_factor.unwrap_or(4.0))?;
        let cc = positive("cc", o.cc.unwrap_or(if dim == 3 && polydeg >= 6 { 1.2 } else { 1.0 }))?;
        let delta_ratio = positive("delta-ratio", o.delta_ratio.unwrap_or(1.0))?;
        let default_bc = match experiment {
            Experiment::Heat | Experiment::Spectrum => "dirichlet",
            _ => "mixed",
        };
        let bc: BcMode = parse("bc", o.bc.as_deref().unwrap_or(default_bc))?;
        let kappa = positive("kappa", o.kappa.unwrap_or(1.0))?;
        let dt = positive("dt", o.dt.unwrap_or(0.005))?;
        let t_final = positive("t-final", o.t_final.unwrap_or(0.2))?;
        let steps = t_final / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(field_err("dt", format!("{dt} does not divide t-final {t_final}")));
        }
        let time_scheme: TimeScheme = parse("time-scheme", o.time_scheme.as_deref().unwrap_or("bdf4"))?;
        let bootstrap: Bootstrap = parse("bootstrap", o.bootstrap.as_deref().unwrap_or("exact"))?;
        let threads = o.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if threads == 0 {
            return Err(field_err("threads", "must be at least 1"));
        }
        let repetitions = o.repetitions.unwrap_or(3);
        if repetitions == 0 {
            return Err(field_err("repetitions", "must be at least 1"));
        }
        let output = o.output.clone().unwrap_or_else(|| PathBuf::from("results").join(experiment.to_string()));
        Ok(Self {
            experiment,
            domain: kind.to_string(),
            generator: generator.to_string(),
            method: method.to_string(),
            weight: weight.to_string(),
            weights: weights.iter().map(ToString::to_string).collect(),
            kernel: kernel.to_string(),
            polydeg,
            n,
            hc_factor,
            cc,
            delta_ratio,
            bc: bc.to_string(),
            kappa,
            dt,
            t_final,
            time_scheme: time_scheme.to_string(),
            bootstrap: bootstrap.to_string(),
            output,
            threads,
            write_matrix: o.write_matrix.unwrap_or(false),
            repetitions,
            parsed: Parsed { domain, generator, method, weight, weights, kernel, bc, time_scheme, bootstrap },
        })
    }

    pub fn method_config(&self, method: Method, weight: WeightScheme) -> MethodConfig {
        let mut c = MethodConfig::new(method, weight, self.parsed.kernel, self.polydeg);
        c.hc_factor = self.hc_factor;
        c.c_c = self.cc;
        c.delta_ratio = self.delta_ratio;
        c
    }

    /// The overrides that reproduce this configuration exactly.
    pub fn to_overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            domain: Some(self.domain.clone()),
            generator: Some(self.generator.clone()),
            method: Some(self.method.clone()),
            weight: Some(self.weight.clone()),
            weights: Some(self.weights.clone()),
            kernel: Some(self.kernel.clone()),
            polydeg: Some(self.polydeg),
            n: Some(self.n.clone()),
            hc_factor: Some(self.hc_factor),
            cc: Some(self.cc),
            delta_ratio: Some(self.delta_ratio),
            bc: Some(self.bc.clone()),
            kappa: Some(self.kappa),
            dt: Some(self.dt),
            t_final: Some(self.t_final),
            time_scheme: Some(self.time_scheme.clone()),
            bootstrap: Some(self.bootstrap.clone()),
            output: Some(self.output.clone()),
            threads: Some(self.threads),
            write_matrix: Some(self.write_matrix),
            repetitions: Some(self.repetitions),
        }
    }
}
