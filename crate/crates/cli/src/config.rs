//! Run configuration: command-line flags merged over an optional
//! `key = value` file. Keys are the long flag names (`alpha-list`, `precond`,
//! ...), `m` and `p` included; blank lines and `#` comments are ignored.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use hbrbf::kernels::KernelSpec;
use hbrbf::kriging::MseScale;
use hbrbf::solver::{PolyScaling, PreconditionerKind, SolveOptions};
use hbrbf::testcases::TestCase;

use crate::CliError;

/// Flags shared by every command. All are optional so that a config file can
/// supply them; unset values fall back to per-command defaults.
#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    /// Line-based `key = value` file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input node CSV (`x,y,z` or `x,y,z,value`).
    #[arg(long = "in", global = true)]
    pub input: Option<PathBuf>,
    /// Output file (reports are appended) or directory (kriging grids).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Test case to generate when no input is given: uniform, vplane, bimodal.
    #[arg(long, global = true)]
    pub case: Option<String>,
    /// Number of nodes to generate.
    #[arg(short = 'n', long = "nodes", global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// biharmonic, mq or imq.
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// Shape parameter in normalized units.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Positive kernel multiplier.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
    /// Polynomial order of the interpolation or regression.
    #[arg(short = 'm', global = true)]
    pub m: Option<usize>,
    /// Polynomial order of the hierarchical basis.
    #[arg(short = 'p', global = true)]
    pub p: Option<usize>,
    /// none, diag or ssor.
    #[arg(long, global = true)]
    pub precond: Option<String>,
    /// GMRES relative residual target.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub restart: Option<usize>,
    /// Comma-separated scale factors for `condition`.
    #[arg(long = "alpha-list", global = true)]
    pub alpha_list: Option<String>,
    /// How alpha enters the polynomial block: domain or multiplier.
    #[arg(long = "poly-scaling", global = true)]
    pub poly_scaling: Option<String>,
    /// Comma-separated regression orders for `kriging`.
    #[arg(long, global = true)]
    pub orders: Option<String>,
    /// Comma-separated shape parameters scanned by leave-one-out for `kriging`.
    #[arg(long = "delta-list", global = true)]
    pub delta_list: Option<String>,
    /// MSE scaling for `kriging`: profiled or known.
    #[arg(long = "mse-scale", global = true)]
    pub mse_scale: Option<String>,
    /// Kriging fit: hierarchical or dense.
    #[arg(long, global = true)]
    pub fit: Option<String>,
    /// Level for `decay` (default: finest).
    #[arg(long, global = true)]
    pub level: Option<usize>,
    /// Where `solve` dumps the coefficients `u` and `c`.
    #[arg(long, global = true)]
    pub solution: Option<PathBuf>,
}

/// Parses a config file into raw key/value pairs.
pub fn read_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<HashMap<String, String>, CliError> {
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().trim_start_matches('-').to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

const KNOWN_KEYS: &[&str] = &[
    "in", "out", "case", "nodes", "n", "seed", "kernel", "delta", "scale", "m", "p", "precond", "tol",
    "restart", "alpha-list", "poly-scaling", "orders", "delta-list", "mse-scale", "fit", "level",
    "solution",
];

/// Flags with config-file values filled in where a flag was not given.
pub struct Merged {
    flags: Flags,
    file: HashMap<String, String>,
}

impl Merged {
    pub fn new(flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => read_config_file(path)?,
            None => HashMap::new(),
        };
        Ok(Self { flags, file })
    }

    fn file_value<T: FromStr>(&self, keys: &[&str]) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        for key in keys {
            if let Some(v) = self.file.get(*key) {
                return v
                    .parse()
                    .map(Some)
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")));
            }
        }
        Ok(None)
    }

    fn pick<T: FromStr + Clone>(&self, flag: &Option<T>, keys: &[&str]) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v.clone())),
            None => self.file_value(keys),
        }
    }

    /// Resolves every setting, using `defaults` for what neither source gives.
    pub fn resolve(&self, defaults: &Defaults) -> Result<RunConfig, CliError> {
        let f = &self.flags;
        let case = parse_case(&self.pick(&f.case, &["case"])?.unwrap_or_else(|| defaults.case.into()))?;
        let kernel_name = self.pick(&f.kernel, &["kernel"])?.unwrap_or_else(|| defaults.kernel.into());
        let delta = self.pick(&f.delta, &["delta"])?;
        let scale = self.pick(&f.scale, &["scale"])?;
        let kernel = parse_kernel(&kernel_name, delta, scale, defaults)?;
        let m = self.pick(&f.m, &["m"])?.unwrap_or(defaults.m);
        let p = self.pick(&f.p, &["p"])?.unwrap_or(defaults.p.max(m));
        if m > p {
            return Err(CliError::Usage(format!("polynomial order m = {m} exceeds basis order p = {p}")));
        }
        let precond = parse_precond(&self.pick(&f.precond, &["precond"])?.unwrap_or_else(|| "diag".into()))?;
        let mut solve = SolveOptions {
            preconditioner: precond,
            tol: self.pick(&f.tol, &["tol"])?.unwrap_or(defaults.tol),
            ..SolveOptions::default()
        };
        if let Some(r) = self.pick(&f.restart, &["restart"])? {
            solve.restart = r;
        }
        solve.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let alphas = parse_list(&self.pick(&f.alpha_list, &["alpha-list"])?.unwrap_or_else(|| "1,10,100".into()), "alpha-list")?;
        if alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(CliError::Usage("alpha-list entries must be positive".into()));
        }
        let poly_scaling = match self.pick(&f.poly_scaling, &["poly-scaling"])?.as_deref().unwrap_or("domain") {
            "domain" => PolyScaling::Domain,
            "multiplier" => PolyScaling::Multiplier,
            other => return Err(CliError::Usage(format!("unknown poly-scaling `{other}`; use domain or multiplier"))),
        };
        let orders: Vec<usize> = parse_list(&self.pick(&f.orders, &["orders"])?.unwrap_or_else(|| "0,1,2".into()), "orders")?;
        let delta_list = match self.pick(&f.delta_list, &["delta-list"])? {
            Some(s) => {
                let v: Vec<f64> = parse_list(&s, "delta-list")?;
                if v.iter().any(|d| !(*d > 0.0)) {
                    return Err(CliError::Usage("delta-list entries must be positive".into()));
                }
                Some(v)
            }
            None => None,
        };
        let mse_scale = match self.pick(&f.mse_scale, &["mse-scale"])?.as_deref().unwrap_or("profiled") {
            "profiled" => MseScale::Profiled,
            "known" => MseScale::KnownCovariance,
            other => return Err(CliError::Usage(format!("unknown mse-scale `{other}`; use profiled or known"))),
        };
        let dense_fit = match self.pick(&f.fit, &["fit"])?.as_deref().unwrap_or("hierarchical") {
            "hierarchical" => false,
            "dense" => true,
            other => return Err(CliError::Usage(format!("unknown fit `{other}`; use hierarchical or dense"))),
        };
        let input = self.pick(&f.input, &["in"])?;
        let output = self.pick(&f.out, &["out"])?;
        let solution = self.pick(&f.solution, &["solution"])?;
        for (a, b) in [(&input, &output), (&input, &solution), (&output, &solution)] {
            if let (Some(a), Some(b)) = (a, b) {
                if a == b {
                    return Err(CliError::Usage(format!("path {} is used twice", a.display())));
                }
            }
        }
        Ok(RunConfig {
            input,
            output,
            solution,
            case,
            n: self.pick(&f.n, &["nodes", "n"])?.unwrap_or(defaults.n),
            seed: self.pick(&f.seed, &["seed"])?.unwrap_or(1),
            kernel,
            m,
            p,
            solve,
            alphas,
            poly_scaling,
            orders,
            delta_list,
            mse_scale,
            dense_fit,
            level: self.pick(&f.level, &["level"])?,
        })
    }
}

/// Per-command fallbacks.
pub struct Defaults {
    pub case: &'static str,
    pub n: usize,
    pub kernel: &'static str,
    pub delta: f64,
    /// `None` means the scale equals delta, so that an inverse multiquadric
    /// has unit variance `K(0) = 1`.
    pub scale: Option<f64>,
    pub m: usize,
    pub p: usize,
    pub tol: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            case: "uniform",
            n: 500,
            kernel: "biharmonic",
            delta: 0.01,
            scale: Some(1.0),
            m: 0,
            p: 3,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub solution: Option<PathBuf>,
    pub case: TestCase,
    pub n: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub m: usize,
    pub p: usize,
    pub solve: SolveOptions,
    pub alphas: Vec<f64>,
    pub poly_scaling: PolyScaling,
    pub orders: Vec<usize>,
    pub delta_list: Option<Vec<f64>>,
    pub mse_scale: MseScale,
    pub dense_fit: bool,
    pub level: Option<usize>,
}

fn parse_case(s: &str) -> Result<TestCase, CliError> {
    TestCase::parse(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_precond(s: &str) -> Result<PreconditionerKind, CliError> {
    match s {
        "none" => Ok(PreconditionerKind::None),
        "diag" => Ok(PreconditionerKind::Diagonal),
        "ssor" => Ok(PreconditionerKind::BlockSsor),
        other => Err(CliError::Usage(format!("unknown preconditioner `{other}`; use none, diag or ssor"))),
    }
}

fn parse_kernel(name: &str, delta: Option<f64>, scale: Option<f64>, d: &Defaults) -> Result<KernelSpec, CliError> {
    let delta_v = delta.unwrap_or(d.delta);
    let scale_v = scale.or(d.scale).unwrap_or(delta_v);
    let spec = match name {
        "biharmonic" => {
            if delta.is_some_and(|x| x != 0.0) {
                return Err(CliError::Usage("the biharmonic kernel takes no shape parameter; use mq".into()));
            }
            KernelSpec::biharmonic().with_scale(scale_v)
        }
        "mq" => KernelSpec::multiquadric(delta_v).with_scale(scale_v),
        "imq" => KernelSpec::inverse_multiquadric(delta_v, scale_v),
        other => return Err(CliError::Usage(format!("unknown kernel `{other}`; use biharmonic, mq or imq"))),
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<T>().map_err(|e| CliError::Usage(format!("{what}: `{}`: {e}", t.trim()))))
        .collect::<Result<Vec<T>, _>>()?;
    if v.is_empty() {
        return Err(CliError::Usage(format!("{what} is empty")));
    }
    Ok(v)
}
