//! The `volterra` command-line front end.
//!
//! Every subcommand writes UTF-8 CSV to stdout (or `--out FILE`). Options can
//! also come from a flat `key=value` file given with `--config`, where keys
//! are the long flag names (`steps=10,20,40`, `T=1`); flags always win.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 when a check
//! falsifies its hypothesis.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::engine::{
    convergence_rows, convergence_study, estimate_row, run_mc, McConfig, McProblem, Model,
    PayoffKind, CONVERGENCE_HEADER, ESTIMATE_HEADER,
};
use crate::kernels::{
    check_preserves_nonnegativity, discrete_resolvent, from_lists, preset, DepthRow, FiniteKernel,
    FractionalKernel, Kernel, Verdict,
};
use crate::reference::riccati::{REFINE_AGREEMENT, RTOL, TAIL_TOL};
use crate::reference::{call_price, fit_fractional_with, laplace_xt, FitOptions};
use crate::schemes::{CirParams, GbmParams, HestonParams, ModelKind, SchemeKind};
use crate::{Error, Result};

/// Environment variable holding the advisory worker count.
pub const THREADS_ENV: &str = "VOLTERRA_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FALSIFIED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "volterra",
    version,
    about = "Kernel analysis and Monte Carlo for stochastic Volterra equations",
    after_help = "Exit codes: 0 success, 1 usage/config error, 2 falsified.\n\
                  VOLTERRA_THREADS sets the worker count (0 = all cores, 1 = sequential); it never changes results."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel analysis
    #[command(subcommand)]
    Kernel(KernelCommand),
    /// Fit a nonnegative exponential sum to the fractional kernel
    Fit(FitArgs),
    /// Monte Carlo estimate of one payoff
    Price(SimArgs),
    /// Weak convergence study over several step counts
    Converge(SimArgs),
    /// Semi-analytic reference values
    Reference(ReferenceArgs),
}

#[derive(Debug, Subcommand)]
pub enum KernelCommand {
    /// Sample the G_l functions looking for a nonnegativity violation
    Check(CheckArgs),
    /// Discrete resolvent of the first kind on the grid k/n
    Resolvent(ResolventArgs),
}

#[derive(Debug, Args, Default)]
pub struct IoArgs {
    /// Flat key=value file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct KernelArgs {
    /// Kernel preset: paper-n5, exp, signed-counterexample [default: paper-n5]
    #[arg(long)]
    pub preset: Option<String>,
    /// Comma-separated weights (with --rhos)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gammas: Option<Vec<f64>>,
    /// Comma-separated rates (with --gammas)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub rhos: Option<Vec<f64>>,
    /// Fractional kernel t^(H-1/2)/Gamma(H+1/2) with this Hurst index
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Replace the fractional kernel by an n-term exponential fit
    #[arg(long = "fit-n")]
    pub fit_n: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// cir, heston or gbm [default: heston]
    #[arg(long)]
    pub model: Option<String>,
    /// Initial variance (or GBM initial value) [default: 0.02; gbm: 1]
    #[arg(long)]
    pub x0: Option<f64>,
    /// Mean-reversion level coefficient a [default: 0.02]
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Mean-reversion speed k [default: 0.3]
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    /// Volatility of variance [default: 0.3]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Spot/variance correlation [default: -0.7]
    #[arg(long, allow_negative_numbers = true)]
    pub varrho: Option<f64>,
    /// Interest rate [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Initial spot price S0 [default: 1]
    #[arg(long)]
    pub s0: Option<f64>,
    /// GBM drift [default: 0.05]
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// GBM volatility [default: 0.2]
    #[arg(long = "sigma-g")]
    pub sigma_g: Option<f64>,
    /// Strike [default: S0]
    #[arg(long)]
    pub strike: Option<f64>,
    /// Maturity [default: 1]
    #[arg(long = "T")]
    pub t_end: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Largest depth l [default: 8]
    #[arg(long)]
    pub depth: Option<usize>,
    /// Sampled tuples per depth [default: 10000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Values below -tol count as violations [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Sampling seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct ResolventArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Grid density: points at k/n [default: 100]
    #[arg(long)]
    pub n: Option<usize>,
    /// Last index K [default: 1000]
    #[arg(long = "K")]
    pub k_max: Option<usize>,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Hurst index in (0, 1/2] [default: 0.1]
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Number of exponentials [default: 20]
    #[arg(long = "fit-n")]
    pub fit_n: Option<usize>,
    /// Horizon T of the fitting interval [T/10^4, T] [default: 1]
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    /// Residual above which a warning is printed [default: 0.05]
    #[arg(long)]
    pub bound: Option<f64>,
    /// Log-uniform sample points [default: 600]
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// second-order, euler-volterra, euler-lifted or splitting-gbm [default: second-order]
    #[arg(long)]
    pub scheme: Option<String>,
    /// laplace, call or scaled-call [default: call, laplace for cir]
    #[arg(long)]
    pub payoff: Option<String>,
    /// Step count, or a comma-separated list for `converge` [default: 160; converge: 10,20,40,80]
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<usize>>,
    /// Monte Carlo paths [default: 100000]
    #[arg(long)]
    pub paths: Option<usize>,
    /// Seed of the per-path streams; mandatory when stdout is not a terminal
    #[arg(long)]
    pub seed: Option<u64>,
    /// `auto` (semi-analytic) or a number; converge only [default: auto]
    #[arg(long)]
    pub reference: Option<String>,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// laplace (E[exp(-u X_T)]) or call [default: laplace]
    #[arg(long)]
    pub payoff: Option<String>,
    /// Laplace argument u [default: 1/x0]
    #[arg(long)]
    pub u: Option<f64>,
    #[command(flatten)]
    pub io: IoArgs,
}

/// Flat `key=value` settings; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let known = long_flag_names();
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key=value", i + 1))
            })?;
            let key = key.trim().replace('_', "-");
            if !known.contains(&key) || key == "config" {
                return Err(Error::Config(format!(
                    "config line {}: unknown key `{key}`",
                    i + 1
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// The flag value if given, else the parsed config value.
    fn pick<T>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag.clone());
        }
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("config `{key}={v}`: {e}")))
            })
            .transpose()
    }

    fn pick_list<T>(&self, flag: &Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag.clone());
        }
        self.0
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<T>()
                            .map_err(|e| Error::Config(format!("config `{key}={v}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn long_flag_names() -> Vec<String> {
    fn walk(cmd: &clap::Command, out: &mut Vec<String>) {
        out.extend(
            cmd.get_arguments()
                .filter_map(|a| a.get_long().map(str::to_string)),
        );
        for sub in cmd.get_subcommands() {
            walk(sub, out);
        }
    }
    let mut out = Vec::new();
    walk(&Cli::command(), &mut out);
    out
}

/// How the kernel of a run is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Preset(String),
    Lists { gammas: Vec<f64>, rhos: Vec<f64> },
    Fractional { hurst: f64, fit_n: Option<usize> },
}

impl KernelSpec {
    fn resolve(args: &KernelArgs, cfg: &ConfigFile) -> Result<Self> {
        let preset = cfg.pick(&args.preset, "preset")?;
        let gammas = cfg.pick_list(&args.gammas, "gammas")?;
        let rhos = cfg.pick_list(&args.rhos, "rhos")?;
        let hurst = cfg.pick(&args.hurst, "hurst")?;
        let fit_n = cfg.pick(&args.fit_n, "fit-n")?;
        let given = [
            preset.is_some(),
            gammas.is_some() || rhos.is_some(),
            hurst.is_some(),
        ];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(Error::Config(
                "give exactly one of --preset, --gammas/--rhos or --hurst".into(),
            ));
        }
        if fit_n.is_some() && hurst.is_none() {
            return Err(Error::Config("--fit-n needs --hurst".into()));
        }
        Ok(match (preset, gammas, rhos, hurst) {
            (_, Some(gammas), Some(rhos), _) => KernelSpec::Lists { gammas, rhos },
            (_, Some(_), None, _) | (_, None, Some(_), _) => {
                return Err(Error::Config("--gammas and --rhos go together".into()))
            }
            (_, _, _, Some(hurst)) => KernelSpec::Fractional { hurst, fit_n },
            (Some(p), ..) => KernelSpec::Preset(p),
            _ => KernelSpec::Preset("paper-n5".into()),
        })
    }

    /// Build the kernel; fits are fitted on `[T/10^4, T]` and report their
    /// residual on stderr.
    pub fn build(&self, t_end: f64) -> Result<Kernel> {
        match self {
            KernelSpec::Preset(name) => preset(name),
            KernelSpec::Lists { gammas, rhos } => from_lists(gammas.clone(), rhos.clone()),
            KernelSpec::Fractional { hurst, fit_n: None } => {
                Ok(FractionalKernel::new(*hurst)?.into())
            }
            KernelSpec::Fractional {
                hurst,
                fit_n: Some(n),
            } => {
                let report = fit_fractional_with(*hurst, t_end, *n, &FitOptions::default())?;
                eprintln!(
                    "fit: H = {hurst}, n = {n}, relative L2 residual = {:.6}",
                    report.residual
                );
                if let Some(w) = &report.warning {
                    eprintln!("warning: {w}");
                }
                Ok(report.kernel.into())
            }
        }
    }
}

/// Fully resolved settings of one run (flags over config over defaults).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub kernel: KernelSpec,
    pub model: Model,
    pub scheme: SchemeKind,
    pub payoff: PayoffKind,
    pub steps: Vec<usize>,
    pub paths: usize,
    pub seed: Option<u64>,
    pub strike: f64,
    pub t_end: f64,
    /// `None` selects the semi-analytic reference.
    pub reference: Option<f64>,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

fn resolve_model(args: &ModelArgs, cfg: &ConfigFile) -> Result<(Model, f64, f64)> {
    let kind: ModelKind = cfg
        .pick(&args.model, "model")?
        .unwrap_or_else(|| "heston".into())
        .parse()?;
    let get = |flag: &Option<f64>, key: &str, default: f64| -> Result<f64> {
        Ok(cfg.pick(flag, key)?.unwrap_or(default))
    };
    let d = HestonParams::rough_heston_defaults();
    let s0 = get(&args.s0, "s0", 1.0)?;
    if !(s0 > 0.0) {
        return Err(Error::Config(format!("S0 = {s0} must be positive")));
    }
    let model = match kind {
        ModelKind::Gbm => Model::Gbm(GbmParams::new(
            get(&args.x0, "x0", 1.0)?,
            get(&args.mu, "mu", 0.05)?,
            get(&args.sigma_g, "sigma-g", 0.2)?,
        )?),
        ModelKind::Cir | ModelKind::Heston => {
            let cir = CirParams::new(
                get(&args.x0, "x0", d.cir.x0)?,
                get(&args.a, "a", d.cir.a)?,
                get(&args.k, "k", d.cir.k)?,
                get(&args.sigma, "sigma", d.cir.sigma)?,
            )?;
            if kind == ModelKind::Cir {
                Model::Cir(cir)
            } else {
                Model::Heston(HestonParams::new(
                    cir,
                    get(&args.r, "r", d.r)?,
                    get(&args.varrho, "varrho", d.varrho)?,
                    s0.ln(),
                )?)
            }
        }
    };
    let strike = get(&args.strike, "strike", s0)?;
    let t_end = get(&args.t_end, "T", 1.0)?;
    if !(t_end > 0.0 && t_end.is_finite()) || !(strike > 0.0) {
        return Err(Error::Config(format!(
            "need T > 0 and strike > 0 (got T = {t_end}, strike = {strike})"
        )));
    }
    Ok((model, strike, t_end))
}

fn workers_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}=`{v}` is not a thread count"))),
    }
}

impl RunSpec {
    fn from_sim(args: &SimArgs, converge: bool) -> Result<Self> {
        let cfg = ConfigFile::load(args.io.config.as_deref())?;
        let (model, strike, t_end) = resolve_model(&args.model, &cfg)?;
        let default_payoff = if model.kind() == ModelKind::Cir {
            "laplace"
        } else {
            "call"
        };
        let default_steps = if converge {
            vec![10, 20, 40, 80]
        } else {
            vec![160]
        };
        let reference = match cfg.pick(&args.reference, "reference")?.as_deref() {
            None | Some("auto") => None,
            Some(v) => Some(v.parse::<f64>().map_err(|_| {
                Error::Config(format!("--reference expects `auto` or a number, got `{v}`"))
            })?),
        };
        let spec = RunSpec {
            kernel: KernelSpec::resolve(&args.kernel, &cfg)?,
            model,
            scheme: cfg
                .pick(&args.scheme, "scheme")?
                .unwrap_or_else(|| "second-order".into())
                .parse()?,
            payoff: cfg
                .pick(&args.payoff, "payoff")?
                .unwrap_or_else(|| default_payoff.into())
                .parse()?,
            steps: cfg
                .pick_list(&args.steps, "steps")?
                .unwrap_or(default_steps),
            paths: cfg.pick(&args.paths, "paths")?.unwrap_or(100_000),
            seed: cfg.pick(&args.seed, "seed")?,
            strike,
            t_end,
            reference,
            workers: workers_from_env()?,
            out: cfg.pick(&args.io.out, "out")?,
        };
        if spec.steps.is_empty() || spec.steps.contains(&0) || spec.paths == 0 {
            return Err(Error::Config("steps and paths must be positive".into()));
        }
        if !converge && spec.steps.len() != 1 {
            return Err(Error::Config("price takes a single --steps value".into()));
        }
        Ok(spec)
    }

    fn seed(&self) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None if std::io::stdout().is_terminal() => {
                eprintln!("note: no --seed given, using 0");
                Ok(0)
            }
            None => Err(Error::Config(
                "--seed is mandatory when stdout is not a terminal".into(),
            )),
        }
    }

    fn problem(&self) -> Result<McProblem> {
        Ok(McProblem {
            kernel: self.kernel.build(self.t_end)?,
            model: self.model,
            t_end: self.t_end,
            strike: self.strike,
        })
    }
}

/// CSV text plus the exit code it implies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub csv: String,
    pub code: i32,
}

impl Outcome {
    fn ok(lines: Vec<String>) -> Self {
        Self {
            csv: lines.join("\n") + "\n",
            code: EXIT_OK,
        }
    }
}

fn with_finite_kernel<T>(kernel: &Kernel, f: impl FnOnce(&dyn FiniteKernel) -> T) -> Result<T> {
    match kernel {
        Kernel::MultiExp(k) => Ok(f(k)),
        Kernel::ExpSum(k) => Ok(f(k)),
        Kernel::Fractional(k) if k.hurst() == 0.5 => Ok(f(&|_: f64| 1.0)),
        Kernel::Fractional(k) => Err(Error::Config(format!(
            "the fractional kernel with H = {} is infinite at 0; use --fit-n for an exponential fit",
            k.hurst()
        ))),
    }
}

pub fn cmd_kernel_check(args: &CheckArgs) -> Result<Outcome> {
    let cfg = ConfigFile::load(args.io.config.as_deref())?;
    let kernel = KernelSpec::resolve(&args.kernel, &cfg)?.build(1.0)?;
    let depth = cfg.pick(&args.depth, "depth")?.unwrap_or(8);
    let samples = cfg.pick(&args.samples, "samples")?.unwrap_or(10_000);
    let tol = cfg.pick(&args.tol, "tol")?.unwrap_or(1e-12);
    let seed = cfg.pick(&args.seed, "seed")?.unwrap_or(0);
    if depth == 0 || samples == 0 {
        return Err(Error::Config("depth and samples must be positive".into()));
    }
    let report = with_finite_kernel(&kernel, |k| {
        check_preserves_nonnegativity(k, depth, samples, tol, seed)
    })?;
    let mut lines = vec![DepthRow::CSV_HEADER.to_string()];
    lines.extend(report.rows.iter().map(DepthRow::csv_row));
    let mut out = Outcome::ok(lines);
    if report.verdict == Verdict::Falsified {
        if let Some(c) = &report.counterexample {
            eprintln!(
                "FALSIFIED: G_{} = {:e} at gaps {:?}",
                c.gaps.len(),
                c.value,
                c.gaps
            );
        }
        out.code = EXIT_FALSIFIED;
    }
    Ok(out)
}

pub fn cmd_resolvent(args: &ResolventArgs) -> Result<Outcome> {
    let cfg = ConfigFile::load(args.io.config.as_deref())?;
    let kernel = KernelSpec::resolve(&args.kernel, &cfg)?.build(1.0)?;
    let n = cfg.pick(&args.n, "n")?.unwrap_or(100);
    let k_max = cfg.pick(&args.k_max, "K")?.unwrap_or(1000);
    let res = with_finite_kernel(&kernel, |k| discrete_resolvent(k, n, k_max))??;
    let mut lines = vec!["k,x".to_string()];
    lines.extend(
        res.values
            .iter()
            .enumerate()
            .map(|(k, x)| format!("{k},{x}")),
    );
    Ok(Outcome::ok(lines))
}

pub fn cmd_fit(args: &FitArgs) -> Result<Outcome> {
    let cfg = ConfigFile::load(args.io.config.as_deref())?;
    let hurst = cfg.pick(&args.hurst, "hurst")?.unwrap_or(0.1);
    let n = cfg.pick(&args.fit_n, "fit-n")?.unwrap_or(20);
    let t_end = cfg.pick(&args.t_end, "T")?.unwrap_or(1.0);
    let defaults = FitOptions::default();
    let opts = FitOptions {
        bound: cfg.pick(&args.bound, "bound")?.unwrap_or(defaults.bound),
        samples: cfg
            .pick(&args.samples, "samples")?
            .unwrap_or(defaults.samples),
    };
    let report = fit_fractional_with(hurst, t_end, n, &opts)?;
    eprintln!("residual={}", report.residual);
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    let mut lines = vec!["gamma,rho".to_string()];
    let k = &report.kernel;
    lines.extend(
        k.gammas()
            .iter()
            .zip(k.rhos())
            .map(|(g, r)| format!("{g},{r}")),
    );
    Ok(Outcome::ok(lines))
}

/// Semi-analytic value of `E[payoff]` for the run, when one exists.
pub fn auto_reference(
    kernel: &Kernel,
    model: &Model,
    payoff: PayoffKind,
    strike: f64,
    t_end: f64,
) -> Result<f64> {
    let k = kernel.as_multi_exp();
    match (payoff, model, k) {
        (PayoffKind::Laplace, Model::Cir(p), Some(k)) => laplace_xt(k, p, 1.0 / p.x0, t_end),
        (PayoffKind::Laplace, Model::Heston(p), Some(k)) => laplace_xt(k, &p.cir, 1.0 / p.cir.x0, t_end),
        // the simulated payoff is undiscounted
        (PayoffKind::Call, Model::Heston(p), Some(k)) => Ok(call_price(k, p, strike, t_end)? * (p.r * t_end).exp()),
        _ => Err(Error::Config(format!(
            "no automatic reference for payoff `{payoff}` with model `{}` on this kernel; pass --reference VALUE",
            model.kind()
        ))),
    }
}

pub fn cmd_price(spec: &RunSpec) -> Result<Outcome> {
    let seed = spec.seed()?;
    let problem = spec.problem()?;
    let config = McConfig {
        paths: spec.paths,
        seed,
        steps: spec.steps[0],
        workers: spec.workers,
    };
    let e = run_mc(&problem, spec.scheme, spec.payoff, &config)?;
    if let Some(w) = &e.warning {
        eprintln!("warning: {w}");
    }
    Ok(Outcome::ok(vec![
        ESTIMATE_HEADER.to_string(),
        estimate_row(
            spec.scheme,
            &spec.model,
            spec.payoff,
            config.steps,
            seed,
            &e,
        ),
    ]))
}

pub fn cmd_converge(spec: &RunSpec) -> Result<Outcome> {
    let seed = spec.seed()?;
    let problem = spec.problem()?;
    let reference = match spec.reference {
        Some(r) => r,
        None => auto_reference(
            &problem.kernel,
            &spec.model,
            spec.payoff,
            spec.strike,
            spec.t_end,
        )?,
    };
    let config = McConfig {
        paths: spec.paths,
        seed,
        steps: spec.steps[0],
        workers: spec.workers,
    };
    let table = convergence_study(
        &problem,
        spec.scheme,
        spec.payoff,
        &spec.steps,
        reference,
        &config,
    )?;
    eprintln!(
        "slope={} points_used={}",
        table.slope_label(),
        table.points_used
    );
    let mut lines = vec![CONVERGENCE_HEADER.to_string()];
    lines.extend(convergence_rows(
        spec.scheme,
        &spec.model,
        spec.payoff,
        seed,
        &table,
    ));
    Ok(Outcome::ok(lines))
}

pub fn cmd_reference(args: &ReferenceArgs) -> Result<Outcome> {
    let cfg = ConfigFile::load(args.io.config.as_deref())?;
    let (model, strike, t_end) = resolve_model(&args.model, &cfg)?;
    let kernel = KernelSpec::resolve(&args.kernel, &cfg)?.build(t_end)?;
    let payoff: PayoffKind = cfg
        .pick(&args.payoff, "payoff")?
        .unwrap_or_else(|| "laplace".into())
        .parse()?;
    let k = kernel
        .as_multi_exp()
        .ok_or_else(|| Error::Config("references need a positive exponential-sum kernel".into()))?;
    let row = match (payoff, &model) {
        (PayoffKind::Laplace, Model::Cir(_) | Model::Heston(_)) => {
            let cir = match &model {
                Model::Cir(p) => *p,
                Model::Heston(p) => p.cir,
                Model::Gbm(_) => unreachable!(),
            };
            let u = cfg.pick(&args.u, "u")?.unwrap_or(1.0 / cir.x0);
            let v = laplace_xt(k, &cir, u, t_end)?;
            format!("laplace_xt(u={u};T={t_end}),{v},{:e}", REFINE_AGREEMENT * v)
        }
        (PayoffKind::Call, Model::Heston(p)) => {
            let v = call_price(k, p, strike, t_end)?;
            format!("call_price(K={strike};T={t_end}),{v},{:e}", 2.0 * TAIL_TOL + RTOL * v)
        }
        _ => {
            return Err(Error::Config(format!(
                "no reference for payoff `{payoff}` with model `{}` (laplace: cir/heston, call: heston)",
                model.kind()
            )))
        }
    };
    Ok(Outcome::ok(vec![
        "quantity,value,tolerance_estimate".to_string(),
        row,
    ]))
}

fn out_path(io: &IoArgs) -> Result<Option<PathBuf>> {
    ConfigFile::load(io.config.as_deref())?.pick(&io.out, "out")
}

fn dispatch(cli: &Cli) -> Result<(Outcome, Option<PathBuf>)> {
    Ok(match &cli.command {
        Command::Kernel(KernelCommand::Check(a)) => (cmd_kernel_check(a)?, out_path(&a.io)?),
        Command::Kernel(KernelCommand::Resolvent(a)) => (cmd_resolvent(a)?, out_path(&a.io)?),
        Command::Fit(a) => (cmd_fit(a)?, out_path(&a.io)?),
        Command::Price(a) => {
            let spec = RunSpec::from_sim(a, false)?;
            (cmd_price(&spec)?, spec.out)
        }
        Command::Converge(a) => {
            let spec = RunSpec::from_sim(a, true)?;
            (cmd_converge(&spec)?, spec.out)
        }
        Command::Reference(a) => (cmd_reference(a)?, out_path(&a.io)?),
    })
}

/// Parse `args` (including the program name), run and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (outcome, out) = match dispatch(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let written = match out {
        Some(path) => std::fs::write(&path, &outcome.csv)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout()
            .lock()
            .write_all(outcome.csv.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    outcome.code
}
