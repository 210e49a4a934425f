//! Config-file driven workflows behind the `reinsure` binary.
//!
//! A run is described by one TOML file:
//!
//! ```toml
//! [model]
//! lambda = 1.0
//! beta = 1.0
//! eta = 0.5
//! theta = 0.7
//! delta = 0.05
//!
//! [claims]
//! kind = "exponential"
//! rate = 1.0
//!
//! [penalty]
//! kind = "w1"
//!
//! [grid]
//! x_lo = 0.0
//! x_hi = 14.0
//! n_points = 1400
//! ```
//!
//! plus optional `[solver]`, `[boundary]`, `[mc]`, `[simulate]`, `[asymptotics]` and
//! `[output]` sections. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{adjustment_coefficient, asymptotic_optimal_u, maximize_adjustment_coefficient};
use crate::error::Error;
use crate::evaluator::{policy_evaluate, BoundaryData};
use crate::hjb::{
    policy_iteration, ControlGrid, McBoundary, PolicyIterationConfig, PolicyIterationReport, Strategy, TopBoundary,
};
use crate::model::{ClaimDistribution, ModelParams, Penalty, RiskModel};
use crate::quadrature::{Grid, GridFunction};
use crate::simulator::mc_estimate;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] Error),
    #[error("policy iteration aborted after {iterates} iterates: {source}")]
    Solve {
        iterates: usize,
        #[source]
        source: Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PenaltyConfig {
    #[default]
    W1,
    W2,
    Constant { value: f64 },
}

impl PenaltyConfig {
    pub fn to_penalty(self) -> crate::Result<Penalty> {
        match self {
            PenaltyConfig::W1 => Ok(Penalty::W1),
            PenaltyConfig::W2 => Ok(Penalty::W2),
            PenaltyConfig::Constant { value } => Penalty::constant(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_value: f64,
    pub tol_residual: f64,
    pub max_iters: usize,
    pub min_iters: usize,
    pub control_grid_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = PolicyIterationConfig::default();
        Self {
            tol_value: d.tol_value,
            tol_residual: d.tol_residual,
            max_iters: d.max_iters,
            min_iters: d.min_iters,
            control_grid_size: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryConfig {
    #[default]
    Auto,
    MonteCarlo,
    Asymptotic,
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Truncation tolerance used to derive the horizon when none is given.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        let d = McBoundary::default();
        Self {
            n_paths: d.n_paths,
            horizon: d.horizon,
            tolerance: d.tolerance,
            seed: d.seed,
        }
    }
}

impl McConfig {
    fn boundary(&self) -> McBoundary {
        McBoundary {
            n_paths: self.n_paths,
            horizon: self.horizon,
            tolerance: self.tolerance,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub x0: Vec<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            x0: vec![2.0, 5.0, 8.0, 11.0, 13.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsConfig {
    /// Discount rates to tabulate; empty means the model's own `delta`.
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Complete description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub claims: ClaimDistribution,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    pub grid: Grid,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub asymptotics: AsymptoticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parses and validates a config.
    pub fn from_toml(text: &str) -> crate::Result<Self, String> {
        let config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    /// The config with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> crate::Result<()> {
        self.risk_model()?;
        self.grid.validate()?;
        self.controls()?;
        let s = &self.solver;
        if !(s.tol_value > 0.0 && s.tol_residual > 0.0) {
            return Err(crate::error::invalid("solver", "tolerances must be > 0"));
        }
        if s.max_iters == 0 {
            return Err(crate::error::invalid("solver.max_iters", "must be at least 1"));
        }
        if self.mc.n_paths < 2 {
            return Err(crate::error::invalid("mc.n_paths", "need at least 2 paths"));
        }
        if !(self.mc.tolerance > 0.0) || self.mc.horizon.is_some_and(|t| !(t > 0.0)) {
            return Err(crate::error::invalid("mc", "tolerance and horizon must be > 0"));
        }
        if let Some(x) = self.simulate.x0.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(crate::error::invalid("simulate.x0", format!("initial reserves must be > 0, got {x}")));
        }
        if let Some(d) = self.asymptotics.deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(crate::error::invalid("asymptotics.deltas", format!("must be >= 0, got {d}")));
        }
        Ok(())
    }

    pub fn risk_model(&self) -> crate::Result<RiskModel> {
        RiskModel::new(self.model, self.claims, self.penalty.to_penalty()?)
    }

    pub fn controls(&self) -> crate::Result<ControlGrid> {
        ControlGrid::uniform(self.solver.control_grid_size)
    }

    pub fn top_boundary(&self) -> TopBoundary {
        match self.boundary {
            BoundaryConfig::Auto => TopBoundary::Auto(self.mc.boundary()),
            BoundaryConfig::MonteCarlo => TopBoundary::MonteCarlo(self.mc.boundary()),
            BoundaryConfig::Asymptotic => TopBoundary::Asymptotic,
            BoundaryConfig::Fixed { value } => TopBoundary::Fixed(value),
        }
    }

    pub fn policy_iteration(&self) -> crate::Result<PolicyIterationConfig> {
        Ok(PolicyIterationConfig {
            tol_value: self.solver.tol_value,
            tol_residual: self.solver.tol_residual,
            max_iters: self.solver.max_iters,
            min_iters: self.solver.min_iters,
            controls: self.controls()?,
            top: self.top_boundary(),
        })
    }

    fn mc_horizon(&self, model: &RiskModel) -> crate::Result<f64> {
        self.mc.boundary().horizon(model)
    }
}

/// Shortest representation that reads back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let err = |e: csv::Error| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_value(path: &Path, value: &GridFunction) -> CliResult<()> {
    let grid = value.grid();
    write_csv(
        path,
        &["x", "V"],
        value.values().iter().enumerate().map(|(i, v)| vec![num(grid.point(i)), num(*v)]),
    )
}

/// Reads a strategy CSV with columns `x` and `u` (further columns are ignored) and
/// checks it against `grid`.
pub fn read_strategy(path: &Path, grid: Grid) -> CliResult<Strategy> {
    let bad = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (cx, cu) = (col("x")?, col("u")?);
    let mut controls = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| -> CliResult<f64> {
            let text = record.get(c).unwrap_or("").trim();
            text.parse()
                .map_err(|_| bad(format!("row {}: `{text}` is not a number", line + 1)))
        };
        let (x, u) = (field(cx)?, field(cu)?);
        let i = controls.len();
        if i < grid.n_points {
            let expected = grid.point(i);
            if (x - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(Error::GridMismatch(format!("row {}: x = {x}, grid node {i} is {expected}", line + 1)).into());
            }
        }
        controls.push(u);
    }
    Ok(Strategy::new(grid, controls)?)
}

pub fn write_strategy(path: &Path, strategy: &Strategy, model: &RiskModel) -> CliResult<()> {
    let grid = strategy.grid();
    write_csv(
        path,
        &["x", "u", "c_of_u"],
        strategy
            .controls()
            .iter()
            .enumerate()
            .map(|(i, &u)| vec![num(grid.point(i)), num(u), num(model.premium(u))]),
    )
}

/// What `solve` produced.
#[derive(Debug)]
pub struct SolveOutput {
    pub report: PolicyIterationReport,
    pub files: Vec<PathBuf>,
}

/// Runs policy iteration and writes `value.csv`, `strategy.csv`, `residual.csv`,
/// `report.csv` and, when a simulation horizon is available, `boundary.csv` (Monte
/// Carlo check of the value at `x_hi`).
pub fn cmd_solve(config: &RunConfig, out: &Path) -> CliResult<SolveOutput> {
    ensure_dir(out)?;
    let model = config.risk_model()?;
    let initial = Strategy::constant(config.grid, 1.0)?;
    let report = policy_iteration(&initial, &model, &config.policy_iteration()?).map_err(|f| CliError::Solve {
        iterates: f.partial.len(),
        source: f.source,
    })?;
    let grid = config.grid;
    let mut files: Vec<PathBuf> = ["value.csv", "strategy.csv", "residual.csv", "report.csv"]
        .iter()
        .map(|f| out.join(f))
        .collect();
    write_value(&files[0], report.value())?;
    write_strategy(&files[1], report.strategy(), &model)?;
    write_csv(
        &files[2],
        &["x", "residual"],
        report
            .residual
            .values()
            .iter()
            .enumerate()
            .map(|(i, r)| vec![num(grid.point(i)), num(*r)]),
    )?;
    write_csv(
        &files[3],
        &["iter", "sup_change", "max_residual"],
        report
            .iterates
            .iter()
            .enumerate()
            .map(|(k, it)| vec![(k + 1).to_string(), num(it.sup_change), num(it.max_residual)]),
    )?;
    // without discounting and without an explicit horizon there is nothing to truncate at
    if let Ok(horizon) = config.mc_horizon(&model) {
        let evaluated = &report.last().strategy;
        let x_hi = grid.x_hi;
        let mc = mc_estimate(x_hi, evaluated, &model, config.mc.n_paths, horizon, config.mc.seed)?;
        let path = out.join("boundary.csv");
        write_csv(
            &path,
            &["x", "pide", "mc_mean", "mc_std_error", "n_paths", "horizon"],
            [vec![
                num(x_hi),
                num(report.value().values()[grid.last()]),
                num(mc.mean),
                num(mc.std_error),
                mc.n_paths.to_string(),
                num(mc.horizon),
            ]],
        )?;
        files.push(path);
    }
    Ok(SolveOutput { report, files })
}

/// Evaluates a given strategy and writes `value.csv`.
pub fn cmd_evaluate(config: &RunConfig, strategy: &Strategy, out: &Path) -> CliResult<GridFunction> {
    ensure_dir(out)?;
    let model = config.risk_model()?;
    if strategy.grid() != &config.grid {
        return Err(Error::GridMismatch("strategy grid differs from the config grid".into()).into());
    }
    let upper = config.top_boundary().resolve(strategy, &model)?;
    let value = policy_evaluate(strategy, &model, BoundaryData::smooth_ruin(&model, upper))?;
    write_value(&out.join("value.csv"), &value)?;
    Ok(value)
}

/// Monte Carlo estimates of the strategy's value at each `x0`, written to `mc.csv`.
pub fn cmd_simulate(config: &RunConfig, strategy: &Strategy, x0: &[f64], out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    let model = config.risk_model()?;
    let horizon = config.mc_horizon(&model)?;
    let mut rows = Vec::with_capacity(x0.len());
    for &x in x0 {
        let e = mc_estimate(x, strategy, &model, config.mc.n_paths, horizon, config.mc.seed)?;
        rows.push(vec![
            num(x),
            num(e.mean),
            num(e.std_error),
            e.n_paths.to_string(),
            num(e.horizon),
            num(e.truncation_bound),
        ]);
    }
    write_csv(
        &out.join("mc.csv"),
        &["x0", "mean", "std_error", "n_paths", "horizon", "truncation_bound"],
        rows,
    )
}

/// Asymptotically optimal constant strategies per discount rate, written to `asy.csv`.
pub fn cmd_asymptotics(config: &RunConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    let deltas = if config.asymptotics.deltas.is_empty() {
        vec![config.model.delta]
    } else {
        config.asymptotics.deltas.clone()
    };
    let mut rows = Vec::with_capacity(deltas.len());
    for delta in deltas {
        let params = ModelParams { delta, ..config.model };
        params.validate()?;
        let (numeric, _) = maximize_adjustment_coefficient(&params, &config.claims, 1e-10)?;
        let closed = asymptotic_optimal_u(&params, &config.claims)?;
        let gamma = adjustment_coefficient(closed, &params, &config.claims)?.gamma;
        rows.push(vec![num(delta), num(closed), num(numeric), num(gamma)]);
    }
    write_csv(
        &out.join("asy.csv"),
        &["delta", "u_star_closed_form", "u_star_numeric", "gamma_at_u_star"],
        rows,
    )
}

#[derive(Debug, Parser)]
#[command(name = "reinsure", version, about = "Optimal proportional reinsurance for Gerber-Shiu functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `output.dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct StrategyArgs {
    /// Strategy CSV with columns x,u on the config grid.
    #[arg(long, conflicts_with = "constant_u", required_unless_present = "constant_u")]
    pub strategy: Option<PathBuf>,
    /// Constant retention level instead of a strategy file.
    #[arg(long)]
    pub constant_u: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Policy iteration for the optimal strategy.
    Solve(Common),
    /// Value of a given strategy.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// Monte Carlo estimates of a given strategy's value.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        strategy: StrategyArgs,
        /// Initial reserves; defaults to `simulate.x0` from the config.
        #[arg(long, value_delimiter = ',')]
        x0: Vec<f64>,
    },
    /// Adjustment-coefficient optimal constant strategies.
    Asymptotics(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(c) | Command::Asymptotics(c) => c,
            Command::Evaluate { common, .. } | Command::Simulate { common, .. } => common,
        }
    }
}

fn strategy_from(args: &StrategyArgs, grid: Grid) -> CliResult<Strategy> {
    match (&args.strategy, args.constant_u) {
        (Some(path), _) => read_strategy(path, grid),
        (None, Some(u)) => Ok(Strategy::constant(grid, u)?),
        (None, None) => unreachable!("clap requires one of --strategy and --constant-u"),
    }
}

/// Exit status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Done => 0,
            Outcome::NotConverged => 2,
        }
    }
}

/// Runs a parsed command line. Errors map to exit code 1.
pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let common = cli.command.common();
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.mc.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| config.output.dir.clone());
    let work = || -> CliResult<Outcome> {
        match &cli.command {
            Command::Solve(_) => {
                let solved = cmd_solve(&config, &out)?;
                Ok(if solved.report.converged {
                    Outcome::Done
                } else {
                    Outcome::NotConverged
                })
            }
            Command::Evaluate { strategy, .. } => {
                cmd_evaluate(&config, &strategy_from(strategy, config.grid)?, &out)?;
                Ok(Outcome::Done)
            }
            Command::Simulate { strategy, x0, .. } => {
                let x0 = if x0.is_empty() { config.simulate.x0.clone() } else { x0.clone() };
                cmd_simulate(&config, &strategy_from(strategy, config.grid)?, &x0, &out)?;
                Ok(Outcome::Done)
            }
            Command::Asymptotics(_) => {
                cmd_asymptotics(&config, &out)?;
                Ok(Outcome::Done)
            }
        }
    };
    match common.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Config {
                path: common.config.clone(),
                message: format!("thread pool: {e}"),
            })?
            .install(work),
        None => work(),
    }
}
