//! Command-line front end.
//!
//! Every run reads an optional TOML config, applies command-line overrides,
//! writes its CSV outputs plus a `manifest.json` into the output directory,
//! and maps failures onto a fixed set of exit codes.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_form::{fully_connected_profile, line_bound_profile, ring_profile, LineReading};
use crate::error::AoiError;
use crate::exact::{novai, AoiResult, ExactSolver, Method, DEFAULT_SUBSET_LIMIT};
use crate::experiments::{
    default_fc_grid, default_line_grid, default_ring_grid, distributed_vs_single_view, fc_log, log_grid,
    recognize_symmetric, reproduce_fig3, reproduce_fig4, ring_sqrt, scaling_sweep, write_curves_csv, Family,
    ScalingCurve, SweepPolicy,
};
use crate::model::{
    build_fully_connected, build_hub_ring, build_line, build_ring, sensing_layout, Adjacency, NetworkSpec,
    NodeSubset,
};
use crate::numfmt::sig;
use crate::simulator::{sample_path, simulate, SimConfig, RNG_ALGORITHM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_UNBOUNDED: i32 = 4;
pub const EXIT_ASSERTION: i32 = 5;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "VERSION_AGE_LAB_THREADS";

pub const PRESETS: [&str; 5] = ["fig3", "fig4", "ring-sqrt", "fc-log", "distributed-vs-single"];

const EXIT_CODES_HELP: &str = "\
Exit codes:
  0  success
  2  invalid config or arguments
  3  capacity exceeded (e.g. exact solver node limit)
  4  unbounded age (some subset has no update path)
  5  preset slope assertion failed

Environment:
  VERSION_AGE_LAB_THREADS  cap on worker threads";

#[derive(Debug, Parser)]
#[command(
    name = "version-age-lab",
    version,
    about = "Average version age of information in gossip networks with distributed sensing",
    after_help = EXIT_CODES_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact (or closed-form) average age for subsets of one network.
    Solve(CommonArgs),
    /// Monte Carlo estimates for subsets of one network.
    Simulate(CommonArgs),
    /// Scaling sweep with log-log slope fits.
    Sweep(CommonArgs),
    /// Re-run a previous command from its manifest.
    Replay {
        /// manifest.json written by an earlier run
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub preset: Option<String>,
    /// `all`, or subsets separated by `;` with members separated by `,`, e.g. `2;0,1`
    #[arg(long)]
    pub subsets: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] AoiError),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Engine(AoiError::Capacity { .. }) => EXIT_CAPACITY,
            CliError::Engine(AoiError::Unbounded { .. }) => EXIT_UNBOUNDED,
            CliError::Engine(_) => EXIT_CONFIG,
            CliError::Assertion(_) => EXIT_ASSERTION,
            CliError::Io(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    Line,
    FullyConnected,
    /// One sensing hub (node 0) feeding a ring of `n` non-sensing nodes.
    HubRing,
    Custom,
}

/// `[topology]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub n: usize,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Sensing nodes of a line.
    #[serde(default)]
    pub sensing_positions: Option<Vec<usize>>,
    /// Custom graphs: `[[node, rate], ...]`.
    #[serde(default)]
    pub sensing: Option<Vec<(usize, f64)>>,
    /// Custom graphs: `[[from, to, rate], ...]`.
    #[serde(default)]
    pub edges: Option<Vec<(usize, usize, f64)>>,
}

impl TopologyConfig {
    pub fn build(&self) -> Result<NetworkSpec, CliError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::Config(format!("topology.{name} is required for {:?}", self.kind)))
        };
        let spec = match self.kind {
            TopologyKind::Ring => build_ring(self.n, need(self.lambda, "lambda")?, need(self.eta, "eta")?)?,
            TopologyKind::FullyConnected => {
                build_fully_connected(self.n, need(self.lambda, "lambda")?, need(self.eta, "eta")?)?
            }
            TopologyKind::HubRing => build_hub_ring(self.n, need(self.lambda, "lambda")?, need(self.eta, "eta")?)?,
            TopologyKind::Line => {
                let positions = self
                    .sensing_positions
                    .as_deref()
                    .ok_or_else(|| CliError::Config("topology.sensing_positions is required for line".into()))?;
                build_line(self.n, positions, need(self.lambda, "lambda")?, need(self.eta, "eta")?)?
            }
            TopologyKind::Custom => {
                let sensing = self
                    .sensing
                    .clone()
                    .ok_or_else(|| CliError::Config("topology.sensing is required for custom".into()))?;
                NetworkSpec::from_parts(self.n, self.edges.clone().unwrap_or_default(), sensing)?
            }
        };
        Ok(spec)
    }
}

/// `"all"` or an explicit list of subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsetSelection {
    Keyword(String),
    List(Vec<NodeSubset>),
}

impl Default for SubsetSelection {
    fn default() -> Self {
        SubsetSelection::Keyword("all".into())
    }
}

impl SubsetSelection {
    /// Parses the `--subsets` flag.
    pub fn parse_flag(raw: &str) -> Result<Self, CliError> {
        let raw = raw.trim();
        if raw == "all" {
            return Ok(SubsetSelection::default());
        }
        raw.split(';')
            .map(|part| {
                let members = part
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<usize>()
                            .map_err(|_| CliError::Config(format!("bad node index {x:?} in --subsets")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if members.iter().any(|&i| i >= crate::model::MAX_SUBSET_NODES) {
                    return Err(CliError::Config(format!("node index out of range in {part:?}")));
                }
                Ok(NodeSubset::from_members(members))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(SubsetSelection::List)
    }

    pub fn resolve(&self, n: usize) -> Result<Vec<NodeSubset>, CliError> {
        match self {
            SubsetSelection::Keyword(k) if k == "all" => {
                if n > crate::model::MAX_SUBSET_NODES {
                    return Err(CliError::Engine(AoiError::Capacity {
                        what: format!("subsets address at most {} nodes", crate::model::MAX_SUBSET_NODES),
                        limit: crate::model::MAX_SUBSET_NODES,
                    }));
                }
                Ok((0..n).map(NodeSubset::singleton).collect())
            }
            SubsetSelection::Keyword(k) => Err(CliError::Config(format!("unknown subset keyword {k:?}"))),
            SubsetSelection::List(list) => {
                for s in list {
                    if s.is_empty() || s.span() > n {
                        return Err(CliError::Config(format!("subset {s} is empty or exceeds n = {n}")));
                    }
                }
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    #[default]
    Exact,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub subsets: SubsetSelection,
    pub method: SolveMethod,
    pub max_exact_nodes: usize,
    pub line_reading: LineReading,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            subsets: SubsetSelection::default(),
            method: SolveMethod::default(),
            max_exact_nodes: DEFAULT_SUBSET_LIMIT,
            line_reading: LineReading::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub subsets: SubsetSelection,
    pub horizon: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub replications: usize,
    /// Also write `trace.csv` for this subset (first replication).
    pub trace_subset: Option<NodeSubset>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let d = SimConfig::default();
        SimulateSection {
            subsets: SubsetSelection::default(),
            horizon: d.horizon,
            burn_in: d.burn_in,
            seed: d.seed,
            replications: d.replications,
            trace_subset: None,
        }
    }
}

impl SimulateSection {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            horizon: self.horizon,
            burn_in: self.burn_in,
            seed: self.seed,
            replications: self.replications,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: usize,
    pub max: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub preset: Option<String>,
    pub grid: Option<GridSpec>,
    /// Explicit policy when no preset is named.
    pub policy: Option<SweepPolicy>,
    pub expected_slope: Option<(f64, f64)>,
}

/// Whole config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub topology: Option<TopologyConfig>,
    pub solve: SolveSection,
    pub simulate: SimulateSection,
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn apply_overrides(&mut self, args: &CommonArgs) -> Result<(), CliError> {
        if let Some(seed) = args.seed {
            self.simulate.seed = seed;
        }
        if let Some(h) = args.horizon {
            self.simulate.horizon = h;
        }
        if let Some(r) = args.replications {
            self.simulate.replications = r;
        }
        if let Some(p) = &args.preset {
            self.sweep.preset = Some(p.clone());
        }
        if let Some(raw) = &args.subsets {
            let sel = SubsetSelection::parse_flag(raw)?;
            self.solve.subsets = sel.clone();
            self.simulate.subsets = sel;
        }
        Ok(())
    }

    fn spec(&self) -> Result<NetworkSpec, CliError> {
        self.topology
            .as_ref()
            .ok_or_else(|| CliError::Config("a [topology] table is required".into()))?
            .build()
    }
}

/// Written next to every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub resolved: RunConfig,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// What a successful command produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(threads) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // fails only if a pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    match run(&cli) {
        Ok(summary) => {
            for p in &summary.outputs {
                eprintln!("wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<RunSummary, CliError> {
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Replay { manifest, out } => return replay(manifest, out),
    };
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.apply_overrides(args)?;
    let config_path = args.config.as_ref().map(|p| p.display().to_string());
    execute(name, config, config_path, &args.out)
}

fn replay(manifest: &Path, out: &Path) -> Result<RunSummary, CliError> {
    let text = fs::read_to_string(manifest)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", manifest.display())))?;
    let m: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", manifest.display())))?;
    execute(&m.command, m.resolved, m.config_path, out)
}

fn execute(command: &str, config: RunConfig, config_path: Option<String>, out: &Path) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    fs::create_dir_all(out)?;
    let result = match command {
        "solve" => cmd_solve(&config, out),
        "simulate" => cmd_simulate(&config, out),
        "sweep" => cmd_sweep(&config, out),
        other => Err(CliError::Config(format!("unknown command {other:?}")).into()),
    };
    // Outputs are written before a slope assertion fails, so the manifest
    // is written in both cases.
    let (outputs, failure) = match result {
        Ok(outputs) => (outputs, None),
        Err(CommandFailure { outputs, error }) => {
            if outputs.is_empty() {
                return Err(error);
            }
            (outputs, Some(error))
        }
    };
    let manifest = RunManifest {
        command: command.to_string(),
        config_path,
        resolved: config,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let manifest_path = out.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.into()))?,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(RunSummary {
            outputs,
            manifest: manifest_path,
        }),
    }
}

struct CommandFailure {
    outputs: Vec<PathBuf>,
    error: CliError,
}

impl<E: Into<CliError>> From<E> for CommandFailure {
    fn from(e: E) -> Self {
        CommandFailure {
            outputs: Vec::new(),
            error: e.into(),
        }
    }
}

type CommandResult = Result<Vec<PathBuf>, CommandFailure>;

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn cmd_solve(config: &RunConfig, out: &Path) -> CommandResult {
    let spec = config.spec()?;
    let subsets = config.solve.subsets.resolve(spec.n())?;
    let results = match config.solve.method {
        SolveMethod::Exact => {
            let solver = ExactSolver::build(&spec, config.solve.max_exact_nodes)?;
            subsets
                .iter()
                .map(|&s| solver.result(s))
                .collect::<Result<Vec<_>, _>>()?
        }
        SolveMethod::ClosedForm => closed_form_results(config, &spec, &subsets)?,
    };
    let path = out.join("solve.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["subset", "value", "method", "stderr", "novai"])?;
    for r in &results {
        w.write_record([
            r.subset.to_label(),
            sig(r.value),
            r.method.as_str().to_string(),
            r.stderr.map(sig).unwrap_or_default(),
            sig(novai(&spec, r)?),
        ])?;
    }
    w.flush().map_err(CliError::from)?;
    Ok(vec![path])
}

fn closed_form_results(config: &RunConfig, spec: &NetworkSpec, subsets: &[NodeSubset]) -> Result<Vec<AoiResult>, CliError> {
    let topo = config.topology.as_ref().expect("spec built");
    let (profile, method) = match topo.kind {
        TopologyKind::Line => {
            let layout = sensing_layout(spec, Adjacency::Line);
            let lambda = topo.lambda.unwrap_or_default();
            let eta = topo.eta.unwrap_or_default();
            let p = line_bound_profile(spec.n(), layout.q, layout.d, lambda, eta, config.solve.line_reading)?;
            (p, Method::ClosedFormBound)
        }
        _ => match recognize_symmetric(spec) {
            Some((Family::Ring, lambda, eta)) => (ring_profile(spec.n(), lambda, eta)?, Method::ClosedForm),
            Some((Family::FullyConnected, lambda, eta)) => {
                (fully_connected_profile(spec.n(), lambda, eta)?, Method::ClosedForm)
            }
            _ => {
                return Err(CliError::Config(
                    "closed_form needs a ring, line or fully connected topology".into(),
                ))
            }
        },
    };
    subsets
        .iter()
        .map(|&s| {
            let contiguous = s.members().zip(s.members().skip(1)).all(|(a, b)| b == a + 1)
                || topo.kind == TopologyKind::FullyConnected;
            if !contiguous {
                return Err(CliError::Config(format!(
                    "closed_form values need contiguous subsets, got {s}"
                )));
            }
            Ok(AoiResult {
                subset: s,
                value: profile.v(s.len()),
                method,
                stderr: None,
            })
        })
        .collect()
}

fn cmd_simulate(config: &RunConfig, out: &Path) -> CommandResult {
    let spec = config.spec()?;
    let subsets = config.simulate.subsets.resolve(spec.n())?;
    let sim = config.simulate.sim_config();
    let estimates = simulate(&spec, &subsets, &sim)?;

    // Built-in self-check against the exact solver when it applies.
    let exact: Vec<Option<f64>> = match ExactSolver::build(&spec, DEFAULT_SUBSET_LIMIT) {
        Ok(solver) => subsets.iter().map(|&s| solver.value(s).ok()).collect(),
        Err(_) => vec![None; subsets.len()],
    };

    let mut outputs = Vec::new();
    let path = out.join("estimates.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "subset",
        "mean",
        "stderr",
        "nonstationary",
        "replications",
        "horizon",
        "burn_in",
        "seed",
        "exact",
        "within_3se",
    ])?;
    for (e, x) in estimates.iter().zip(&exact) {
        let check = x.map(|x| (e.mean - x).abs() <= 3.0 * e.stderr);
        if check == Some(false) {
            eprintln!("self-check: subset {} outside 3 stderr of exact value", e.subset);
        }
        w.write_record([
            e.subset.to_label(),
            sig(e.mean),
            sig(e.stderr),
            e.nonstationary.to_string(),
            e.replications.to_string(),
            sig(sim.horizon),
            sig(sim.burn_in),
            sim.seed.to_string(),
            x.map(sig).unwrap_or_default(),
            check.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(CliError::from)?;
    outputs.push(path);

    if let Some(subset) = config.simulate.trace_subset {
        let trace = sample_path(&spec, &sim, subset)?;
        let path = out.join("trace.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["time", "value"])?;
        for (t, v) in trace {
            w.write_record([sig(t), v.to_string()])?;
        }
        w.flush().map_err(CliError::from)?;
        outputs.push(path);
    }
    Ok(outputs)
}

fn grid_or(config: &RunConfig, default: fn() -> Vec<usize>) -> Result<Vec<usize>, CliError> {
    match config.sweep.grid {
        Some(g) => {
            if g.min == 0 || g.max < g.min || g.points < 2 {
                return Err(CliError::Config(format!("bad sweep grid {g:?}")));
            }
            Ok(log_grid(g.min, g.max, g.points))
        }
        None => Ok(default()),
    }
}

fn preset_curves(config: &RunConfig, preset: &str) -> Result<Vec<ScalingCurve>, CliError> {
    Ok(match preset {
        "fig3" => reproduce_fig3(&grid_or(config, default_line_grid)?)?,
        "fig4" => reproduce_fig4(&grid_or(config, default_line_grid)?)?,
        "ring-sqrt" => vec![ring_sqrt(&grid_or(config, default_ring_grid)?)?],
        "fc-log" => vec![fc_log(&grid_or(config, default_fc_grid)?)?],
        "distributed-vs-single" => {
            let pair = distributed_vs_single_view(&grid_or(config, default_ring_grid)?)?;
            vec![pair.distributed, pair.single_view]
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    })
}

fn cmd_sweep(config: &RunConfig, out: &Path) -> CommandResult {
    let curves = match (&config.sweep.preset, &config.sweep.policy) {
        (Some(preset), _) => preset_curves(config, preset)?,
        (None, Some(policy)) => {
            let grid = grid_or(config, default_line_grid)?;
            let mut curve = scaling_sweep("custom", &grid, policy)?;
            curve.expected_slope = config.sweep.expected_slope;
            vec![curve]
        }
        (None, None) => return Err(CliError::Config("sweep needs --preset or [sweep.policy]".into()).into()),
    };

    let curves_path = out.join("curves.csv");
    let refs: Vec<&ScalingCurve> = curves.iter().collect();
    write_curves_csv(BufWriter::new(File::create(&curves_path)?), &refs)?;

    let slopes_path = out.join("slopes.csv");
    let mut w = csv_writer(&slopes_path)?;
    w.write_record([
        "experiment_id",
        "family",
        "policy",
        "fit_min",
        "fit_max",
        "slope",
        "expected_lo",
        "expected_hi",
        "pass",
    ])?;
    let mut failures = Vec::new();
    for c in &curves {
        let (lo, hi) = c.expected_slope.map_or((String::new(), String::new()), |(a, b)| (sig(a), sig(b)));
        let pass = c.slope_ok();
        if pass == Some(false) {
            failures.push(format!("{} slope {:?} outside {:?}", c.id, c.fitted_slope, c.expected_slope));
        }
        w.write_record([
            c.id.clone(),
            c.family.as_str().to_string(),
            c.policy.clone(),
            c.fit_window.0.to_string(),
            c.fit_window.1.to_string(),
            c.fitted_slope.map(sig).unwrap_or_default(),
            lo,
            hi,
            pass.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
        eprintln!(
            "{:<24} slope {:>8} over n in [{}, {}]",
            c.id,
            c.fitted_slope.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into()),
            c.fit_window.0,
            c.fit_window.1
        );
    }
    w.flush().map_err(CliError::from)?;

    let plot_path = out.join("plot.py");
    fs::write(&plot_path, plot_script("curves.csv"))?;

    let outputs = vec![curves_path, slopes_path, plot_path];
    if failures.is_empty() {
        Ok(outputs)
    } else {
        Err(CommandFailure {
            outputs,
            error: CliError::Assertion(failures.join("; ")),
        })
    }
}

fn plot_script(csv_name: &str) -> String {
    format!(
        r#"# Log-log plot of {csv_name}, one series per experiment_id.
import collections
import csv

import matplotlib.pyplot as plt

series = collections.defaultdict(list)
with open("{csv_name}") as f:
    for row in csv.DictReader(f):
        series[row["experiment_id"]].append((float(row["n"]), float(row["value"])))

for name, points in series.items():
    points.sort()
    xs, ys = zip(*points)
    plt.loglog(xs, ys, marker=".", label=name)
plt.xlabel("n")
plt.ylabel("average version age")
plt.legend()
plt.savefig("curves.png", dpi=150)
"#
    )
}
