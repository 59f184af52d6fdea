use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use supradiff_core::dynamics::{self, simulate_ou, NoiseSpec, OuConfig, StateMatrix, Trajectory};
use supradiff_core::evalharness::{
    self, select_observed, synthetic_dataset, DataSource, ExperimentConfig, ExperimentOptions, ExperimentReport,
    InitialCovariance, LearnSummary, Predictor, PredictorSummary, ProcessNoise, Propagator, Selection, SyntheticParams,
};
use supradiff_core::kalman::{self, NoiseCov, ObservationMask};
use supradiff_core::laplearn::{self, LambdaEstimate, LearnConfig, StructureMode};
use supradiff_core::multinet::{assemble_supra, MultilayerNetwork, SupraLaplacian};

use crate::error::{CliError, Result};
use crate::formats::{self, LambdaMeta};
use crate::manifest::RunManifest;

/// The one environment variable consulted: default for `--output-dir`.
pub const OUTPUT_DIR_ENV: &str = "SUPRADIFF_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "supradiff", version, about = "Information diffusion on multilayer networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Primary input file
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Where outputs go [default: $SUPRADIFF_OUTPUT_DIR, else .]
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
    /// Master seed; required by stochastic subcommands
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON configuration file; unknown keys are rejected
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble the supra-Laplacian of a network file (--input network.json)
    Build(BuildArgs),
    /// Simulate the stochastic diffusion from an initial state (--input network.json)
    Simulate(SimulateArgs),
    /// Learn the effective operator from a trajectory (--input trajectory.csv)
    Learn(LearnArgs),
    /// Drift every state of a file forward by --dt (--input states.csv)
    Predict(PredictArgs),
    /// Filter a partially observed trajectory (--input trajectory.csv)
    Kalman(KalmanArgs),
    /// Score the predictors on synthetic or provided data
    Eval(EvalArgs),
    /// Generate a synthetic network pair and trajectory
    Gen(GenArgs),
    /// Rerun a command from its manifest (--input manifest.json)
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// States file; its first timestamp is the initial state
    #[arg(long)]
    pub states: PathBuf,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initialize from this network's operator instead of zero
    #[arg(long)]
    pub network: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dt: f64,
    /// Drift with this network's Laplacian
    #[arg(long, conflicts_with = "lambda", required_unless_present = "lambda")]
    pub network: Option<PathBuf>,
    /// Propagate with exp(dt·Λ) of a learned operator
    #[arg(long)]
    pub lambda: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KalmanArgs {
    #[command(flatten)]
    pub common: Common,
    /// Learned operator CSV with its JSON sidecar
    #[arg(long)]
    pub lambda: PathBuf,
    /// Observed nodes; sampled from --seed when absent
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Fully known history that sets the prior and the process noise
    #[arg(long)]
    pub train: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Declared network for a provided trajectory (--input)
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Use this operator instead of learning one
    #[arg(long)]
    pub lambda: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Build(_) => "build",
            Command::Simulate(_) => "simulate",
            Command::Learn(_) => "learn",
            Command::Predict(_) => "predict",
            Command::Kalman(_) => "kalman",
            Command::Eval(_) => "eval",
            Command::Gen(_) => "gen",
            Command::Replay(_) => "replay",
        }
    }

    fn common_mut(&mut self) -> Option<&mut Common> {
        match self {
            Command::Build(a) => Some(&mut a.common),
            Command::Simulate(a) => Some(&mut a.common),
            Command::Learn(a) => Some(&mut a.common),
            Command::Predict(a) => Some(&mut a.common),
            Command::Kalman(a) => Some(&mut a.common),
            Command::Eval(a) => Some(&mut a.common),
            Command::Gen(a) => Some(&mut a.common),
            Command::Replay(_) => None,
        }
    }
}

// ----------------------------------------------------------------- configs

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub dt: f64,
    pub steps: usize,
    pub exact_drift: bool,
    /// Noise scale shared by every (node, topic).
    pub sigma: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            steps: 100,
            exact_drift: false,
            sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnCommandConfig {
    /// Leading fraction of the trajectory to learn from; 1 uses all of it.
    pub train_fraction: f64,
    pub structure_mode: StructureMode,
    pub learn: LearnConfig,
}

impl Default for LearnCommandConfig {
    fn default() -> Self {
        let opts = ExperimentOptions::default();
        Self {
            train_fraction: opts.train_fraction,
            structure_mode: opts.structure_mode,
            learn: opts.learn,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanCommandConfig {
    pub observation_fraction: f64,
    pub selection: Selection,
    pub propagator: Propagator,
    pub process_noise: ProcessNoise,
    pub p0: InitialCovariance,
    pub r_scale: f64,
}

impl Default for KalmanCommandConfig {
    fn default() -> Self {
        let opts = ExperimentOptions::default();
        Self {
            observation_fraction: opts.observation_fraction,
            selection: opts.selection,
            propagator: opts.propagator,
            process_noise: opts.process_noise,
            p0: opts.p0,
            r_scale: opts.r_scale,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub scenario: SyntheticParams,
    pub hidden_edge_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            scenario: SyntheticParams::default(),
            hidden_edge_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub scenario: SyntheticParams,
    pub hidden_edge_fraction: f64,
    /// Synthetic runs use seeds `seed, seed + 1, …`.
    pub replications: usize,
    /// `seed` here is replaced by `--seed`.
    pub options: ExperimentOptions,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let gen = GenConfig::default();
        Self {
            scenario: gen.scenario,
            hidden_edge_fraction: gen.hidden_edge_fraction,
            replications: 1,
            options: ExperimentOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub seed: u64,
    pub observed_nodes: Vec<usize>,
    pub train_len: usize,
    pub test_len: usize,
    pub learn: Option<LearnSummary>,
    pub summary: Vec<PredictorSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    /// Means over steps, then over replications.
    pub predictors: Vec<PredictorSummary>,
    /// Predictor names from lowest to highest mean error over all nodes.
    pub ordering: Vec<String>,
    pub replications: Vec<ReplicationSummary>,
    pub warnings: Vec<String>,
    pub config: Value,
}

// ------------------------------------------------------------------ running

struct Run {
    out_dir: PathBuf,
    seed: Option<u64>,
    config: Value,
    config_override: Option<Value>,
    inputs: BTreeMap<String, PathBuf>,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

impl Run {
    fn input(&mut self, role: &str, path: &Path) -> PathBuf {
        self.inputs.insert(role.to_string(), path.to_path_buf());
        path.to_path_buf()
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        formats::write_text(&self.out_dir.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn seed(&self, why: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| CliError::validation(format!("--seed is required {why}")))
    }

    fn config<T: DeserializeOwned + Serialize + Default>(&mut self, path: Option<&Path>) -> Result<T> {
        let parsed: T = match (self.config_override.take(), path) {
            (Some(value), _) => serde_path_to_error::deserialize(value)
                .map_err(|e| CliError::validation(format!("manifest config: at `{}`: {}", e.path(), e.inner())))?,
            (None, Some(path)) => {
                self.inputs.insert("config".into(), path.to_path_buf());
                formats::read_json(path)?
            }
            (None, None) => T::default(),
        };
        self.config = serde_json::to_value(&parsed).expect("config serializes");
        Ok(parsed)
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::validation(format!("{command} needs {flag}")))
}

fn output_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(dir) => dir.to_path_buf(),
        None => std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from),
    }
}

/// Parse `args` (program name first), run, and map the outcome to an exit
/// code: 0 success, 1 invalid input, 2 numerical failure, 3 I/O.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let recorded = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli.command, recorded) {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Run one command. `args` is what gets recorded for replay.
pub fn run(command: Command, args: Vec<String>) -> Result<RunManifest> {
    match command {
        Command::Replay(replay) => {
            let manifest = RunManifest::read(&replay.input)?;
            let argv = std::iter::once("supradiff".to_string()).chain(manifest.args.iter().cloned());
            let mut command = Cli::try_parse_from(argv)
                .map_err(|e| CliError::validation(format!("manifest args: {}", e.kind())))?
                .command;
            let common = command
                .common_mut()
                .ok_or_else(|| CliError::validation("a replay manifest cannot be replayed"))?;
            common.output_dir = Some(replay.output_dir.unwrap_or(manifest.output_dir));
            execute(command, manifest.args, Some(manifest.config))
        }
        command => execute(command, args, None),
    }
}

fn execute(mut command: Command, args: Vec<String>, config_override: Option<Value>) -> Result<RunManifest> {
    let start = Instant::now();
    let name = command.name();
    let common = command.common_mut().expect("not a replay").clone();
    let mut run = Run {
        out_dir: output_dir(common.output_dir.as_deref()),
        seed: common.seed,
        config: Value::Null,
        config_override,
        inputs: BTreeMap::new(),
        outputs: Vec::new(),
        warnings: Vec::new(),
    };
    match &command {
        Command::Build(_) => build(&common, &mut run)?,
        Command::Simulate(a) => simulate(&common, a, &mut run)?,
        Command::Learn(a) => learn(&common, a, &mut run)?,
        Command::Predict(a) => predict(&common, a, &mut run)?,
        Command::Kalman(a) => kalman(&common, a, &mut run)?,
        Command::Eval(a) => eval(&common, a, &mut run)?,
        Command::Gen(_) => gen(&common, &mut run)?,
        Command::Replay(_) => unreachable!("handled by run"),
    }
    let manifest = RunManifest {
        subcommand: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: run.seed,
        config: run.config,
        inputs: run.inputs,
        output_dir: run.out_dir,
        outputs: run.outputs,
        args,
        duration_seconds: start.elapsed().as_secs_f64(),
        warnings: run.warnings,
    };
    manifest.write()?;
    Ok(manifest)
}

// -------------------------------------------------------------- subcommands

fn build(common: &Common, run: &mut Run) -> Result<()> {
    let path = run.input("network", required(&common.input, "--input", "build")?);
    let net = formats::read_network(&path)?;
    let l = assemble_supra(&net);
    if !l.is_connected() {
        run.warnings.push("the network is not connected".into());
    }
    run.write("laplacian.csv", &formats::matrix_to_csv(l.matrix()))?;
    run.write("index_map.json", &formats::to_json(&formats::index_map(net.layout())))
}

fn simulate(common: &Common, args: &SimulateArgs, run: &mut Run) -> Result<()> {
    let cfg: SimulateConfig = run.config(common.config.as_deref())?;
    let seed = run.seed("to simulate")?;
    let net = formats::read_network(&run.input("network", required(&common.input, "--input", "simulate")?))?;
    let x0 = formats::read_states(&run.input("states", &args.states))?.states()[0].clone();
    let l = assemble_supra(&net);
    let noise = NoiseSpec::uniform(x0.nodes(), x0.topics(), cfg.sigma)?;
    let ou = OuConfig {
        dt: cfg.dt,
        steps: cfg.steps,
        seed,
        exact_drift: cfg.exact_drift,
    };
    let traj = simulate_ou(&l, &x0, &noise, &ou)?;
    run.warnings.extend(traj.warnings().iter().cloned());
    run.write("trajectory.csv", &formats::states_to_csv(&traj))
}

fn check_nodes(l: &SupraLaplacian, traj: &Trajectory, what: &str) -> Result<()> {
    if l.dim() != traj.shape().0 {
        return Err(CliError::validation(format!(
            "{what} has {} nodes but the network has {}",
            traj.shape().0,
            l.dim()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: &LambdaEstimate, traj: &Trajectory, what: &str) -> Result<()> {
    if (lambda.nodes(), lambda.topics()) != traj.shape() {
        return Err(CliError::validation(format!(
            "{what} is {:?} (nodes, topics) but the operator is {:?}",
            traj.shape(),
            (lambda.nodes(), lambda.topics())
        )));
    }
    Ok(())
}

fn learn(common: &Common, args: &LearnArgs, run: &mut Run) -> Result<()> {
    let cfg: LearnCommandConfig = run.config(common.config.as_deref())?;
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
        return Err(CliError::validation("train_fraction must lie in (0, 1]"));
    }
    let traj = formats::read_states(&run.input("trajectory", required(&common.input, "--input", "learn")?))?;
    run.warnings.extend(traj.warnings().iter().cloned());
    let train = if cfg.train_fraction < 1.0 {
        traj.slice(0..evalharness::split_point(traj.len(), cfg.train_fraction)?)?
    } else {
        traj
    };
    let (nodes, topics) = train.shape();
    let lambda0 = match &args.network {
        Some(path) => {
            let l = assemble_supra(&formats::read_network(&run.input("network", path))?);
            check_nodes(&l, &train, "the trajectory")?;
            LambdaEstimate::from_laplacian(&l, topics, cfg.structure_mode)?
        }
        None => LambdaEstimate::zeros(nodes, topics, cfg.structure_mode)?,
    };
    let outcome = laplearn::learn_lambda(&train, &lambda0, &cfg.learn)?;
    if !outcome.converged {
        run.warnings.push(format!(
            "stopped after {} sweeps without meeting the tolerance",
            outcome.sweeps
        ));
    }
    let meta = LambdaMeta {
        n: nodes,
        t_dim: topics,
        structure_mode: cfg.structure_mode,
        sweeps: outcome.sweeps,
        final_residual: outcome.final_residual(),
    };
    run.write("lambda.csv", &formats::matrix_to_csv(outcome.lambda.matrix()))?;
    run.write("lambda.json", &formats::to_json(&meta))?;
    let mut history = String::from("sweep,residual\n");
    for (k, r) in outcome.residual_series.iter().enumerate() {
        history.push_str(&format!("{},{r:.16e}\n", k + 1));
    }
    run.write("learn_history.csv", &history)
}

fn predict(common: &Common, args: &PredictArgs, run: &mut Run) -> Result<()> {
    if !(args.dt >= 0.0) || !args.dt.is_finite() {
        return Err(CliError::validation(format!(
            "--dt {} must be finite and non-negative",
            args.dt
        )));
    }
    let traj = formats::read_states(&run.input("states", required(&common.input, "--input", "predict")?))?;
    let states: Vec<StateMatrix> = match (&args.network, &args.lambda) {
        (Some(path), _) => {
            let l = assemble_supra(&formats::read_network(&run.input("network", path))?);
            check_nodes(&l, &traj, "the states file")?;
            traj.states()
                .iter()
                .map(|x| dynamics::predict_drift(&l, x, args.dt))
                .collect::<supradiff_core::Result<_>>()?
        }
        (None, Some(path)) => {
            let (lambda, _) = formats::read_lambda(&run.input("lambda", path))?;
            check_lambda(&lambda, &traj, "the states file")?;
            let prop = dynamics::matrix_exp(lambda.matrix(), args.dt)?;
            let (n, t) = traj.shape();
            traj.states()
                .iter()
                .map(|x| laplearn::devectorize(&(&prop * laplearn::vectorize(x)), n, t))
                .collect::<supradiff_core::Result<_>>()?
        }
        (None, None) => return Err(CliError::validation("predict needs --network or --lambda")),
    };
    let times = traj.timestamps().iter().map(|t| t + args.dt).collect();
    let out = Trajectory::new(times, states)?;
    run.write("predictions.csv", &formats::states_to_csv(&out))
}

fn kalman(common: &Common, args: &KalmanArgs, run: &mut Run) -> Result<()> {
    let cfg: KalmanCommandConfig = run.config(common.config.as_deref())?;
    let traj = formats::read_states(&run.input("trajectory", required(&common.input, "--input", "kalman")?))?;
    let (lambda, _) = formats::read_lambda(&run.input("lambda", &args.lambda))?;
    check_lambda(&lambda, &traj, "the trajectory")?;
    let (nodes, topics) = traj.shape();

    let mask = match &args.mask {
        Some(path) => ObservationMask::new(nodes, topics, formats::read_mask(&run.input("mask", path), nodes)?)?,
        None => {
            let seed = run.seed("to sample observed nodes (or pass --mask)")?;
            // Hub weights come from the diagonal of the first topic block.
            let l = SupraLaplacian::from_matrix(-lambda.matrix().view((0, 0), (nodes, nodes)).into_owned())?;
            select_observed(&l, topics, cfg.observation_fraction, cfg.selection, seed)?
        }
    };

    // Without a training history the first timestamp is the known start
    // and residuals come from the whole input.
    let (history, filtered, residual_source) = match &args.train {
        Some(path) => {
            let train = formats::read_states(&run.input("train", path))?;
            check_lambda(&lambda, &train, "the training trajectory")?;
            (train.clone(), traj, train)
        }
        None => {
            if traj.len() < 2 {
                return Err(CliError::validation(
                    "without --train the trajectory needs at least two timestamps",
                ));
            }
            (traj.slice(0..1)?, traj.slice(1..traj.len())?, traj)
        }
    };
    let residuals = laplearn::one_step_residuals(&lambda, &residual_source)?;

    let f = cfg.propagator.transition(&lambda)?;
    let q = cfg.process_noise.estimate(&residuals)?;
    let p0 = cfg.p0.matrix(&q);
    let noise = NoiseCov::with_isotropic_r(q, &mask, cfg.r_scale)?;
    let last = history.states().last().expect("non-empty");
    let x0 = &f * laplearn::vectorize(last);
    let observations: Vec<_> = filtered
        .states()
        .iter()
        .map(|x| mask.observe(&laplearn::vectorize(x)))
        .collect();
    let steps = kalman::run_filter_with_transition(&f, &x0, &p0, &mask, &noise, &observations)?;

    run.write(
        "filter.csv",
        &formats::filter_to_csv(filtered.timestamps(), &steps, nodes, topics),
    )?;
    run.write("mask.json", &formats::mask_to_json(mask.observed()))
}

fn eval(common: &Common, args: &EvalArgs, run: &mut Run) -> Result<()> {
    let cfg: EvalConfig = run.config(common.config.as_deref())?;
    let seed = run.seed("to choose observed nodes and data")?;
    if cfg.replications == 0 {
        return Err(CliError::validation("replications must be at least 1"));
    }

    let pretrained = match &args.lambda {
        Some(path) => Some(formats::read_lambda(&run.input("lambda", path))?.0),
        None => None,
    };
    let source = match &common.input {
        Some(path) => {
            if cfg.replications != 1 {
                return Err(CliError::validation("replications apply to synthetic data only"));
            }
            let trajectory = formats::read_states(&run.input("trajectory", path))?;
            let network_path = required(&args.network, "--network", "eval with --input")?;
            let network: MultilayerNetwork = formats::read_network(&run.input("network", network_path))?;
            if let Some(lambda) = &pretrained {
                check_lambda(lambda, &trajectory, "the trajectory")?;
            }
            DataSource::Provided { network, trajectory }
        }
        None => DataSource::Synthetic {
            params: cfg.scenario.clone(),
            hidden_edge_fraction: cfg.hidden_edge_fraction,
        },
    };

    let mut reports: Vec<(u64, ExperimentReport)> = Vec::with_capacity(cfg.replications);
    for r in 0..cfg.replications {
        let rep_seed = seed.wrapping_add(r as u64);
        let config = ExperimentConfig {
            source: source.clone(),
            options: ExperimentOptions {
                seed: rep_seed,
                ..cfg.options.clone()
            },
            pretrained: pretrained.clone(),
        };
        let report = evalharness::run_experiment(&config)
            .map_err(|e| CliError::from(e).context(format_args!("seed {rep_seed}")))?;
        reports.push((rep_seed, report));
    }

    let only_reports: Vec<ExperimentReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    let rows = formats::average_rows(&only_reports);
    let predictors = average_summaries(&only_reports);
    let mut ordering: Vec<&PredictorSummary> = predictors.iter().collect();
    ordering.sort_by(|a, b| a.mean_all.total_cmp(&b.mean_all));
    let mut warnings: Vec<String> = Vec::new();
    for (_, r) in &reports {
        for w in &r.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    run.warnings.extend(warnings.iter().cloned());

    let summary = EvalSummary {
        ordering: ordering.iter().map(|s| s.predictor.name().to_string()).collect(),
        predictors: predictors.clone(),
        replications: reports
            .into_iter()
            .map(|(seed, r)| ReplicationSummary {
                seed,
                observed_nodes: r.observed_nodes.iter().map(|i| i + 1).collect(),
                train_len: r.train_len,
                test_len: r.test_len,
                learn: r.learn,
                summary: r.summary,
            })
            .collect(),
        warnings,
        config: run.config.clone(),
    };
    run.write("errors.csv", &formats::errors_to_csv(&rows))?;
    run.write("summary.json", &formats::to_json(&summary))
}

fn average_summaries(reports: &[ExperimentReport]) -> Vec<PredictorSummary> {
    let count = reports.len() as f64;
    reports[0]
        .summary
        .iter()
        .enumerate()
        .map(|(idx, s)| PredictorSummary {
            predictor: s.predictor,
            mean_all: reports.iter().map(|r| r.summary[idx].mean_all).sum::<f64>() / count,
            mean_unobserved: reports
                .iter()
                .map(|r| r.summary[idx].mean_unobserved)
                .sum::<Option<f64>>()
                .map(|v| v / count),
        })
        .collect()
}

fn gen(common: &Common, run: &mut Run) -> Result<()> {
    let cfg: GenConfig = run.config(common.config.as_deref())?;
    let seed = run.seed("to generate data")?;
    let data = synthetic_dataset(&cfg.scenario, cfg.hidden_edge_fraction, seed)?;
    run.warnings.extend(data.trajectory.warnings().iter().cloned());
    run.write(
        "network_true.json",
        &formats::to_json(&formats::NetworkFile::from_network(&data.truth)),
    )?;
    run.write(
        "network.json",
        &formats::to_json(&formats::NetworkFile::from_network(&data.declared)),
    )?;
    run.write("trajectory.csv", &formats::states_to_csv(&data.trajectory))
}

/// Mean error of `predictor` in an eval summary, for callers that only need
/// the headline number.
pub fn summary_mean(summary: &EvalSummary, predictor: Predictor) -> Option<f64> {
    summary
        .predictors
        .iter()
        .find(|s| s.predictor == predictor)
        .map(|s| s.mean_all)
}
