//! Train/test comparison of the predictors, plus the synthetic scenario
//! generator used in place of real cascade data.
//!
//! A trajectory is split in time. Every predictor starts from the last
//! training state and is scored at each test step by
//! `‖X̂ − X‖_F / ‖X‖_F`, once over all nodes and once over the nodes the
//! Kalman filter does not observe.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent float methods when std is linked (tests)
use num_traits::Float;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::dynamics::{self, NoiseSpec, OuConfig, StateMatrix, Trajectory};
use crate::error::{Error, Result};
use crate::kalman::{self, NoiseCov, ObservationMask};
use crate::laplearn::{self, LambdaEstimate, LearnConfig, StructureMode};
use crate::multinet::{assemble_supra, InterCoupling, LayerSpec, MultilayerNetwork, SupraLaplacian};
use crate::rng;

const MAX_CONNECTIVITY_RETRIES: usize = 100;

// Sub-stream tags for derive_seed.
const STREAM_GRAPH: u64 = 1;
const STREAM_STATE: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_HIDE: u64 = 4;
const STREAM_MASK: u64 = 5;

/// `‖X̂ − X‖_F / ‖X‖_F`.
pub fn normalized_frobenius_error(x_hat: &DMatrix<f64>, x_true: &DMatrix<f64>) -> Result<f64> {
    if x_hat.shape() != x_true.shape() {
        return Err(Error::DimensionMismatch {
            context: "prediction vs ground truth",
            expected: x_true.shape(),
            found: x_hat.shape(),
        });
    }
    let denom = x_true.norm();
    if !(denom > 0.0) {
        return Err(Error::invalid("ground truth has zero Frobenius norm"));
    }
    Ok((x_hat - x_true).norm() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum CouplingPattern {
    /// Each node is coupled to its own replica in every other layer.
    Identity,
    /// Each cross-layer node pair is coupled independently with this probability.
    Random(f64),
}

/// Parameters of an Erdős–Rényi multilayer scenario.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct SyntheticParams {
    pub layer_sizes: Vec<usize>,
    pub edge_probability: f64,
    pub coupling: CouplingPattern,
    /// One constant per layer.
    pub layer_diffusion: Vec<f64>,
    /// Shared by every coupled layer pair.
    pub coupling_diffusion: f64,
    /// Every entry of Σ.
    pub sigma_scale: f64,
    pub topics: usize,
    pub steps: usize,
    pub dt: f64,
    pub exact_drift: bool,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            layer_sizes: alloc::vec![20, 20],
            edge_probability: 0.15,
            coupling: CouplingPattern::Identity,
            layer_diffusion: alloc::vec![0.05, 0.05],
            coupling_diffusion: 0.05,
            sigma_scale: 0.001,
            topics: 4,
            steps: 60,
            dt: 1.0,
            exact_drift: true,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.is_empty() || self.layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive and non-empty"));
        }
        if self.layer_diffusion.len() != self.layer_sizes.len() {
            return Err(Error::invalid(format!(
                "{} layer diffusion constants given for {} layers",
                self.layer_diffusion.len(),
                self.layer_sizes.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return Err(Error::invalid("edge probability must lie in [0, 1]"));
        }
        match self.coupling {
            CouplingPattern::Identity => {
                if self.layer_sizes.iter().any(|&n| n != self.layer_sizes[0]) {
                    return Err(Error::invalid("identity coupling needs equal layer sizes"));
                }
            }
            CouplingPattern::Random(p) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid("coupling probability must lie in [0, 1]"));
                }
            }
        }
        let constants = self
            .layer_diffusion
            .iter()
            .chain([&self.coupling_diffusion, &self.sigma_scale]);
        for &c in constants {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::invalid(
                    "diffusion constants and sigma scale must be finite and non-negative",
                ));
            }
        }
        if self.topics == 0 || self.steps == 0 {
            return Err(Error::invalid("topics and steps must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be positive"));
        }
        Ok(())
    }
}

/// Sample a connected network and simulate a trajectory on it. Initial
/// topic vectors are drawn uniformly from the simplex.
pub fn generate_synthetic(params: &SyntheticParams, seed: u64) -> Result<(MultilayerNetwork, Trajectory)> {
    params.validate()?;
    let mut graph_rng = rng::seeded(rng::derive_seed(seed, STREAM_GRAPH));
    let mut attempt = 0;
    let (network, l) = loop {
        let net = sample_network(params, &mut graph_rng)?;
        let l = assemble_supra(&net);
        if l.is_connected() {
            break (net, l);
        }
        attempt += 1;
        if attempt >= MAX_CONNECTIVITY_RETRIES {
            return Err(Error::invalid(format!(
                "no connected network in {MAX_CONNECTIVITY_RETRIES} samples; raise the edge probability (now {})",
                params.edge_probability
            )));
        }
    };

    let n = l.dim();
    let t = params.topics;
    let mut state_rng = rng::seeded(rng::derive_seed(seed, STREAM_STATE));
    let mut x0 = DMatrix::from_fn(n, t, |_, _| -> f64 { Exp1.sample(&mut state_rng) });
    for mut row in x0.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }

    let noise = NoiseSpec::uniform(n, t, params.sigma_scale)?;
    let cfg = OuConfig {
        dt: params.dt,
        steps: params.steps,
        seed: rng::derive_seed(seed, STREAM_NOISE),
        exact_drift: params.exact_drift,
    };
    let trajectory = dynamics::simulate_ou(&l, &StateMatrix::new(x0)?, &noise, &cfg)?;
    Ok((network, trajectory))
}

fn sample_network(params: &SyntheticParams, rng: &mut rng::Rng) -> Result<MultilayerNetwork> {
    let mut layers = Vec::with_capacity(params.layer_sizes.len());
    for (k, (&n, &d)) in params.layer_sizes.iter().zip(&params.layer_diffusion).enumerate() {
        let mut adj = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(params.edge_probability) {
                    adj[(i, j)] = 1.0;
                    adj[(j, i)] = 1.0;
                }
            }
        }
        layers.push(LayerSpec::new(k + 1, adj, d)?);
    }
    let m = params.layer_sizes.len();
    let mut couplings = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let (na, nb) = (params.layer_sizes[a], params.layer_sizes[b]);
            let weights = match params.coupling {
                CouplingPattern::Identity => DMatrix::identity(na, nb),
                CouplingPattern::Random(p) => {
                    DMatrix::from_fn(na, nb, |_, _| if rng.random_bool(p) { 1.0 } else { 0.0 })
                }
            };
            couplings.push(InterCoupling::new(a + 1, b + 1, weights, params.coupling_diffusion)?);
        }
    }
    MultilayerNetwork::new(layers, couplings)
}

/// Drop `round(fraction·|E|)` intra-layer edges from each layer, uniformly at
/// random. Couplings are kept.
pub fn hide_edges(network: &MultilayerNetwork, fraction: f64, seed: u64) -> Result<MultilayerNetwork> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("hidden edge fraction must lie in [0, 1]"));
    }
    let mut rng = rng::seeded(seed);
    let mut out = network.clone();
    for layer in network.layers() {
        let edges = layer.edges();
        let drop = (fraction * edges.len() as f64).round() as usize;
        if drop == 0 {
            continue;
        }
        let mut adj = layer.adjacency().clone();
        for k in index::sample(&mut rng, edges.len(), drop) {
            let (i, j, _) = edges[k];
            adj[(i, j)] = 0.0;
            adj[(j, i)] = 0.0;
        }
        out = out.with_layer_adjacency(layer.id(), adj)?;
    }
    Ok(out)
}

/// A generated scenario: the network the data came from, the partial
/// network a modeller would declare, and the trajectory.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub truth: MultilayerNetwork,
    pub declared: MultilayerNetwork,
    pub trajectory: Trajectory,
}

/// [`generate_synthetic`] followed by [`hide_edges`], both driven by `seed`.
/// This is exactly the data a synthetic [`run_experiment`] sees.
pub fn synthetic_dataset(params: &SyntheticParams, hidden_edge_fraction: f64, seed: u64) -> Result<SyntheticDataset> {
    let (truth, trajectory) = generate_synthetic(params, seed)?;
    let declared = hide_edges(&truth, hidden_edge_fraction, rng::derive_seed(seed, STREAM_HIDE))?;
    Ok(SyntheticDataset {
        truth,
        declared,
        trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Predictor {
    /// Drift of the declared network, `exp(−L·Δt)·X`.
    FixedLaplacian,
    /// Open-loop iteration of the learned operator.
    LearnedLambda,
    /// Learned operator refined by partial observations.
    Kalman,
    /// `X̂ = X(last training step)`.
    Persistence,
}

impl Predictor {
    pub const ALL: [Predictor; 4] = [
        Predictor::FixedLaplacian,
        Predictor::LearnedLambda,
        Predictor::Kalman,
        Predictor::Persistence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predictor::FixedLaplacian => "fixed_laplacian",
            Predictor::LearnedLambda => "learned_lambda",
            Predictor::Kalman => "kalman",
            Predictor::Persistence => "persistence",
        }
    }
}

/// How the learned operator advances one unit step, both open loop and
/// inside the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Propagator {
    /// `F = I + Λ̂`.
    #[default]
    FirstOrder,
    /// `F = exp(Λ̂)`, the map the learning rule fits.
    Exponential,
}

impl Propagator {
    pub fn transition(self, lambda: &LambdaEstimate) -> Result<DMatrix<f64>> {
        match self {
            Propagator::FirstOrder => Ok(kalman::make_transition(lambda)),
            Propagator::Exponential => lambda.propagator(),
        }
    }
}

/// Rule for picking the observed nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Selection {
    /// Uniform without replacement.
    #[default]
    Uniform,
    /// Without replacement, with probability proportional to weighted degree.
    HubBiased,
}

/// Source of the filter's process-noise covariance `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum ProcessNoise {
    /// Sample covariance of the training residuals.
    #[default]
    Empirical,
    /// Its diagonal only.
    Diagonal,
}

impl ProcessNoise {
    /// `Q` from one-step residuals.
    pub fn estimate(self, residuals: &[DVector<f64>]) -> Result<DMatrix<f64>> {
        let q = laplearn::residual_covariance(residuals)?;
        Ok(match self {
            ProcessNoise::Empirical => q,
            ProcessNoise::Diagonal => DMatrix::from_diagonal(&q.diagonal()),
        })
    }
}

/// Filter covariance at the first test step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum InitialCovariance {
    /// `s·I`.
    Scaled(f64),
    /// `Q`: the prior `F·x̄(last)` carries one step of process noise.
    ProcessNoise,
}

impl InitialCovariance {
    pub fn matrix(self, q: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            InitialCovariance::Scaled(s) => DMatrix::identity(q.nrows(), q.nrows()) * s,
            InitialCovariance::ProcessNoise => q.clone(),
        }
    }
}

impl Default for InitialCovariance {
    fn default() -> Self {
        InitialCovariance::Scaled(1.0)
    }
}

/// Everything about a run except where the data comes from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct ExperimentOptions {
    /// Leading fraction of timestamps used for learning.
    pub train_fraction: f64,
    pub predictors: Vec<Predictor>,
    pub observation_fraction: f64,
    pub selection: Selection,
    pub seed: u64,
    pub learn: LearnConfig,
    pub structure_mode: StructureMode,
    pub propagator: Propagator,
    pub process_noise: ProcessNoise,
    pub p0: InitialCovariance,
    /// Observation noise is `r_scale·I`.
    pub r_scale: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            predictors: alloc::vec![Predictor::FixedLaplacian, Predictor::LearnedLambda, Predictor::Kalman],
            observation_fraction: 0.25,
            selection: Selection::Uniform,
            seed: 0,
            learn: LearnConfig {
                gamma: 0.05,
                max_iters: 60,
                ..LearnConfig::default()
            },
            structure_mode: StructureMode::KronConstrained,
            propagator: Propagator::FirstOrder,
            process_noise: ProcessNoise::Diagonal,
            p0: InitialCovariance::ProcessNoise,
            r_scale: kalman::DEFAULT_R_SCALE,
        }
    }
}

impl ExperimentOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.observation_fraction) {
            return Err(Error::invalid("observation fraction must lie in [0, 1]"));
        }
        if let InitialCovariance::Scaled(s) = self.p0 {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::invalid(
                    "initial covariance scale must be finite and non-negative",
                ));
            }
        }
        if !(self.r_scale >= 1e-12) || !self.r_scale.is_finite() {
            return Err(Error::invalid("r_scale must be finite and at least 1e-12"));
        }
        self.learn.validate()
    }
}

#[derive(Debug, Clone)]
pub enum DataSource {
    /// Generate with the experiment seed; the declared network is the true
    /// one with a fraction of its intra-layer edges removed.
    Synthetic {
        params: SyntheticParams,
        hidden_edge_fraction: f64,
    },
    /// A declared network and an observed trajectory.
    Provided {
        network: MultilayerNetwork,
        trajectory: Trajectory,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub options: ExperimentOptions,
    /// Skip learning and use this operator for the learned predictors.
    pub pretrained: Option<LambdaEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorRow {
    pub predictor: Predictor,
    /// 1-based test step.
    pub step: usize,
    pub error_all: f64,
    /// `None` when every node is observed.
    pub error_unobserved: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictorSummary {
    pub predictor: Predictor,
    pub mean_all: f64,
    pub mean_unobserved: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnSummary {
    pub sweeps: usize,
    pub converged: bool,
    pub gamma: f64,
    pub halvings: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<ErrorRow>,
    pub summary: Vec<PredictorSummary>,
    /// 0-based global indices.
    pub observed_nodes: Vec<usize>,
    pub train_len: usize,
    pub test_len: usize,
    pub learn: Option<LearnSummary>,
    pub lambda: Option<LambdaEstimate>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn mean(&self, predictor: Predictor) -> Option<&PredictorSummary> {
        self.summary.iter().find(|s| s.predictor == predictor)
    }
}

/// Number of leading timestamps used for training: `⌊fraction·len⌋`, which
/// must leave at least two for training and one for testing.
pub fn split_point(len: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }
    let train = (train_fraction * len as f64).floor() as usize;
    let test = len.saturating_sub(train);
    if train < 2 || test < 1 {
        return Err(Error::invalid(format!(
            "split of {len} timestamps leaves {train} for training and {test} for testing; need at least 2 and 1"
        )));
    }
    Ok(train)
}

/// Split, fit, predict and score. Persistence is always included.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let opts = &config.options;
    opts.validate()?;

    let (declared, trajectory) = match &config.source {
        DataSource::Synthetic {
            params,
            hidden_edge_fraction,
        } => {
            let data = synthetic_dataset(params, *hidden_edge_fraction, opts.seed)?;
            (data.declared, data.trajectory)
        }
        DataSource::Provided { network, trajectory } => (network.clone(), trajectory.clone()),
    };
    let l = assemble_supra(&declared);
    let (nodes, topics) = trajectory.shape();
    if l.dim() != nodes {
        return Err(Error::DimensionMismatch {
            context: "network vs trajectory nodes",
            expected: (l.dim(), topics),
            found: (nodes, topics),
        });
    }

    let train_len = split_point(trajectory.len(), opts.train_fraction)?;
    let test_len = trajectory.len() - train_len;
    let train = trajectory.slice(0..train_len)?;
    let times = trajectory.timestamps();
    let last = &trajectory.states()[train_len - 1];
    let truth: Vec<&DMatrix<f64>> = trajectory.states()[train_len..]
        .iter()
        .map(StateMatrix::values)
        .collect();

    let mask = select_observed(&l, topics, opts.observation_fraction, opts.selection, opts.seed)?;
    let unobserved = mask.unobserved();

    let mut wanted: Vec<Predictor> = opts.predictors.clone();
    wanted.push(Predictor::Persistence);
    wanted.sort_unstable();
    wanted.dedup();

    let needs_lambda = wanted.contains(&Predictor::LearnedLambda) || wanted.contains(&Predictor::Kalman);
    let mut learn_summary = None;
    let mut learned = None;
    let mut residuals = Vec::new();
    if needs_lambda {
        let lambda = match &config.pretrained {
            Some(lambda) => {
                residuals = laplearn::one_step_residuals(lambda, &train)?;
                lambda.clone()
            }
            None => {
                let lambda0 = LambdaEstimate::from_laplacian(&l, topics, opts.structure_mode)?;
                let initial_residual = laplearn::one_step_error(&lambda0, &train)?;
                let outcome = laplearn::learn_lambda(&train, &lambda0, &opts.learn)?;
                learn_summary = Some(LearnSummary {
                    sweeps: outcome.sweeps,
                    converged: outcome.converged,
                    gamma: outcome.gamma,
                    halvings: outcome.halvings,
                    initial_residual,
                    final_residual: outcome.final_residual(),
                });
                residuals = outcome.residuals;
                outcome.lambda
            }
        };
        learned = Some(lambda);
    }

    let mut predictions: Vec<(Predictor, Vec<DMatrix<f64>>)> = Vec::new();
    for &p in &wanted {
        let preds = match p {
            Predictor::Persistence => truth.iter().map(|_| last.values().clone()).collect(),
            Predictor::FixedLaplacian => fixed_predictions(&l, last, &times[train_len - 1..])?,
            Predictor::LearnedLambda => {
                let f = opts
                    .propagator
                    .transition(learned.as_ref().expect("lambda available"))?;
                open_loop(&f, last, truth.len())
            }
            Predictor::Kalman => {
                let lambda = learned.as_ref().expect("lambda available");
                let f = opts.propagator.transition(lambda)?;
                let q = opts.process_noise.estimate(&residuals)?;
                let p0 = opts.p0.matrix(&q);
                let noise = NoiseCov::with_isotropic_r(q, &mask, opts.r_scale)?;
                let x0 = &f * laplearn::vectorize(last);
                let observations: Vec<DVector<f64>> = truth
                    .iter()
                    .map(|x| mask.observe(&DVector::from_column_slice(x.as_slice())))
                    .collect();
                kalman::run_filter_with_transition(&f, &x0, &p0, &mask, &noise, &observations)?
                    .into_iter()
                    .map(|s| DMatrix::from_column_slice(nodes, topics, s.x_post.as_slice()))
                    .collect()
            }
        };
        predictions.push((p, preds));
    }

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (p, preds) in &predictions {
        let mut sum_all = 0.0;
        let mut sum_unobs = 0.0;
        for (k, (x_hat, x)) in preds.iter().zip(&truth).enumerate() {
            let error_all = normalized_frobenius_error(x_hat, x)?;
            let error_unobserved = if unobserved.is_empty() {
                None
            } else {
                Some(normalized_frobenius_error(
                    &x_hat.select_rows(&unobserved),
                    &x.select_rows(&unobserved),
                )?)
            };
            sum_all += error_all;
            sum_unobs += error_unobserved.unwrap_or(0.0);
            rows.push(ErrorRow {
                predictor: *p,
                step: k + 1,
                error_all,
                error_unobserved,
            });
        }
        let count = preds.len() as f64;
        summary.push(PredictorSummary {
            predictor: *p,
            mean_all: sum_all / count,
            mean_unobserved: (!unobserved.is_empty()).then(|| sum_unobs / count),
        });
    }

    Ok(ExperimentReport {
        rows,
        summary,
        observed_nodes: mask.observed().to_vec(),
        train_len,
        test_len,
        learn: learn_summary,
        lambda: learned,
        warnings: trajectory.warnings().to_vec(),
    })
}

fn fixed_predictions(l: &SupraLaplacian, last: &StateMatrix, times: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let t0 = times[0];
    times[1..]
        .iter()
        .map(|&t| dynamics::predict_drift(l, last, t - t0).map(StateMatrix::into_inner))
        .collect()
}

fn open_loop(f: &DMatrix<f64>, last: &StateMatrix, steps: usize) -> Vec<DMatrix<f64>> {
    let (n, t) = (last.nodes(), last.topics());
    let mut x = laplearn::vectorize(last);
    (0..steps)
        .map(|_| {
            x = f * &x;
            DMatrix::from_column_slice(n, t, x.as_slice())
        })
        .collect()
}

/// Observe `⌈fraction·N⌉` nodes drawn from the mask stream of `seed`.
pub fn select_observed(
    l: &SupraLaplacian,
    topics: usize,
    fraction: f64,
    selection: Selection,
    seed: u64,
) -> Result<ObservationMask> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("observation fraction must lie in [0, 1]"));
    }
    let n = l.dim();
    let count = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut rng = rng::seeded(rng::derive_seed(seed, STREAM_MASK));
    let chosen: Vec<usize> = match selection {
        Selection::Uniform => index::sample(&mut rng, n, count).into_vec(),
        Selection::HubBiased => {
            // Exponential keys: the `count` smallest E_i / w_i are a weighted
            // sample without replacement.
            let mut keyed: Vec<(f64, usize)> = (0..n)
                .map(|i| {
                    let w = l.matrix()[(i, i)].max(0.0) + 1e-12;
                    let e: f64 = Exp1.sample(&mut rng);
                    (e / w, i)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            keyed.into_iter().take(count).map(|(_, i)| i).collect()
        }
    };
    ObservationMask::new(n, topics, chosen)
}
