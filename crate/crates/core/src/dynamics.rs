//! Closed- and open-system diffusion on a supra-Laplacian.
//!
//! The closed system `dX/dt = −L·X` is solved exactly by `X(t₀+Δt) =
//! exp(−L·Δt)·X(t₀)`. The open system adds Brownian forcing,
//! `dX = −L·X dt + Σ dB`; its conditional mean is the same drift, so point
//! prediction ignores the noise and simulation integrates it with
//! Euler–Maruyama.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent float methods when std is linked (tests)
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
pub use crate::linalg::matrix_exp;
use crate::multinet::{assemble_supra, DiffusionParam, MultilayerNetwork, SupraLaplacian};
use crate::rng;

/// `N_total × T` node states; row `i` is node `i`'s topic vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix(DMatrix<f64>);

impl StateMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid("state matrix needs at least one node and one topic"));
        }
        linalg::ensure_finite(&values, "state matrix")?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn topics(&self) -> usize {
        self.0.ncols()
    }

    /// Clamp negatives to zero and rescale every row to sum to one. Rows that
    /// clamp to all zeros become uniform. Only meant for reporting; the
    /// dynamics never renormalise.
    pub fn to_simplex(&self) -> StateMatrix {
        let mut out = self.0.map(|v| v.max(0.0));
        let t = out.ncols() as f64;
        for mut row in out.row_iter_mut() {
            let s = row.sum();
            if s > 0.0 {
                row /= s;
            } else {
                row.fill(1.0 / t);
            }
        }
        StateMatrix(out)
    }
}

/// Per-node, per-topic noise scales Σ.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec(DMatrix<f64>);

impl NoiseSpec {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("noise scales must be finite and non-negative"));
        }
        Ok(Self(sigma))
    }

    pub fn uniform(nodes: usize, topics: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(nodes, topics, scale))
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Timestamped state snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    timestamps: Vec<f64>,
    states: Vec<StateMatrix>,
    warnings: Vec<String>,
}

impl Trajectory {
    pub fn new(timestamps: Vec<f64>, states: Vec<StateMatrix>) -> Result<Self> {
        if timestamps.len() != states.len() {
            return Err(Error::invalid(format!(
                "{} timestamps for {} states",
                timestamps.len(),
                states.len()
            )));
        }
        if states.is_empty() {
            return Err(Error::invalid("trajectory is empty"));
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("trajectory timestamps"));
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "timestamps must be strictly increasing (index {})",
                w + 1
            )));
        }
        let shape = states[0].values().shape();
        if let Some(bad) = states.iter().find(|s| s.values().shape() != shape) {
            return Err(Error::DimensionMismatch {
                context: "trajectory states",
                expected: shape,
                found: bad.values().shape(),
            });
        }
        Ok(Self {
            timestamps,
            states,
            warnings: Vec::new(),
        })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn states(&self) -> &[StateMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.states[0].values().shape()
    }

    /// Diagnostics recorded while producing the trajectory.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn push_warning(&mut self, msg: String) {
        self.warnings.push(msg);
    }

    /// Sub-trajectory over the index range.
    pub fn slice(&self, range: core::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::invalid(format!(
                "slice {}..{} out of range for {} states",
                range.start,
                range.end,
                self.len()
            )));
        }
        Self::new(self.timestamps[range.clone()].to_vec(), self.states[range].to_vec())
    }

    /// Consecutive timestamps differ by exactly one step (within `1e-9`).
    pub fn has_unit_spacing(&self) -> bool {
        self.timestamps.windows(2).all(|w| ((w[1] - w[0]) - 1.0).abs() <= 1e-9)
    }
}

fn check_compatible(l: &SupraLaplacian, x: &StateMatrix) -> Result<()> {
    if l.dim() != x.nodes() {
        return Err(Error::DimensionMismatch {
            context: "operator vs state rows",
            expected: (l.dim(), x.topics()),
            found: x.values().shape(),
        });
    }
    Ok(())
}

/// Conditional-mean forecast `exp(−L·dt)·X₀`. `dt = 0` returns `X₀` untouched.
pub fn predict_drift(l: &SupraLaplacian, x0: &StateMatrix, dt: f64) -> Result<StateMatrix> {
    check_compatible(l, x0)?;
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt = {dt} must be finite and non-negative")));
    }
    if dt == 0.0 {
        return Ok(x0.clone());
    }
    let prop = matrix_exp(l.matrix(), -dt)?;
    StateMatrix::new(prop * x0.values())
}

/// Settings for [`simulate_ou`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuConfig {
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    /// Use `exp(−L·dt)` for the drift instead of the Euler step `I − dt·L`.
    pub exact_drift: bool,
}

/// Euler–Maruyama integration of `dX = −L·X dt + Σ dB`:
/// `X_{k+1} = X_k − dt·L·X_k + √dt·(Σ ∘ G_k)` with `G_k` i.i.d. standard
/// normal. Timestamps are `k·dt` for `k = 0..=steps`.
///
/// For symmetric `L` with the Euler drift, a spectral radius of `I − dt·L`
/// above one is reported through [`Trajectory::warnings`].
pub fn simulate_ou(l: &SupraLaplacian, x0: &StateMatrix, noise: &NoiseSpec, config: &OuConfig) -> Result<Trajectory> {
    check_compatible(l, x0)?;
    if noise.sigma().shape() != x0.values().shape() {
        return Err(Error::DimensionMismatch {
            context: "noise scales vs state",
            expected: x0.values().shape(),
            found: noise.sigma().shape(),
        });
    }
    if !(config.dt > 0.0) || !config.dt.is_finite() {
        return Err(Error::invalid(format!("dt = {} must be positive", config.dt)));
    }
    if config.steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }

    let n = l.dim();
    let dt = config.dt;
    let mut warnings = Vec::new();
    let propagator = if config.exact_drift {
        matrix_exp(l.matrix(), -dt)?
    } else {
        if linalg::is_symmetric(l.matrix(), 1e-12 * linalg::max_abs(l.matrix())) {
            let eig = linalg::symmetric_eigenvalues(l.matrix());
            let radius = eig.iter().map(|lam| (1.0 - dt * lam).abs()).fold(0.0, f64::max);
            if radius > 1.0 + 1e-12 {
                warnings.push(format!(
                    "Euler step amplifies: spectral radius of I - dt*L is {radius:.6} > 1 (dt = {dt})"
                ));
            }
        }
        DMatrix::identity(n, n) - l.matrix() * dt
    };

    let sqrt_dt = dt.sqrt();
    let sigma = noise.sigma();
    let mut rng = rng::seeded(config.seed);
    let mut timestamps = Vec::with_capacity(config.steps + 1);
    let mut states = Vec::with_capacity(config.steps + 1);
    timestamps.push(0.0);
    states.push(x0.clone());

    let mut x = x0.values().clone();
    for k in 1..=config.steps {
        let g = DMatrix::<f64>::from_fn(n, x.ncols(), |_, _| StandardNormal.sample(&mut rng));
        x = &propagator * &x + sigma.component_mul(&g) * sqrt_dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("simulation diverged at step {k}")));
        }
        timestamps.push(k as f64 * dt);
        states.push(StateMatrix(x.clone()));
    }

    let mut traj = Trajectory::new(timestamps, states)?;
    traj.warnings = warnings;
    Ok(traj)
}

/// Settings for [`fit_diffusion_constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Upper end of the search interval `[0, d_max]` for every constant.
    pub d_max: f64,
    /// Stop once a full coordinate round improves `g` by less than this fraction.
    pub rel_tol: f64,
    pub max_rounds: usize,
    /// Width at which a golden-section bracket is considered converged.
    pub x_tol: f64,
    /// Evenly spaced points scanned on `[0, d_max]` to pick the bracket that
    /// golden-section then refines. The objective is not unimodal in general.
    pub scan_points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            d_max: 10.0,
            rel_tol: 1e-6,
            max_rounds: 200,
            x_tol: 1e-12,
            scan_points: 41,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// The input network with the fitted constants written in.
    pub network: MultilayerNetwork,
    pub constants: Vec<(DiffusionParam, f64)>,
    /// Row `i` holds `|residual_i| / √dt` per topic.
    pub sigma: NoiseSpec,
    /// Final `‖X(t₁) − exp(−L·dt)·X(t₀)‖_F`.
    pub residual: f64,
    pub initial_residual: f64,
    /// False when the search could not beat the initial guess; the initial
    /// constants are returned unchanged in that case.
    pub improved: bool,
    pub rounds: usize,
}

/// Fit the unknown diffusion constants by coordinate-wise golden-section
/// search on `g(D) = ‖X(t₁) − exp(−L(D)·dt)·X(t₀)‖_F`, then read Σ off the
/// remaining residual.
///
/// The constants currently stored in `network` are the initial guess.
pub fn fit_diffusion_constants(
    network: &MultilayerNetwork,
    unknowns: &[DiffusionParam],
    x_t0: &StateMatrix,
    x_t1: &StateMatrix,
    dt: f64,
    config: &FitConfig,
) -> Result<FitOutcome> {
    if unknowns.is_empty() {
        return Err(Error::invalid("at least one unknown diffusion constant required"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt = {dt} must be positive")));
    }
    if x_t0.values().shape() != x_t1.values().shape() {
        return Err(Error::DimensionMismatch {
            context: "fit snapshots",
            expected: x_t0.values().shape(),
            found: x_t1.values().shape(),
        });
    }
    if x_t0.nodes() != network.total_nodes() {
        return Err(Error::DimensionMismatch {
            context: "fit snapshots vs network",
            expected: (network.total_nodes(), x_t0.topics()),
            found: x_t0.values().shape(),
        });
    }
    if !(config.d_max > 0.0) {
        return Err(Error::invalid("d_max must be positive"));
    }

    let initial: Vec<f64> = unknowns.iter().map(|&p| network.diffusion(p)).collect::<Result<_>>()?;

    let mut work = network.clone();
    let mut objective = |values: &[f64]| -> Result<f64> {
        for (&p, &v) in unknowns.iter().zip(values) {
            work.set_diffusion(p, v)?;
        }
        let l = assemble_supra(&work);
        let pred = predict_drift(&l, x_t0, dt)?;
        Ok((x_t1.values() - pred.values()).norm())
    };

    let initial_residual = objective(&initial)?;
    let mut current = initial.clone();
    let mut best = initial_residual;
    let mut rounds = 0;

    while rounds < config.max_rounds && best > 0.0 {
        rounds += 1;
        let round_start = best;
        for k in 0..unknowns.len() {
            let mut trial = current.clone();
            let (x, g) = line_search(
                |v| {
                    trial[k] = v;
                    objective(&trial)
                },
                config.d_max,
                config.scan_points,
                config.x_tol * config.d_max.max(1.0),
            )?;
            if g < best {
                best = g;
                current[k] = x;
            }
        }
        if best == 0.0 || (round_start - best) <= config.rel_tol * round_start {
            break;
        }
    }

    let improved = best < initial_residual;
    let (constants_vec, residual) = if improved {
        (current, best)
    } else {
        (initial, initial_residual)
    };

    let mut fitted = network.clone();
    for (&p, &v) in unknowns.iter().zip(&constants_vec) {
        fitted.set_diffusion(p, v)?;
    }
    let l = assemble_supra(&fitted);
    let pred = predict_drift(&l, x_t0, dt)?;
    let resid = x_t1.values() - pred.values();
    let sigma = NoiseSpec::new(resid.map(|v| v.abs() / dt.sqrt()))?;

    Ok(FitOutcome {
        network: fitted,
        constants: unknowns.iter().copied().zip(constants_vec).collect(),
        sigma,
        residual,
        initial_residual,
        improved,
        rounds,
    })
}

/// Scan `[0, hi]` on an even grid, then golden-section inside the cells
/// around the best grid point.
fn line_search(mut f: impl FnMut(f64) -> Result<f64>, hi: f64, points: usize, tol: f64) -> Result<(f64, f64)> {
    let points = points.max(3);
    let step = hi / (points - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..points {
        let g = f(i as f64 * step)?;
        if g < best.1 {
            best = (i, g);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 * step;
    let up = ((best.0 + 1).min(points - 1)) as f64 * step;
    let refined = golden_section(&mut f, lo, up, tol)?;
    let grid_best = (best.0 as f64 * step, best.1);
    Ok(if refined.1 <= grid_best.1 { refined } else { grid_best })
}

/// Golden-section minimisation on `[lo, hi]`; returns the best point seen,
/// endpoints included.
fn golden_section(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut best = (lo, f(lo)?);
    let f_hi = f(hi)?;
    if f_hi < best.1 {
        best = (hi, f_hi);
    }

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        for (x, fx) in [(c, fc), (d, fd)] {
            if fx < best.1 {
                best = (x, fx);
            }
        }
    }
    Ok(best)
}
