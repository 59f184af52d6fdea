//! Learning the vectorized diffusion operator `Λ̂` from a trajectory.
//!
//! With `x̄ = vec(X)` (column-major, so topic blocks are stacked), the drift
//! `−L·X` becomes `Λ·x̄` with `Λ = I_T ⊗ (−L)`. Starting from that structure
//! the estimate is refined pair by pair:
//!
//! ```text
//! x̂ = exp(Λ̂)·x̄(t)
//! ε = x̄(t+1) − x̂
//! Λ̂ ← Λ̂ + γ·ε·x̄(t)ᵀ
//! ```
//!
//! The step is the gradient of `½‖ε‖²` with respect to the one-step
//! propagator, applied to `Λ̂` itself; no correction through the exponential
//! is made.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent float methods when std is linked (tests)
use num_traits::Float;

use crate::dynamics::{StateMatrix, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{self, matrix_exp};
use crate::multinet::SupraLaplacian;

/// Ridge added to empirical residual covariances.
pub const COVARIANCE_RIDGE: f64 = 1e-9;

/// Smallest learning rate the divergence guard will halve down to.
const GAMMA_FLOOR: f64 = 1e-12;

/// `vec(X)`: column-major stacking, all nodes' topic 1 first.
pub fn vectorize(x: &StateMatrix) -> DVector<f64> {
    DVector::from_column_slice(x.values().as_slice())
}

pub fn devectorize(x: &DVector<f64>, nodes: usize, topics: usize) -> Result<StateMatrix> {
    if nodes == 0 || topics == 0 || x.len() != nodes * topics {
        return Err(Error::invalid(format!(
            "vector of length {} cannot be reshaped to {nodes}x{topics}",
            x.len()
        )));
    }
    StateMatrix::new(DMatrix::from_column_slice(nodes, topics, x.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum StructureMode {
    /// Unconstrained `NT × NT` operator.
    #[default]
    Full,
    /// Restricted to `I_T ⊗ A`; updates are projected by averaging the
    /// diagonal blocks.
    KronConstrained,
}

/// The learned `NT × NT` operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEstimate {
    matrix: DMatrix<f64>,
    nodes: usize,
    topics: usize,
    mode: StructureMode,
}

impl LambdaEstimate {
    pub fn new(matrix: DMatrix<f64>, nodes: usize, topics: usize, mode: StructureMode) -> Result<Self> {
        let dim = nodes * topics;
        if dim == 0 || matrix.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                context: "lambda estimate",
                expected: (dim, dim),
                found: matrix.shape(),
            });
        }
        linalg::ensure_finite(&matrix, "lambda estimate")?;
        if mode == StructureMode::KronConstrained {
            let block = matrix.view((0, 0), (nodes, nodes)).into_owned();
            if linalg::block_diag_repeat(&block, topics) != matrix {
                return Err(Error::invalid("matrix is not of the form I_T ⊗ A"));
            }
        }
        Ok(Self {
            matrix,
            nodes,
            topics,
            mode,
        })
    }

    /// `I_T ⊗ (−L)`, the operator implied by an explicit network.
    pub fn from_laplacian(l: &SupraLaplacian, topics: usize, mode: StructureMode) -> Result<Self> {
        if topics == 0 {
            return Err(Error::invalid("topic count must be positive"));
        }
        let block = -l.matrix();
        Ok(Self {
            matrix: linalg::block_diag_repeat(&block, topics),
            nodes: l.dim(),
            topics,
            mode,
        })
    }

    pub fn zeros(nodes: usize, topics: usize, mode: StructureMode) -> Result<Self> {
        Self::new(DMatrix::zeros(nodes * topics, nodes * topics), nodes, topics, mode)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn dim(&self) -> usize {
        self.nodes * self.topics
    }

    pub fn mode(&self) -> StructureMode {
        self.mode
    }

    /// The shared `N × N` block in kron-constrained mode.
    pub fn block(&self) -> Option<DMatrix<f64>> {
        (self.mode == StructureMode::KronConstrained)
            .then(|| self.matrix.view((0, 0), (self.nodes, self.nodes)).into_owned())
    }

    /// One-step propagator `exp(Λ̂)`.
    pub fn propagator(&self) -> Result<DMatrix<f64>> {
        match self.block() {
            Some(a) => Ok(linalg::block_diag_repeat(&matrix_exp(&a, 1.0)?, self.topics)),
            None => matrix_exp(&self.matrix, 1.0),
        }
    }
}

/// Replace `m` by `I_T ⊗ A`, `A` the mean of its `T` diagonal `N × N` blocks.
pub fn project_kron(m: &DMatrix<f64>, nodes: usize, topics: usize) -> DMatrix<f64> {
    linalg::block_diag_repeat(&mean_diagonal_block(m, nodes, topics), topics)
}

fn mean_diagonal_block(m: &DMatrix<f64>, nodes: usize, topics: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(nodes, nodes);
    for k in 0..topics {
        acc += m.view((k * nodes, k * nodes), (nodes, nodes));
    }
    acc / topics as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct LearnConfig {
    /// Learning rate γ.
    pub gamma: f64,
    /// Convergence threshold η on every pair's `‖ε‖₂`; `None` means `1e-4·√(NT)`.
    pub eta: Option<f64>,
    /// Maximum number of sweeps over the pairs.
    pub max_iters: usize,
    /// Consecutive sweeps of rising mean residual before γ is halved.
    pub divergence_patience: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            eta: None,
            max_iters: 500,
            divergence_patience: 5,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be positive"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(Error::invalid("eta must be positive"));
            }
        }
        if self.max_iters == 0 || self.divergence_patience == 0 {
            return Err(Error::invalid("max_iters and divergence_patience must be positive"));
        }
        Ok(())
    }

    pub fn eta_for(&self, dim: usize) -> f64 {
        self.eta.unwrap_or(1e-4 * (dim as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub lambda: LambdaEstimate,
    /// Mean `‖ε‖₂` over the pairs of each sweep.
    pub residual_series: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Learning rate after any halvings.
    pub gamma: f64,
    pub halvings: usize,
    /// Per-pair residuals of the final operator over the whole trajectory.
    pub residuals: Vec<DVector<f64>>,
}

impl LearnOutcome {
    pub fn final_residual(&self) -> f64 {
        mean_norm(&self.residuals)
    }
}

fn mean_norm(v: &[DVector<f64>]) -> f64 {
    v.iter().map(|e| e.norm()).sum::<f64>() / v.len() as f64
}

/// One-step residuals `x̄(t+1) − exp(Λ̂)·x̄(t)` for every consecutive pair.
pub fn one_step_residuals(lambda: &LambdaEstimate, trajectory: &Trajectory) -> Result<Vec<DVector<f64>>> {
    check_trajectory(lambda, trajectory)?;
    let prop = lambda.propagator()?;
    let xs: Vec<_> = trajectory.states().iter().map(vectorize).collect();
    Ok(xs.windows(2).map(|w| &w[1] - &prop * &w[0]).collect())
}

/// Mean one-step prediction error of `Λ̂` on the trajectory.
pub fn one_step_error(lambda: &LambdaEstimate, trajectory: &Trajectory) -> Result<f64> {
    Ok(mean_norm(&one_step_residuals(lambda, trajectory)?))
}

fn check_trajectory(lambda: &LambdaEstimate, trajectory: &Trajectory) -> Result<()> {
    if trajectory.len() < 2 {
        return Err(Error::invalid("learning needs at least two timestamps"));
    }
    if !trajectory.has_unit_spacing() {
        return Err(Error::invalid("learning assumes unit spacing between timestamps"));
    }
    let (n, t) = trajectory.shape();
    if (n, t) != (lambda.nodes, lambda.topics) {
        return Err(Error::DimensionMismatch {
            context: "trajectory vs lambda",
            expected: (lambda.nodes, lambda.topics),
            found: (n, t),
        });
    }
    Ok(())
}

/// Sweep the trajectory's consecutive pairs in time order, updating `Λ̂`
/// after each pair, until every pair of a sweep has `‖ε‖₂ < η` or
/// `max_iters` sweeps have run.
///
/// When the sweep-mean residual rises for `divergence_patience` sweeps in a
/// row, γ is halved; a non-finite sweep is rolled back and also halves γ.
/// Once γ drops below `1e-12` the run aborts.
pub fn learn_lambda(trajectory: &Trajectory, lambda0: &LambdaEstimate, config: &LearnConfig) -> Result<LearnOutcome> {
    config.validate()?;
    check_trajectory(lambda0, trajectory)?;

    let nodes = lambda0.nodes;
    let topics = lambda0.topics;
    let eta = config.eta_for(lambda0.dim());
    let states: Vec<&DMatrix<f64>> = trajectory.states().iter().map(StateMatrix::values).collect();
    let xs: Vec<DVector<f64>> = trajectory.states().iter().map(vectorize).collect();

    // Kron-constrained runs keep only the shared block: exp(I⊗A) = I⊗exp(A),
    // and the projected rank-one update reduces to (γ/T)·E·Xᵀ.
    let mut op = match lambda0.mode {
        StructureMode::Full => lambda0.matrix.clone(),
        StructureMode::KronConstrained => mean_diagonal_block(&lambda0.matrix, nodes, topics),
    };

    let mut gamma = config.gamma;
    let mut halvings = 0;
    let mut series = Vec::new();
    let mut rising = 0;
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < config.max_iters {
        let snapshot = op.clone();
        let mut total = 0.0;
        let mut all_below = true;
        let mut finite = true;

        for k in 0..states.len() - 1 {
            let prop = match matrix_exp(&op, 1.0) {
                Ok(p) => p,
                Err(Error::NonFinite(_)) | Err(Error::Numerical(_)) => {
                    finite = false;
                    break;
                }
                Err(e) => return Err(e),
            };
            let norm = match lambda0.mode {
                StructureMode::Full => {
                    let eps = &xs[k + 1] - &prop * &xs[k];
                    op.ger(gamma, &eps, &xs[k], 1.0);
                    eps.norm()
                }
                StructureMode::KronConstrained => {
                    let eps = states[k + 1] - &prop * states[k];
                    op.gemm(gamma / topics as f64, &eps, &states[k].transpose(), 1.0);
                    eps.norm()
                }
            };
            if !norm.is_finite() {
                finite = false;
                break;
            }
            total += norm;
            all_below &= norm < eta;
        }
        sweeps += 1;

        if !finite || op.iter().any(|v| !v.is_finite()) {
            op = snapshot;
            gamma = halve(gamma, &mut halvings)?;
            rising = 0;
            continue;
        }

        let mean = total / (states.len() - 1) as f64;
        if let Some(&prev) = series.last() {
            if mean > prev {
                rising += 1;
            } else {
                rising = 0;
            }
        }
        series.push(mean);
        if all_below {
            converged = true;
            break;
        }
        if rising >= config.divergence_patience {
            gamma = halve(gamma, &mut halvings)?;
            rising = 0;
        }
    }

    let matrix = match lambda0.mode {
        StructureMode::Full => op,
        StructureMode::KronConstrained => linalg::block_diag_repeat(&op, topics),
    };
    let lambda = LambdaEstimate::new(matrix, nodes, topics, lambda0.mode)?;
    let residuals = one_step_residuals(&lambda, trajectory)?;
    Ok(LearnOutcome {
        lambda,
        residual_series: series,
        sweeps,
        converged,
        gamma,
        halvings,
        residuals,
    })
}

fn halve(gamma: f64, halvings: &mut usize) -> Result<f64> {
    let next = gamma * 0.5;
    *halvings += 1;
    if next < GAMMA_FLOOR {
        return Err(Error::numerical(format!(
            "learning diverged: gamma fell below {GAMMA_FLOOR:e} after {halvings} halvings"
        )));
    }
    Ok(next)
}

/// `(1/(k−1))·Σ (ε − ε̄)(ε − ε̄)ᵀ`, symmetrised, plus `1e-9·I`.
pub fn residual_covariance(residuals: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    if residuals.len() < 2 {
        return Err(Error::invalid("residual covariance needs at least two residuals"));
    }
    let dim = residuals[0].len();
    if let Some(bad) = residuals.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "residual vectors",
            expected: (dim, 1),
            found: (bad.len(), 1),
        });
    }
    let k = residuals.len();
    let mut stacked = DMatrix::zeros(dim, k);
    for (j, r) in residuals.iter().enumerate() {
        stacked.set_column(j, r);
    }
    let mean = stacked.column_mean();
    for mut col in stacked.column_iter_mut() {
        col -= &mean;
    }
    let mut cov = &stacked * stacked.transpose() / (k - 1) as f64;
    linalg::symmetrize(&mut cov);
    for i in 0..dim {
        cov[(i, i)] += COVARIANCE_RIDGE;
    }
    linalg::ensure_finite(&cov, "residual covariance")?;
    Ok(cov)
}
