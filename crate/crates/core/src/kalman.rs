//! Discrete Kalman predictor over the vectorized state.
//!
//! State and observation models, with unit time steps:
//!
//! ```text
//! x̄(t+1) = F·x̄(t) + w̄(t),   F = I + Λ̂,   E[w̄w̄ᵀ] = Q
//! ȳ(t)   = S·x̄(t) + v̄(t),                 E[v̄v̄ᵀ] = R
//! ```
//!
//! `S` selects the coordinates of observed nodes (all topics of each). The
//! update works in that reduced space, which equals the textbook form with
//! `𝓗 = I_T ⊗ H` restricted to its non-zero rows and keeps `R_e`
//! invertible.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::laplearn::LambdaEstimate;
use crate::linalg;

/// Default observation-noise variance: observations are treated as near-exact.
pub const DEFAULT_R_SCALE: f64 = 1e-6;

/// `R_e` condition numbers above this are rejected.
const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Which nodes are observed. Observing a node observes all its topics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    nodes: usize,
    topics: usize,
    observed: Vec<usize>,
}

impl ObservationMask {
    /// `observed` holds 0-based global node indices; duplicates are merged.
    pub fn new(nodes: usize, topics: usize, observed: impl IntoIterator<Item = usize>) -> Result<Self> {
        if nodes == 0 || topics == 0 {
            return Err(Error::invalid("mask needs positive node and topic counts"));
        }
        let mut observed: Vec<usize> = observed.into_iter().collect();
        observed.sort_unstable();
        observed.dedup();
        if let Some(&bad) = observed.iter().find(|&&i| i >= nodes) {
            return Err(Error::invalid(format!(
                "observed node {bad} out of range for {nodes} nodes"
            )));
        }
        Ok(Self {
            nodes,
            topics,
            observed,
        })
    }

    pub fn all(nodes: usize, topics: usize) -> Result<Self> {
        Self::new(nodes, topics, 0..nodes)
    }

    pub fn none(nodes: usize, topics: usize) -> Result<Self> {
        Self::new(nodes, topics, core::iter::empty())
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn unobserved(&self) -> Vec<usize> {
        (0..self.nodes).filter(|i| !self.is_observed(*i)).collect()
    }

    pub fn is_observed(&self, node: usize) -> bool {
        self.observed.binary_search(&node).is_ok()
    }

    /// `m = T·|observed|`.
    pub fn observed_dim(&self) -> usize {
        self.topics * self.observed.len()
    }

    /// Positions in `vec(X)` of the observed coordinates, topic-major, i.e.
    /// the order of the non-zero rows of `I_T ⊗ H`.
    pub fn coordinates(&self) -> Vec<usize> {
        (0..self.topics)
            .flat_map(|k| self.observed.iter().map(move |&i| k * self.nodes + i))
            .collect()
    }

    /// `N × N` diagonal indicator `H`.
    pub fn h_matrix(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.nodes, self.nodes);
        for &i in &self.observed {
            h[(i, i)] = 1.0;
        }
        h
    }

    /// `𝓗 = I_T ⊗ H`, `NT × NT`.
    pub fn script_h(&self) -> DMatrix<f64> {
        linalg::block_diag_repeat(&self.h_matrix(), self.topics)
    }

    /// `m × NT` selector `S`: the non-zero rows of `𝓗`.
    pub fn selector(&self) -> DMatrix<f64> {
        let coords = self.coordinates();
        let mut s = DMatrix::zeros(coords.len(), self.nodes * self.topics);
        for (row, &c) in coords.iter().enumerate() {
            s[(row, c)] = 1.0;
        }
        s
    }

    /// `S·x̄`.
    pub fn observe(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.observed_dim(), self.coordinates().into_iter().map(|c| x[c]))
    }
}

/// Process noise `Q` (`NT × NT`) and observation noise `R` (`m × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCov {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl NoiseCov {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        check_covariance(&q, "Q", -1e-9)?;
        if r.nrows() > 0 {
            check_covariance(&r, "R", 1e-12)?;
        } else if r.ncols() != 0 {
            return Err(Error::invalid("R must be square"));
        }
        Ok(Self { q, r })
    }

    /// `Q` with `R = r_scale·I` over the mask's observed coordinates.
    pub fn with_isotropic_r(q: DMatrix<f64>, mask: &ObservationMask, r_scale: f64) -> Result<Self> {
        let m = mask.observed_dim();
        Self::new(q, DMatrix::identity(m, m) * r_scale)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
}

fn check_covariance(m: &DMatrix<f64>, name: &'static str, min_eig: f64) -> Result<()> {
    linalg::ensure_square(m, name)?;
    linalg::ensure_finite(m, name)?;
    let tol = 1e-12 * linalg::max_abs(m).max(1.0);
    if linalg::symmetry_defect(m) > tol {
        return Err(Error::invalid(format!("{name} is not symmetric")));
    }
    if m.nrows() > 0 {
        let lowest = linalg::symmetric_eigenvalues(m)[0];
        if lowest < min_eig {
            return Err(Error::invalid(format!(
                "{name} has eigenvalue {lowest:e} below {min_eig:e}"
            )));
        }
    }
    Ok(())
}

/// Mean and covariance of the state, either predicted (`t|t−1`) or
/// filtered (`t|t`) depending on where it sits in the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl KalmanState {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.shape() != (mean.len(), mean.len()) {
            return Err(Error::DimensionMismatch {
                context: "kalman covariance",
                expected: (mean.len(), mean.len()),
                found: covariance.shape(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kalman mean"));
        }
        check_covariance(&covariance, "state covariance", -1e-8)?;
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `F = I + Λ̂`.
pub fn make_transition(lambda: &LambdaEstimate) -> DMatrix<f64> {
    let n = lambda.dim();
    DMatrix::identity(n, n) + lambda.matrix()
}

/// Measurement update with the observed values `y` (ordered as
/// [`ObservationMask::coordinates`]).
pub fn kalman_update(
    state: &KalmanState,
    y: &DVector<f64>,
    mask: &ObservationMask,
    noise: &NoiseCov,
) -> Result<KalmanState> {
    let m = mask.observed_dim();
    if state.dim() != mask.nodes() * mask.topics() {
        return Err(Error::DimensionMismatch {
            context: "state vs mask",
            expected: (mask.nodes() * mask.topics(), 1),
            found: (state.dim(), 1),
        });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            context: "observation vector",
            expected: (m, 1),
            found: (y.len(), 1),
        });
    }
    if noise.r.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "R vs observed coordinates",
            expected: (m, m),
            found: noise.r.shape(),
        });
    }
    if m == 0 {
        return Ok(state.clone());
    }

    let coords = mask.coordinates();
    let p = &state.covariance;
    // S·P: the observed rows of P.
    let sp = DMatrix::from_fn(m, p.ncols(), |i, j| p[(coords[i], j)]);
    let mut r_e = &noise.r + linalg::principal_submatrix(p, &coords);
    linalg::symmetrize(&mut r_e);

    let eig = SymmetricEigen::new(r_e.clone()).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || hi / lo > MAX_INNOVATION_CONDITION {
        return Err(Error::numerical(format!(
            "innovation covariance R_e is numerically singular (eigenvalues in [{lo:e}, {hi:e}]); use a larger R"
        )));
    }
    let chol = Cholesky::new(r_e)
        .ok_or_else(|| Error::numerical("innovation covariance R_e is not positive definite; use a larger R"))?;

    // Kᵀ = R_e⁻¹·S·P
    let gain_t = chol.solve(&sp);
    let innovation = y - mask.observe(&state.mean);
    let mean = &state.mean + gain_t.tr_mul(&innovation);
    let mut covariance = p - gain_t.tr_mul(&sp);
    linalg::symmetrize(&mut covariance);
    Ok(KalmanState { mean, covariance })
}

/// Time update: `x ← F·x`, `P ← F·P·Fᵀ + Q`.
pub fn kalman_predict(state: &KalmanState, transition: &DMatrix<f64>, noise: &NoiseCov) -> Result<KalmanState> {
    let n = state.dim();
    if transition.shape() != (n, n) || noise.q.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "transition / Q vs state",
            expected: (n, n),
            found: if transition.shape() != (n, n) {
                transition.shape()
            } else {
                noise.q.shape()
            },
        });
    }
    let mean = transition * &state.mean;
    let mut covariance = transition * &state.covariance * transition.transpose() + &noise.q;
    linalg::symmetrize(&mut covariance);
    if mean.iter().any(|v| !v.is_finite()) || covariance.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("kalman prediction produced non-finite values"));
    }
    Ok(KalmanState { mean, covariance })
}

/// One step of [`run_filter`].
#[derive(Debug, Clone)]
pub struct FilterStep {
    /// `x̂_{t|t}`
    pub x_post: DVector<f64>,
    /// `x̂_{t+1|t}`
    pub x_pred_next: DVector<f64>,
    /// `Π_{t|t}`
    pub p_post: DMatrix<f64>,
    /// `Π_{t+1|t}`
    pub p_pred_next: DMatrix<f64>,
    /// `y_t − S·x̂_{t|t−1}`
    pub innovation: DVector<f64>,
}

/// Alternate update and predict over the observation series with `F = I + Λ̂`.
/// `x0`, `p0` are the prior for the first observation time.
pub fn run_filter(
    lambda: &LambdaEstimate,
    x0: &DVector<f64>,
    p0: &DMatrix<f64>,
    mask: &ObservationMask,
    noise: &NoiseCov,
    observations: &[DVector<f64>],
) -> Result<Vec<FilterStep>> {
    run_filter_with_transition(&make_transition(lambda), x0, p0, mask, noise, observations)
}

/// [`run_filter`] with an explicit transition matrix.
pub fn run_filter_with_transition(
    transition: &DMatrix<f64>,
    x0: &DVector<f64>,
    p0: &DMatrix<f64>,
    mask: &ObservationMask,
    noise: &NoiseCov,
    observations: &[DVector<f64>],
) -> Result<Vec<FilterStep>> {
    let mut state = KalmanState::new(x0.clone(), p0.clone())?;
    let mut steps = Vec::with_capacity(observations.len());
    for y in observations {
        let innovation = if y.len() == mask.observed_dim() {
            y - mask.observe(&state.mean)
        } else {
            DVector::zeros(0)
        };
        let post = kalman_update(&state, y, mask, noise)?;
        let next = kalman_predict(&post, transition, noise)?;
        steps.push(FilterStep {
            x_post: post.mean,
            x_pred_next: next.mean.clone(),
            p_post: post.covariance,
            p_pred_next: next.covariance.clone(),
            innovation,
        });
        state = next;
    }
    Ok(steps)
}
