mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use supradiff_core::kalman::{
    kalman_predict, kalman_update, make_transition, run_filter, run_filter_with_transition, KalmanState, NoiseCov,
    ObservationMask,
};
use supradiff_core::laplearn::{LambdaEstimate, StructureMode};
use supradiff_core::linalg;
use supradiff_core::multinet::{assemble_supra, SupraLaplacian};
use supradiff_core::nalgebra::{Cholesky, DMatrix, DVector};

fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

fn random_mask(rng: &mut ChaCha8Rng, nodes: usize, topics: usize) -> ObservationMask {
    let observed: Vec<usize> = (0..nodes).filter(|_| rng.random_bool(0.5)).collect();
    ObservationMask::new(nodes, topics, observed).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, cov: &DMatrix<f64>) -> DVector<f64> {
    let n = cov.nrows();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    Cholesky::new(cov.clone()).unwrap().l() * z
}

/// A stable transition: `I − c·L` for a connected Laplacian scaled so that
/// the spectrum of `c·L` lies in `[0, 1]`.
fn stable_lambda(seed: u64, topics: usize) -> LambdaEstimate {
    let l = assemble_supra(&common::connected_network(seed, 2, 4));
    let top = linalg::symmetric_eigenvalues(l.matrix()).max();
    let scaled = SupraLaplacian::from_matrix(l.matrix() / top).unwrap();
    LambdaEstimate::from_laplacian(&scaled, topics, StructureMode::Full).unwrap()
}

/// The full-𝓗 update with `R` embedded on observed coordinates and a
/// pseudo-inverse of the singular `R_e`.
fn full_h_update(state: &KalmanState, y: &DVector<f64>, mask: &ObservationMask, r: &DMatrix<f64>) -> KalmanState {
    let dim = state.dim();
    let h = mask.script_h();
    let coords = mask.coordinates();
    let mut r_full = DMatrix::zeros(dim, dim);
    let mut y_full = DVector::zeros(dim);
    for (a, &ca) in coords.iter().enumerate() {
        y_full[ca] = y[a];
        for (b, &cb) in coords.iter().enumerate() {
            r_full[(ca, cb)] = r[(a, b)];
        }
    }
    let p = &state.covariance;
    let r_e = &r_full + &h * p * h.transpose();
    let gain = p * h.transpose() * r_e.pseudo_inverse(1e-12).unwrap();
    let mean = &state.mean + &gain * (y_full - &h * &state.mean);
    let covariance = p - &gain * &h * p;
    KalmanState { mean, covariance }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduced_update_equals_full_h_update(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let nodes = rng.random_range(1..=3);
        let topics = rng.random_range(1..=2);
        let dim = nodes * topics;
        let mask = random_mask(&mut rng, nodes, topics);
        let m = mask.observed_dim();
        let r = random_spd(&mut rng, m, 0.1);
        let noise = NoiseCov::new(DMatrix::zeros(dim, dim), r.clone()).unwrap();
        let prior = KalmanState::new(
            DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
            random_spd(&mut rng, dim, 0.1),
        ).unwrap();
        let y = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let got = kalman_update(&prior, &y, &mask, &noise).unwrap();
        let want = full_h_update(&prior, &y, &mask, &r);
        prop_assert!((got.mean - want.mean).amax() < 1e-9);
        prop_assert!((got.covariance - want.covariance).amax() < 1e-9);
    }

    #[test]
    fn update_never_increases_trace(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let nodes = rng.random_range(1..=4);
        let topics = rng.random_range(1..=3);
        let dim = nodes * topics;
        let mask = random_mask(&mut rng, nodes, topics);
        let noise = NoiseCov::with_isotropic_r(DMatrix::zeros(dim, dim), &mask, rng.random_range(1e-3..1.0)).unwrap();
        let prior = KalmanState::new(DVector::zeros(dim), random_spd(&mut rng, dim, 0.01)).unwrap();
        let y = DVector::from_fn(mask.observed_dim(), |_, _| rng.random_range(-1.0..1.0));
        let post = kalman_update(&prior, &y, &mask, &noise).unwrap();
        prop_assert!(post.covariance.trace() <= prior.covariance.trace() + 1e-9);
    }
}

#[test]
fn covariance_stays_psd() {
    for seed in 0..50 {
        let mut rng = common::rng(seed);
        let lambda = stable_lambda(seed, 2);
        let dim = lambda.dim();
        let mask = random_mask(&mut rng, lambda.nodes(), 2);
        let q = random_spd(&mut rng, dim, 0.0) * 0.01;
        let noise = NoiseCov::with_isotropic_r(q, &mask, 1e-6).unwrap();
        let f = make_transition(&lambda);
        let mut state = KalmanState::new(DVector::zeros(dim), DMatrix::identity(dim, dim)).unwrap();
        for _ in 0..200 {
            let y = DVector::from_fn(mask.observed_dim(), |_, _| rng.random_range(-1.0..1.0));
            let post = kalman_update(&state, &y, &mask, &noise).unwrap();
            for p in [&post.covariance, &state.covariance] {
                assert!(linalg::symmetry_defect(p) < 1e-10);
                assert!(linalg::symmetric_eigenvalues(p)[0] >= -1e-8, "seed {seed}");
            }
            state = kalman_predict(&post, &f, &noise).unwrap();
        }
    }
}

#[test]
fn lyapunov_fixed_point() {
    let mut rng = common::rng(8);
    let f = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-0.3..0.3));
    let q = random_spd(&mut rng, 4, 0.1);
    let noise = NoiseCov::new(q.clone(), DMatrix::zeros(0, 0)).unwrap();
    let mut state = KalmanState::new(DVector::zeros(4), DMatrix::identity(4, 4)).unwrap();
    for _ in 0..100 {
        state = kalman_predict(&state, &f, &noise).unwrap();
    }
    let p = &state.covariance;
    assert!((&f * p * f.transpose() + q - p).amax() < 1e-6);
}

#[test]
fn transition_of_stable_laplacian_is_contractive() {
    for seed in 0..20 {
        let lambda = stable_lambda(seed, 1);
        let f = make_transition(&lambda);
        let rho = linalg::symmetric_eigenvalues(&f)
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(rho <= 1.0 + 1e-12);
    }
}

#[test]
fn noiseless_full_observation_tracks_truth() {
    let lambda = stable_lambda(2, 2);
    let dim = lambda.dim();
    let f = make_transition(&lambda);
    let mask = ObservationMask::all(lambda.nodes(), 2).unwrap();
    let noise = NoiseCov::with_isotropic_r(DMatrix::zeros(dim, dim), &mask, 1e-12).unwrap();
    let mut rng = common::rng(2);
    let mut x = DVector::from_fn(dim, |_, _| rng.random::<f64>());
    let mut truth = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..20 {
        ys.push(mask.observe(&x));
        truth.push(x.clone());
        x = &f * &x;
    }
    let x0 = DVector::zeros(dim);
    let steps = run_filter(&lambda, &x0, &DMatrix::identity(dim, dim), &mask, &noise, &ys).unwrap();
    for (s, x) in steps.iter().zip(&truth) {
        assert!((&s.x_post - x).amax() < 1e-8);
    }
}

#[test]
fn blind_filter_is_open_loop() {
    let lambda = stable_lambda(4, 2);
    let dim = lambda.dim();
    let f = make_transition(&lambda);
    let mask = ObservationMask::none(lambda.nodes(), 2).unwrap();
    let noise = NoiseCov::with_isotropic_r(DMatrix::identity(dim, dim) * 0.01, &mask, 1e-6).unwrap();
    let mut rng = common::rng(4);
    let x0 = DVector::from_fn(dim, |_, _| rng.random::<f64>());
    let ys = vec![DVector::zeros(0); 30];
    let steps = run_filter(&lambda, &x0, &DMatrix::identity(dim, dim), &mask, &noise, &ys).unwrap();
    let mut x = x0.clone();
    for s in &steps {
        assert!((&s.x_post - &x).amax() < 1e-9);
        x = &f * &x;
        assert!((&s.x_pred_next - &x).amax() < 1e-9);
    }
}

#[test]
fn innovations_are_white() {
    let mut total = 0.0;
    let seeds = 50;
    for seed in 0..seeds {
        let mut rng = common::rng(1000 + seed);
        let lambda = stable_lambda(seed, 1);
        let dim = lambda.dim();
        let f = make_transition(&lambda);
        let mask = ObservationMask::new(lambda.nodes(), 1, (0..lambda.nodes()).step_by(2)).unwrap();
        let q = random_spd(&mut rng, dim, 0.05) * 0.1;
        let r = DMatrix::identity(mask.observed_dim(), mask.observed_dim()) * 0.1;
        let noise = NoiseCov::new(q.clone(), r.clone()).unwrap();

        let mut x = gaussian(&mut rng, &DMatrix::identity(dim, dim));
        let mut ys = Vec::new();
        for _ in 0..200 {
            ys.push(mask.observe(&x) + gaussian(&mut rng, &r));
            x = &f * &x + gaussian(&mut rng, &q);
        }
        let steps = run_filter_with_transition(
            &f,
            &DVector::zeros(dim),
            &DMatrix::identity(dim, dim),
            &mask,
            &noise,
            &ys,
        )
        .unwrap();
        // Skip the transient from the diffuse prior.
        let innov: Vec<&DVector<f64>> = steps[20..].iter().map(|s| &s.innovation).collect();
        let mut acc = 0.0;
        for c in 0..mask.observed_dim() {
            let series: Vec<f64> = innov.iter().map(|e| e[c]).collect();
            let mean = series.iter().sum::<f64>() / series.len() as f64;
            let var: f64 = series.iter().map(|v| (v - mean).powi(2)).sum();
            let lag: f64 = series.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
            acc += lag / var;
        }
        total += acc / mask.observed_dim() as f64;
    }
    let mean_autocorr = total / seeds as f64;
    assert!(mean_autocorr.abs() < 0.1, "lag-1 autocorrelation {mean_autocorr}");
}
