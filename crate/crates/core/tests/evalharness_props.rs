use proptest::prelude::*;
use supradiff_core::dynamics::predict_drift;
use supradiff_core::evalharness::{
    generate_synthetic, normalized_frobenius_error, run_experiment, DataSource, ExperimentConfig, ExperimentOptions,
    Predictor, SyntheticParams,
};
use supradiff_core::laplearn::LearnConfig;
use supradiff_core::multinet::assemble_supra;
use supradiff_core::nalgebra::DMatrix;

fn matrix(n: usize, t: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-5.0f64..5.0, n * t).prop_map(move |v| DMatrix::from_vec(n, t, v))
}

fn small_params() -> SyntheticParams {
    SyntheticParams {
        layer_sizes: vec![5, 5],
        edge_probability: 0.6,
        layer_diffusion: vec![0.1, 0.2],
        topics: 2,
        steps: 16,
        ..SyntheticParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn error_is_homogeneous_in_the_perturbation(
        (x, d) in (1usize..5, 1usize..4).prop_flat_map(|(n, t)| (matrix(n, t), matrix(n, t))),
        c in 0.0f64..10.0,
    ) {
        prop_assume!(x.norm() > 1e-3);
        let e1 = normalized_frobenius_error(&(&x + &d), &x).unwrap();
        let ec = normalized_frobenius_error(&(&x + &d * c), &x).unwrap();
        prop_assert!((ec - c * e1).abs() <= 1e-9 * (1.0 + c * e1));
    }
}

#[test]
fn noiseless_synthetic_follows_the_drift_semigroup() {
    let params = SyntheticParams {
        sigma_scale: 0.0,
        ..small_params()
    };
    let (net, traj) = generate_synthetic(&params, 21).unwrap();
    let l = assemble_supra(&net);
    let states = traj.states();
    for k in 0..states.len() - 2 {
        let two = predict_drift(&l, &states[k], 2.0).unwrap();
        assert!((two.values() - states[k + 2].values()).amax() < 1e-12);
    }
}

#[test]
fn experiment_is_bit_reproducible_and_always_has_persistence() {
    let config = |seed| ExperimentConfig {
        source: DataSource::Synthetic {
            params: small_params(),
            hidden_edge_fraction: 0.3,
        },
        options: ExperimentOptions {
            seed,
            predictors: vec![Predictor::LearnedLambda],
            learn: LearnConfig {
                max_iters: 10,
                ..ExperimentOptions::default().learn
            },
            ..ExperimentOptions::default()
        },
        pretrained: None,
    };
    let a = run_experiment(&config(7)).unwrap();
    let b = run_experiment(&config(7)).unwrap();
    let bits = |r: &supradiff_core::evalharness::ExperimentReport| {
        r.rows
            .iter()
            .map(|row| {
                (
                    row.predictor,
                    row.step,
                    row.error_all.to_bits(),
                    row.error_unobserved.map(f64::to_bits),
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.observed_nodes, b.observed_nodes);
    let names: Vec<_> = a.summary.iter().map(|s| s.predictor).collect();
    assert_eq!(names, vec![Predictor::LearnedLambda, Predictor::Persistence]);

    let c = run_experiment(&config(8)).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn provided_source_with_pretrained_operator() {
    let (net, traj) = generate_synthetic(&small_params(), 2).unwrap();
    let l = assemble_supra(&net);
    let truth =
        supradiff_core::laplearn::LambdaEstimate::from_laplacian(&l, 2, supradiff_core::laplearn::StructureMode::Full)
            .unwrap();
    let config = ExperimentConfig {
        source: DataSource::Provided {
            network: net,
            trajectory: traj,
        },
        options: ExperimentOptions {
            propagator: supradiff_core::evalharness::Propagator::Exponential,
            ..ExperimentOptions::default()
        },
        pretrained: Some(truth),
    };
    let report = run_experiment(&config).unwrap();
    assert!(report.learn.is_none());
    // With the true network and exact propagator, learned and fixed coincide.
    let fixed = report.mean(Predictor::FixedLaplacian).unwrap().mean_all;
    let learned = report.mean(Predictor::LearnedLambda).unwrap().mean_all;
    assert!((fixed - learned).abs() < 1e-12);
}
