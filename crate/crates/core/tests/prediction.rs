use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swr_core::{generate, ErrorProcess, InputSpec, SimSetup, SwrModel, WindowEstimate};

fn random_model(rng: &mut ChaCha8Rng) -> SwrModel {
    let k = rng.random_range(1..=3);
    let mut windows: Vec<WindowEstimate> = (0..k)
        .map(|_| WindowEstimate {
            beta: rng.random_range(0.0..5.0),
            delta: rng.random_range(0.0..12.0),
            sigma: rng.random_range(0.0..3.0),
        })
        .collect();
    windows.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    windows.dedup_by(|a, b| a.delta == b.delta);
    let intercept = rng.random_bool(0.5).then(|| rng.random_range(-2.0..2.0));
    SwrModel::new(&windows, intercept).unwrap()
}

/// Direct double loop over windows and lags.
fn naive_predict(model: &SwrModel, x: &[f64]) -> Vec<Option<f64>> {
    let start = model.kernels().iter().map(|k| k.s_max()).max().unwrap();
    (0..x.len())
        .map(|t| {
            if t < start {
                return None;
            }
            let mut v = model.intercept().unwrap_or(0.0);
            for (kernel, beta) in model.kernels().iter().zip(model.betas()) {
                for s in kernel.s_min()..=kernel.s_max() {
                    v += beta * kernel.weight_at(s) * x[t - s];
                }
            }
            Some(v)
        })
        .collect()
}

#[test]
fn matches_naive_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let model = random_model(&mut rng);
        let x: Vec<f64> = (0..80).map(|_| rng.random_range(-3.0..3.0)).collect();
        let pred = model.predict(&x).unwrap();
        for (t, expected) in naive_predict(&model, &x).into_iter().enumerate() {
            match expected {
                None => assert!(!pred.is_valid(t) && pred.values()[t].is_nan()),
                Some(v) => assert!((pred.values()[t] - v).abs() < 1e-12),
            }
        }
    }
}

#[test]
fn series_too_short_for_any_prediction_is_rejected() {
    let model = SwrModel::new(&[WindowEstimate { beta: 1.0, delta: 10.0, sigma: 1.0 }], None).unwrap();
    assert!(model.predict(&[1.0; 13]).is_err());
    assert!(model.predict(&[1.0; 14]).is_ok());
}

#[test]
fn true_model_residuals_reproduce_noise() {
    let truth = SwrModel::new(
        &[WindowEstimate { beta: 1.5, delta: 2.0, sigma: 1.0 }, WindowEstimate { beta: 0.7, delta: 9.0, sigma: 2.5 }],
        None,
    )
    .unwrap();
    let sim = generate(&SimSetup {
        truth: truth.clone(),
        alpha: 0.3,
        error_process: ErrorProcess::Iid,
        seed: 3,
        input: InputSpec::synthetic(500, 4),
    })
    .unwrap();
    let r = truth.residuals(&sim.data).unwrap();
    for (i, e) in r.values.iter().enumerate() {
        assert!((e - sim.noise[r.first_valid + i]).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn prediction_is_linear_in_input(
        seed in 0u64..1000,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let windows = [WindowEstimate { beta: rng.random_range(0.0..4.0), delta: rng.random_range(0.0..8.0), sigma: rng.random_range(0.0..2.0) }];
        let model = SwrModel::new(&windows, None).unwrap();
        let x1: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(u, v)| a * u + b * v).collect();
        let p1 = model.predict(&x1).unwrap();
        let p2 = model.predict(&x2).unwrap();
        let pm = model.predict(&mix).unwrap();
        for t in pm.first_valid()..40 {
            let expected = a * p1.values()[t] + b * p2.values()[t];
            prop_assert!((pm.values()[t] - expected).abs() < 1e-10);
        }
        // Non-negative input and coefficients give non-negative output.
        let pos: Vec<f64> = x1.iter().map(|v| v.abs()).collect();
        prop_assert!(model.predict(&pos).unwrap().valid_values().iter().all(|v| *v >= 0.0));
    }
}
