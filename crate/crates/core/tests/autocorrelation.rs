use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use swr_core::autocorr::{cochrane_orcutt_transform, transform_pair};
use swr_core::{
    durbin_watson, fit, fit_ar, fit_with_autocorr, generate, ArModel, AutocorrConfig, ErrorProcess, InputSpec,
    SimSetup, SwrModel, TrainConfig, WindowEstimate,
};

fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

fn ar_series(phi: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let eta = white_noise(n + 200, seed);
    let mut e = vec![0.0; n + 200];
    for t in 0..e.len() {
        e[t] = eta[t] + phi.iter().enumerate().filter(|(j, _)| *j < t).map(|(j, p)| p * e[t - 1 - j]).sum::<f64>();
    }
    e.split_off(200)
}

fn setup(process: ErrorProcess, seed: u64) -> SimSetup {
    SimSetup {
        truth: SwrModel::new(&[WindowEstimate { beta: 2.0, delta: 4.0, sigma: 1.5 }], None).unwrap(),
        alpha: 0.5,
        error_process: process,
        seed,
        input: InputSpec::synthetic(2000, seed + 50),
    }
}

#[test]
fn white_noise_statistic_and_p_value_are_calibrated() {
    let mut d_in_range = 0;
    let mut p_above = 0;
    for seed in 0..100 {
        let e = white_noise(500, seed);
        let dw = durbin_watson(&e, 400, seed).unwrap();
        assert!((0.0..=4.0).contains(&dw.d));
        d_in_range += usize::from((1.8..=2.2).contains(&dw.d));
        p_above += usize::from(dw.p > 0.1);
    }
    assert!(d_in_range >= 95, "{d_in_range}");
    // A calibrated p-value is uniform under the null, so about 90% exceed 0.1.
    assert!(p_above >= 82, "{p_above}");
}

#[test]
fn ar1_coefficient_is_recovered() {
    let ar = fit_ar(&ar_series(&[0.5], 10_000, 1), 1).unwrap();
    assert!((ar.phi[0] - 0.5).abs() < 0.03);
    assert!((ar.innovation_sd - 1.0).abs() < 0.05);
    let wn = fit_ar(&white_noise(10_000, 2), 1).unwrap();
    assert!(wn.phi[0].abs() < 0.05);
}

#[test]
fn ar2_coefficients_are_recovered() {
    let ar = fit_ar(&ar_series(&[0.46, 0.13], 20_000, 3), 2).unwrap();
    assert!((ar.phi[0] - 0.46).abs() < 0.03 && (ar.phi[1] - 0.13).abs() < 0.03);
}

#[test]
fn transform_is_linear() {
    let ar = ArModel::new(vec![0.46, 0.13], 1.0).unwrap();
    let z1 = white_noise(50, 4);
    let z2 = white_noise(50, 5);
    let mix: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let t1 = cochrane_orcutt_transform(&z1, &ar).unwrap();
    let t2 = cochrane_orcutt_transform(&z2, &ar).unwrap();
    let tm = cochrane_orcutt_transform(&mix, &ar).unwrap();
    for i in 0..tm.len() {
        assert!((tm[i] - (2.0 * t1[i] - 0.5 * t2[i])).abs() < 1e-12);
    }
}

#[test]
fn true_model_on_transformed_data_leaves_innovations() {
    let s = setup(ErrorProcess::Ar1 { phi: 0.5 }, 6);
    let sim = generate(&s).unwrap();
    let ar = ArModel::new(vec![0.5], 1.0).unwrap();
    let transformed = transform_pair(&sim.data, &ar).unwrap();
    let residuals = s.truth.residuals(&transformed).unwrap();
    let innovations = cochrane_orcutt_transform(&sim.noise, &ar).unwrap();
    for (i, e) in residuals.values.iter().enumerate() {
        assert!((e - innovations[residuals.first_valid + i]).abs() < 1e-10);
    }
}

#[test]
fn zero_coefficient_refit_reproduces_stage_one() {
    let sim = generate(&setup(ErrorProcess::Iid, 7)).unwrap();
    let config = TrainConfig { k_max: 1, ..TrainConfig::default() };
    let base = fit(&sim.data, &config).unwrap();
    let shifted = transform_pair(&sim.data, &ArModel::new(vec![0.0], 0.0).unwrap()).unwrap();
    let refit = fit(&shifted, &config).unwrap();
    let (a, b) = (base.final_model.windows()[0], refit.final_model.windows()[0]);
    assert!((a.beta - b.beta).abs() < 1e-2 && (a.delta - b.delta).abs() < 1e-2 && (a.sigma - b.sigma).abs() < 1e-2);
}

#[test]
fn iid_errors_need_no_transform() {
    let sim = generate(&setup(ErrorProcess::Iid, 8)).unwrap();
    let report = fit_with_autocorr(&sim.data, &TrainConfig::default(), &AutocorrConfig::default()).unwrap();
    let info = report.autocorr_info.unwrap();
    assert_eq!(info.order, 0);
    assert!(info.dw_before.p >= 0.01);
    assert!(info.dw_after.is_none());
    assert_eq!(info.stages.len(), 1);
}

#[test]
fn ar1_errors_are_transformed() {
    let sim = generate(&setup(ErrorProcess::Ar1 { phi: 0.5 }, 9)).unwrap();
    let report = fit_with_autocorr(&sim.data, &TrainConfig::default(), &AutocorrConfig::default()).unwrap();
    let info = report.autocorr_info.unwrap();
    assert_eq!(info.order, 1);
    assert!(info.dw_before.p < 0.01);
    assert!(info.dw_after.unwrap().p > 0.1);
    assert!((info.phi[0] - 0.5).abs() < 0.05);
    let json = serde_json::to_value(&report.final_model).unwrap();
    assert_eq!(json["windows"].as_array().unwrap().len(), report.selected_k);
}

#[test]
fn ar2_errors_escalate_to_second_order() {
    // With a negative second coefficient the first-order transform leaves
    // positive lag-one correlation behind.
    let sim = generate(&setup(ErrorProcess::Ar { phi: vec![0.6, -0.3] }, 10)).unwrap();
    let report = fit_with_autocorr(&sim.data, &TrainConfig::default(), &AutocorrConfig::default()).unwrap();
    let info = report.autocorr_info.unwrap();
    assert_eq!(info.order, 2);
    assert!(info.stages[1].dw.unwrap().p < 0.1);
    assert!(info.passed);
}
