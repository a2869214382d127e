use cgrd::detector::{
    calibrate_threshold, empirical_quantile, glrt_batch, CalibrationConfig, Hypothesis, PlugIn, RecursiveDetector,
};
use cgrd::estimators::{default_alpha0, FixedPointOptions};
use cgrd::simulation::{random_unit_det_covariance, sample_cg_batch, sample_textures, trial_rng, TextureLaw};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OPTS: FixedPointOptions = FixedPointOptions {
    tol: 1e-8,
    max_iter: 2000,
};

fn bootstrap_quantile_diff(a: &[f64], b: &[f64], q: f64, rounds: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let resample = |xs: &[f64], rng: &mut ChaCha8Rng| {
        let mut r: Vec<f64> = (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).collect();
        r.sort_by(f64::total_cmp);
        empirical_quantile(&r, q)
    };
    let mut diffs: Vec<f64> = (0..rounds).map(|_| resample(a, rng) - resample(b, rng)).collect();
    diffs.sort_by(f64::total_cmp);
    diffs
}

#[test]
fn thresholds_do_not_depend_on_the_scatter_matrix() {
    let (p, n, t) = (2, 8, 3);
    let mut white = CalibrationConfig::new(p, n, t, 0.05, 2000, 11);
    white.fixed_point = OPTS;
    let mut colored = CalibrationConfig::new(p, n, t, 0.05, 2000, 12);
    colored.fixed_point = OPTS;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    colored.sigma = Some(random_unit_det_covariance(p, &mut rng));

    let a = calibrate_threshold(&white).unwrap();
    let b = calibrate_threshold(&colored).unwrap();
    assert_eq!(a.failed_trials + b.failed_trials, 0);
    let diffs = bootstrap_quantile_diff(&a.null_samples, &b.null_samples, 0.95, 1000, &mut rng);
    let lo = empirical_quantile(&diffs, 0.005);
    let hi = empirical_quantile(&diffs, 0.995);
    eprintln!(
        "thresholds {:.3} (identity) vs {:.3} (random), 99% bootstrap interval [{lo:.3}, {hi:.3}]",
        a.threshold_log, b.threshold_log
    );
    assert!(lo <= 0.0 && 0.0 <= hi);
}

#[test]
fn fresh_null_data_triggers_at_the_nominal_rate() {
    let (p, n, t) = (2, 8, 3);
    let mut cfg = CalibrationConfig::new(p, n, t, 0.1, 2000, 21);
    cfg.fixed_point = OPTS;
    let cal = calibrate_threshold(&cfg).unwrap();
    let trials = 2000;
    let mut alarms = 0;
    for trial in 0..trials {
        let mut rng = trial_rng(22, trial);
        let sigma = random_unit_det_covariance(p, &mut rng);
        let tau = sample_textures(&TextureLaw::Gamma { shape: 0.5, scale: 3.0 }, n, &mut rng);
        let batches: Vec<_> = (1..=t)
            .map(|k| sample_cg_batch(&sigma, &tau, k, &mut rng).unwrap())
            .collect();
        if glrt_batch(&batches, OPTS, cal.threshold_log).unwrap().decision == Hypothesis::H1 {
            alarms += 1;
        }
    }
    let rate = alarms as f64 / trials as f64;
    // Threshold and test sample both carry binomial noise of sd ≈ 0.0067.
    assert!((rate - 0.1).abs() < 0.04, "false alarm rate {rate}");
}

#[test]
#[ignore = "known gap: the recursive plug-in inherits the estimator's transient and drifts from the batch statistic"]
fn recursive_plug_in_tracks_the_batch_statistic() {
    let (p, n, t_max) = (10, 20, 300);
    let opts = FixedPointOptions::default();
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let mut rng = trial_rng(31, trial);
        let sigma = random_unit_det_covariance(p, &mut rng);
        let tau = sample_textures(&TextureLaw::default(), n, &mut rng);
        let batches: Vec<_> = (1..=t_max)
            .map(|k| sample_cg_batch(&sigma, &tau, k, &mut rng).unwrap())
            .collect();
        let mut det =
            RecursiveDetector::new(p, n, default_alpha0(p, n), PlugIn::FrozenQuadForms, opts, f64::INFINITY).unwrap();
        let mut last = 0.0;
        for b in &batches {
            last = det.push(b).unwrap().log_lambda;
        }
        let exact = glrt_batch(&batches, opts, f64::INFINITY).unwrap().log_lambda;
        let gap = (last - exact).abs() / t_max as f64;
        eprintln!("trial {trial}: recursive {last:.1}, batch {exact:.1}, gap per batch {gap:.3}");
        worst = worst.max(gap);
    }
    assert!(worst < 0.05, "worst per-batch gap {worst}");
}
