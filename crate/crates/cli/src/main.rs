//! `cgrd` command-line front end.

mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cgrd::detector::{calibrate_threshold, glrt_batch, CalibrationConfig, DetectorMode, PlugIn, RecursiveDetector};
use cgrd::estimators::{
    arithmetic_mean_update, default_alpha0, icrb, mle_h0, recursive_step, to_db, tyler_estimate, FixedPointOptions,
};
use cgrd::io::{batch_file_name, read_batch_dir, write_atomic, write_batch, write_point, write_theta, RunManifest};
use cgrd::simulation::{
    random_unit_det_covariance, run_mse_experiment, sample_cg_batch, sample_textures, trial_rng, ArithmeticError,
    EstimatorKind, ScenarioConfig, TextureLaw,
};
use cgrd::{CgPoint, DataBatch};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use settings::{CliError, Settings};

/// Iteration budget for the CLI; small n relative to p converges slowly.
const DEFAULT_FIXED_POINT: FixedPointOptions = FixedPointOptions {
    tol: 1e-8,
    max_iter: 1000,
};

#[derive(Parser, Debug)]
#[command(name = "cgrd", version, about = "Compound-Gaussian estimation and change detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fixed-point tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    /// Recursive step size; defaults to 1/(pn).
    #[arg(long, global = true)]
    alpha0: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a ground truth and write a series of batches.
    Simulate {
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        /// Gamma texture shape.
        #[arg(long)]
        shape: Option<f64>,
        /// Gamma texture scale.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Estimate parameters from a directory of batches.
    Estimate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Run the change detector on a directory of batches.
    Detect {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Target false alarm probability for the calibrated threshold.
        #[arg(long)]
        pfa: Option<f64>,
        /// Monte Carlo trials for calibration.
        #[arg(long)]
        trials: Option<usize>,
        /// Use this log-threshold instead of calibrating one.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long = "plug-in", value_enum)]
        plug_in: Option<PlugInArg>,
    },
    /// Print the intrinsic Cramér-Rao bound for (p, n, T).
    Icrb { p: usize, n: usize, t: usize },
    /// Monte Carlo MSE curves of the three estimators against the bound.
    #[command(name = "bench-fig1")]
    BenchFig1 {
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated subset of mle, arithmetic, recursive.
        #[arg(long)]
        estimators: Option<String>,
        #[arg(long)]
        shape: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long = "arithmetic-error", value_enum)]
        arithmetic_error: Option<ArithmeticArg>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Tyler,
    Mle0,
    Recursive,
    Arithmetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Batch,
    Recursive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlugInArg {
    Frozen,
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ArithmeticArg {
    Projected,
    Ambient,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            return CliError::usage(message.trim_end()).report();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::load(cli.common.config.as_deref())?;
    let threads: Option<usize> = settings.pick(cli.common.threads, "threads")?;
    if let Some(threads) = threads {
        if threads == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let started = Instant::now();
    let c = &cli.common;
    match cli.command {
        Command::Simulate { p, n, t, shape, scale } => {
            settings.allow(&["p", "n", "t", "shape", "scale"])?;
            let p = settings.require(p, "p")?;
            let n = settings.require(n, "n")?;
            let t = settings.require(t, "t")?;
            let shape = settings.pick(shape, "shape")?.unwrap_or(1.0);
            let scale = settings.pick(scale, "scale")?.unwrap_or(1.0);
            let seed = settings.pick(c.seed, "seed")?.unwrap_or(0);
            let out = output_dir(&settings, c)?;
            let files = simulate(&out, p, n, t, TextureLaw::Gamma { shape, scale }, seed)?;
            let config = json!({ "p": p, "n": n, "t": t, "shape": shape, "scale": scale, "seed": seed });
            finish("simulate", config, Some(seed), &out, files, started)
        }
        Command::Estimate { data, method } => {
            settings.allow(&["data", "method", "tol", "max-iter", "alpha0"])?;
            let data = settings.require(data, "data")?;
            let method = settings.require_enum(method, "method")?;
            let opts = fixed_point(&settings, c, DEFAULT_FIXED_POINT)?;
            let alpha0: Option<f64> = settings.pick(c.alpha0, "alpha0")?;
            let out = output_dir(&settings, c)?;
            let batches = read_batch_dir(&data)?;
            let (files, alpha0) = estimate(&out, &batches, method, opts, alpha0)?;
            let config = json!({
                "data": data,
                "method": format!("{method:?}").to_lowercase(),
                "tol": opts.tol,
                "max_iter": opts.max_iter,
                "alpha0": alpha0,
            });
            finish("estimate", config, None, &out, files, started)
        }
        Command::Detect {
            data,
            mode,
            pfa,
            trials,
            threshold,
            plug_in,
        } => {
            settings.allow(&[
                "data",
                "mode",
                "pfa",
                "trials",
                "threshold",
                "plug-in",
                "tol",
                "max-iter",
                "alpha0",
            ])?;
            let data = settings.require(data, "data")?;
            let mode = settings.pick_enum(mode, "mode")?.unwrap_or(Mode::Batch);
            let plug_in = settings.pick_enum(plug_in, "plug-in")?.unwrap_or(PlugInArg::Frozen);
            let pfa = settings.pick(pfa, "pfa")?.unwrap_or(0.05);
            let trials = settings.pick(trials, "trials")?.unwrap_or(2000);
            let threshold: Option<f64> = settings.pick(threshold, "threshold")?;
            let seed = settings.pick(c.seed, "seed")?.unwrap_or(0);
            let opts = fixed_point(&settings, c, DEFAULT_FIXED_POINT)?;
            let alpha0: Option<f64> = settings.pick(c.alpha0, "alpha0")?;
            let out = settings.pick(c.out.clone(), "out")?;
            let batches = read_batch_dir(&data)?;
            let (p, n) = (batches[0].p(), batches[0].n());
            let alpha0 = alpha0.unwrap_or_else(|| default_alpha0(p, n));
            let detector_mode = match mode {
                Mode::Batch => DetectorMode::Batch,
                Mode::Recursive => DetectorMode::Recursive {
                    alpha0,
                    plug_in: match plug_in {
                        PlugInArg::Frozen => PlugIn::FrozenQuadForms,
                        PlugInArg::Pooled => PlugIn::PooledScatter,
                    },
                },
            };
            let report = detect(&batches, detector_mode, pfa, trials, threshold, seed, opts)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{text}");
            if let Some(out) = out {
                create_dir(&out)?;
                write_atomic(&out.join("detection.json"), format!("{text}\n").as_bytes())?;
                let config = json!({
                    "data": data,
                    "mode": detector_mode,
                    "pfa": pfa,
                    "trials": trials,
                    "threshold": threshold,
                    "tol": opts.tol,
                    "max_iter": opts.max_iter,
                    "seed": seed,
                });
                finish(
                    "detect",
                    config,
                    Some(seed),
                    &out,
                    vec!["detection.json".into()],
                    started,
                )?;
            }
            Ok(())
        }
        Command::Icrb { p, n, t } => {
            if p == 0 || n == 0 || t == 0 {
                return Err(CliError::usage("p, n and T must be positive"));
            }
            let value = icrb(p, n, t);
            println!("{value:.6}");
            println!("{:.4} dB", to_db(value));
            Ok(())
        }
        Command::BenchFig1 {
            p,
            n,
            t,
            trials,
            estimators,
            shape,
            scale,
            arithmetic_error,
        } => {
            settings.allow(&[
                "p",
                "n",
                "t",
                "trials",
                "estimators",
                "shape",
                "scale",
                "arithmetic-error",
                "tol",
                "max-iter",
                "alpha0",
            ])?;
            let mut cfg = ScenarioConfig::new(
                settings.pick(p, "p")?.unwrap_or(10),
                settings.pick(n, "n")?.unwrap_or(20),
                settings.pick(t, "t")?.unwrap_or(100),
            );
            cfg.trials = settings.pick(trials, "trials")?.unwrap_or(cfg.trials);
            cfg.seed = settings.pick(c.seed, "seed")?.unwrap_or(0);
            cfg.alpha0 = settings.pick(c.alpha0, "alpha0")?;
            cfg.texture_shape = settings.pick(shape, "shape")?.unwrap_or(cfg.texture_shape);
            cfg.texture_scale = settings.pick(scale, "scale")?.unwrap_or(cfg.texture_scale);
            cfg.fixed_point = fixed_point(&settings, c, cfg.fixed_point)?;
            if let Some(list) = settings.pick::<String>(estimators, "estimators")? {
                cfg.estimators = parse_estimators(&list)?;
            }
            cfg.arithmetic_error = match settings.pick_enum(arithmetic_error, "arithmetic-error")? {
                Some(ArithmeticArg::Ambient) => ArithmeticError::Ambient,
                _ => ArithmeticError::Projected,
            };
            let out = output_dir(&settings, c)?;
            let curve = run_mse_experiment(&cfg)?;
            create_dir(&out)?;
            let csv = curve.to_csv();
            write_atomic(&out.join("mse.csv"), csv.as_bytes())?;
            write_atomic(&out.join("mse.json"), format!("{}\n", curve.to_json()).as_bytes())?;
            print!("{csv}");
            if curve.trials_failed > 0 {
                eprintln!(
                    "{} of {} trials failed and were excluded",
                    curve.trials_failed, cfg.trials
                );
            }
            let config = serde_json::to_value(&cfg).expect("config serializes");
            finish(
                "bench-fig1",
                config,
                Some(cfg.seed),
                &out,
                vec!["mse.csv".into(), "mse.json".into()],
                started,
            )
        }
    }
}

fn output_dir(settings: &Settings, c: &Common) -> Result<PathBuf, CliError> {
    settings.require(c.out.clone(), "out")
}

fn fixed_point(settings: &Settings, c: &Common, base: FixedPointOptions) -> Result<FixedPointOptions, CliError> {
    let opts = FixedPointOptions {
        tol: settings.pick(c.tol, "tol")?.unwrap_or(base.tol),
        max_iter: settings.pick(c.max_iter, "max-iter")?.unwrap_or(base.max_iter),
    };
    opts.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(opts)
}

fn parse_estimators(list: &str) -> Result<Vec<EstimatorKind>, CliError> {
    list.split(',')
        .map(|s| match s.trim() {
            "mle" => Ok(EstimatorKind::Mle),
            "arithmetic" => Ok(EstimatorKind::Arithmetic),
            "recursive" => Ok(EstimatorKind::Recursive),
            other => Err(CliError::usage(format!("unknown estimator `{other}`"))),
        })
        .collect()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn finish(
    command: &str,
    config: serde_json::Value,
    seed: Option<u64>,
    out: &Path,
    outputs: Vec<String>,
    started: Instant,
) -> Result<(), CliError> {
    let mut manifest = RunManifest::new(command, config, seed);
    manifest.outputs = outputs;
    manifest.duration_secs = started.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(())
}

fn simulate(out: &Path, p: usize, n: usize, t: usize, law: TextureLaw, seed: u64) -> Result<Vec<String>, CliError> {
    if p == 0 || n == 0 || t == 0 {
        return Err(CliError::usage("p, n and t must be positive"));
    }
    law.validate().map_err(|e| CliError::usage(e.to_string()))?;
    create_dir(out)?;
    let mut rng = trial_rng(seed, 0);
    let sigma = random_unit_det_covariance(p, &mut rng);
    let tau = sample_textures(&law, n, &mut rng);
    let mut files = Vec::with_capacity(t + 1);
    for k in 1..=t {
        let batch = sample_cg_batch(&sigma, &tau, k, &mut rng)?;
        let name = batch_file_name(k);
        write_batch(&out.join(&name), &batch)?;
        files.push(name);
    }
    write_point(&out.join("theta_true.csv"), &CgPoint::new(sigma, tau))?;
    files.push("theta_true.csv".into());
    Ok(files)
}

fn theta_file(prefix: &str, t: usize) -> String {
    format!("{prefix}_{t:05}.csv")
}

fn estimate(
    out: &Path,
    batches: &[DataBatch],
    method: Method,
    opts: FixedPointOptions,
    alpha0: Option<f64>,
) -> Result<(Vec<String>, Option<f64>), CliError> {
    create_dir(out)?;
    let mut files = Vec::new();
    let mut used_alpha0 = None;
    let converged_tyler = |b: &DataBatch| -> Result<CgPoint, CliError> {
        let report = tyler_estimate(b, opts)?;
        if !report.converged {
            return Err(CliError::numerical(format!(
                "Tyler estimate of batch t={} did not converge in {} iterations (residual {:e})",
                b.t(),
                report.iterations,
                report.residual
            )));
        }
        Ok(report.point)
    };
    match method {
        Method::Tyler => {
            for b in batches {
                let name = theta_file("tyler", b.t());
                write_point(&out.join(&name), &converged_tyler(b)?)?;
                files.push(name);
            }
        }
        Method::Mle0 => {
            let h0 = mle_h0(batches, opts)?;
            if !h0.converged {
                return Err(CliError::numerical(format!(
                    "joint estimate did not converge in {} iterations (residual {:e})",
                    h0.iterations, h0.residual
                )));
            }
            for (b, tau) in batches.iter().zip(&h0.textures) {
                let name = theta_file("mle0", b.t());
                write_point(&out.join(&name), &CgPoint::new(h0.sigma.clone(), tau.clone()))?;
                files.push(name);
            }
        }
        Method::Recursive => {
            let (p, n) = (batches[0].p(), batches[0].n());
            let alpha0 = alpha0.unwrap_or_else(|| default_alpha0(p, n));
            if !(alpha0 > 0.0 && alpha0.is_finite()) {
                return Err(CliError::usage(format!("alpha0 must be positive, got {alpha0}")));
            }
            used_alpha0 = Some(alpha0);
            let mut state = cgrd::RecursiveState::seeded(&batches[0], alpha0, opts)?;
            for b in &batches[1..] {
                state = recursive_step(&state, b)?;
            }
            let name = "recursive.csv".to_string();
            write_point(&out.join(&name), &state.current)?;
            files.push(name);
        }
        Method::Arithmetic => {
            let mut mean = converged_tyler(&batches[0])?.to_ambient();
            for (k, b) in batches.iter().enumerate().skip(1) {
                mean = arithmetic_mean_update(&mean, &converged_tyler(b)?, k)?;
            }
            let name = "arithmetic.csv".to_string();
            write_theta(&out.join(&name), mean.sigma.as_matrix(), &mean.tau)?;
            files.push(name);
        }
    }
    Ok((files, used_alpha0))
}

#[derive(serde::Serialize)]
struct DetectReport {
    mode: DetectorMode,
    p: usize,
    n: usize,
    t_range: (usize, usize),
    log_lambda: f64,
    threshold_log: f64,
    decision: cgrd::detector::Hypothesis,
    pfa: Option<f64>,
    calibration_trials: Option<usize>,
    calibration_failed_trials: Option<usize>,
    warning: Option<String>,
    /// Running statistic after each batch, recursive mode only.
    series: Option<Vec<(usize, f64)>>,
}

fn detect(
    batches: &[DataBatch],
    mode: DetectorMode,
    pfa: f64,
    trials: usize,
    threshold: Option<f64>,
    seed: u64,
    opts: FixedPointOptions,
) -> Result<DetectReport, CliError> {
    let (p, n) = (batches[0].p(), batches[0].n());
    let mut report = DetectReport {
        mode,
        p,
        n,
        t_range: (batches[0].t(), batches[batches.len() - 1].t()),
        log_lambda: 0.0,
        threshold_log: 0.0,
        decision: cgrd::detector::Hypothesis::H0,
        pfa: None,
        calibration_trials: None,
        calibration_failed_trials: None,
        warning: None,
        series: None,
    };
    report.threshold_log = match threshold {
        Some(th) => th,
        None => {
            let mut cfg = CalibrationConfig::new(p, n, batches.len(), pfa, trials, seed);
            cfg.mode = mode;
            cfg.fixed_point = opts;
            let cal = calibrate_threshold(&cfg).map_err(|e| match e {
                cgrd::Error::Input(m) => CliError::usage(m),
                other => other.into(),
            })?;
            report.pfa = Some(pfa);
            report.calibration_trials = Some(trials);
            report.calibration_failed_trials = Some(cal.failed_trials);
            report.warning = cal.warning;
            cal.threshold_log
        }
    };
    let result = match mode {
        DetectorMode::Batch => glrt_batch(batches, opts, report.threshold_log)?,
        DetectorMode::Recursive { alpha0, plug_in } => {
            let mut det = RecursiveDetector::new(p, n, alpha0, plug_in, opts, report.threshold_log)?;
            let mut series = Vec::with_capacity(batches.len());
            let mut last = None;
            for b in batches {
                let r = det.push(b)?;
                series.push((b.t(), r.log_lambda));
                last = Some(r);
            }
            report.series = Some(series);
            last.expect("at least one batch")
        }
    };
    report.log_lambda = result.log_lambda;
    report.decision = result.decision;
    report.t_range = result.t_range;
    Ok(report)
}
