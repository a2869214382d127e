//! GLRT change detection for compound Gaussian time series.
//!
//! The statistic compares a model where every batch has its own `(Σ, τ)`
//! (Tyler estimates) against one where all batches share them (joint
//! estimate). Everything is kept in the log domain:
//!
//! ```text
//! log Λ = T n logdet Σ̂₀ − n Σ_t logdet Σ̂_t
//!       + Σ_i [ T p log(Σ_t τ̂_{i,0}^{(t)}) − p Σ_t log τ̂_i^{(t)} ]
//! ```
//!
//! With unit-determinant scatter matrices both logdet terms vanish; they are
//! still evaluated and reported as a consistency check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    mle_h0, quadratic_forms, recursive_step, tyler_estimate, DataBatch, FixedPointOptions, PooledScatter,
    RecursiveState,
};
use crate::hermitian::HpdMatrix;
use crate::manifold::UnitDetHpd;
use crate::simulation::{sample_cg_batch, sample_textures, trial_rng, TextureLaw};

/// Largest tolerated `|logdet|` of a unit-determinant estimate inside the
/// statistic.
pub const LOGDET_CHECK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Natural log of the GLRT statistic.
    pub log_lambda: f64,
    pub threshold_log: f64,
    pub decision: Hypothesis,
    /// First and last time index that entered the statistic.
    pub t_range: (usize, usize),
}

impl DetectionResult {
    pub fn new(log_lambda: f64, threshold_log: f64, t_range: (usize, usize)) -> Self {
        let decision = if log_lambda > threshold_log {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        };
        Self {
            log_lambda,
            threshold_log,
            decision,
            t_range,
        }
    }
}

/// The additive pieces of `log Λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlrtTerms {
    pub p: usize,
    pub n: usize,
    pub batches: usize,
    pub h0_logdet: f64,
    /// `Σ_t τ̂_{i,0}^{(t)}` per pixel.
    pub h0_texture_sums: Vec<f64>,
    /// `Σ_t logdet Σ̂_t`.
    pub tyler_logdet_sum: f64,
    /// `Σ_t log τ̂_i^{(t)}` per pixel.
    pub tyler_log_texture_sums: Vec<f64>,
}

impl GlrtTerms {
    pub fn log_lambda(&self) -> f64 {
        let p = self.p as f64;
        let n = self.n as f64;
        let t = self.batches as f64;
        let texture: f64 = self
            .h0_texture_sums
            .iter()
            .zip(&self.tyler_log_texture_sums)
            .map(|(s, l)| p * (t * s.ln() - l))
            .sum();
        t * n * self.h0_logdet - n * self.tyler_logdet_sum + texture
    }

    /// `max(|logdet Σ̂₀|, |Σ_t logdet Σ̂_t|)`, zero in exact arithmetic.
    pub fn logdet_residual(&self) -> f64 {
        self.h0_logdet.abs().max(self.tyler_logdet_sum.abs())
    }

    /// Assembles the terms from explicit estimates: the joint scatter matrix and
    /// per-batch joint textures, and one `(Σ̂_t, τ̂^{(t)})` pair per batch. The
    /// scatter matrices need not have unit determinant.
    pub fn from_estimates(
        h0_sigma: &HpdMatrix,
        h0_textures: &[Vec<f64>],
        tylers: &[(HpdMatrix, Vec<f64>)],
    ) -> Result<Self> {
        let batches = tylers.len();
        if batches == 0 || h0_textures.len() != batches {
            return Err(Error::dim("one joint texture vector and one Tyler estimate per batch"));
        }
        let p = h0_sigma.dim();
        let n = h0_textures[0].len();
        if h0_textures.iter().any(|t| t.len() != n) || tylers.iter().any(|(s, t)| s.dim() != p || t.len() != n) {
            return Err(Error::dim("estimates have inconsistent shapes"));
        }
        let h0_texture_sums = (0..n).map(|i| h0_textures.iter().map(|t| t[i]).sum()).collect();
        let tyler_log_texture_sums = (0..n).map(|i| tylers.iter().map(|(_, t)| t[i].ln()).sum()).collect();
        let mut tyler_logdet_sum = 0.0;
        for (s, _) in tylers {
            tyler_logdet_sum += s.logdet()?;
        }
        Ok(Self {
            p,
            n,
            batches,
            h0_logdet: h0_sigma.logdet()?,
            h0_texture_sums,
            tyler_logdet_sum,
            tyler_log_texture_sums,
        })
    }
}

fn check_series(batches: &[DataBatch]) -> Result<(usize, usize)> {
    let first = batches
        .first()
        .ok_or_else(|| Error::input("the detector needs at least one batch"))?;
    for b in batches {
        if b.p() != first.p() || b.n() != first.n() {
            return Err(Error::dim(format!(
                "batch t={} is {}x{} but batch t={} is {}x{}",
                b.t(),
                b.p(),
                b.n(),
                first.t(),
                first.p(),
                first.n()
            )));
        }
    }
    Ok((first.p(), first.n()))
}

fn converged_tyler(batch: &DataBatch, opts: FixedPointOptions) -> Result<(HpdMatrix, Vec<f64>)> {
    let r = tyler_estimate(batch, opts)?;
    if !r.converged {
        return Err(Error::numerical(format!(
            "Tyler estimate of batch t={} did not converge in {} iterations (residual {:e})",
            batch.t(),
            r.iterations,
            r.residual
        )));
    }
    let (sigma, tau) = r.point.into_parts();
    Ok((sigma.into_hpd(), tau.into_vec()))
}

/// Exact statistic terms over a batch series.
pub fn glrt_terms(batches: &[DataBatch], opts: FixedPointOptions) -> Result<GlrtTerms> {
    check_series(batches)?;
    let h0 = mle_h0(batches, opts)?;
    if !h0.converged {
        return Err(Error::numerical(format!(
            "joint estimate over t={}..{} did not converge in {} iterations (residual {:e})",
            batches[0].t(),
            batches[batches.len() - 1].t(),
            h0.iterations,
            h0.residual
        )));
    }
    let tylers = batches
        .iter()
        .map(|b| converged_tyler(b, opts))
        .collect::<Result<Vec<_>>>()?;
    let h0_textures: Vec<Vec<f64>> = h0.textures.iter().map(|t| t.to_vec()).collect();
    GlrtTerms::from_estimates(&h0.sigma, &h0_textures, &tylers)
}

fn checked_log_lambda(terms: &GlrtTerms) -> Result<f64> {
    if terms.logdet_residual() > LOGDET_CHECK {
        return Err(Error::numerical(format!(
            "unit-determinant consistency check failed: |logdet| = {:e}",
            terms.logdet_residual()
        )));
    }
    Ok(terms.log_lambda())
}

/// Batch GLRT over the whole series.
pub fn glrt_batch(batches: &[DataBatch], opts: FixedPointOptions, threshold_log: f64) -> Result<DetectionResult> {
    let terms = glrt_terms(batches, opts)?;
    let log_lambda = checked_log_lambda(&terms)?;
    let range = (batches[0].t(), batches[batches.len() - 1].t());
    Ok(DetectionResult::new(log_lambda, threshold_log, range))
}

/// How the recursive detector evaluates the joint textures `Σ_t τ̂_{i,0}^{(t)}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlugIn {
    /// Running scalar sums `s_i += x_iᴴ Σ̂⁻¹ x_i`, each term evaluated at the
    /// recursive `Σ̂` current when its batch arrived and never revisited.
    #[default]
    FrozenQuadForms,
    /// Running per-pixel scatter `S_i += x_i x_iᴴ`, evaluated as `tr(Σ̂⁻¹ S_i)`
    /// at the latest recursive `Σ̂`. Memory `O(n p²)`, still independent of `T`.
    PooledScatter,
}

/// Running accumulators of the recursive detector.
#[derive(Clone, Debug)]
pub struct RunningSufficientStats {
    p: usize,
    n: usize,
    batches: usize,
    first_t: usize,
    last_t: usize,
    plug_in: PlugIn,
    quad_sums: Vec<f64>,
    pooled: Option<PooledScatter>,
    tyler_logdet_sum: f64,
    tyler_log_texture_sums: Vec<f64>,
}

impl RunningSufficientStats {
    pub fn new(p: usize, n: usize, plug_in: PlugIn) -> Self {
        Self {
            p,
            n,
            batches: 0,
            first_t: 0,
            last_t: 0,
            plug_in,
            quad_sums: vec![0.0; n],
            pooled: matches!(plug_in, PlugIn::PooledScatter).then(|| PooledScatter::new(p, n)),
            tyler_logdet_sum: 0.0,
            tyler_log_texture_sums: vec![0.0; n],
        }
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn plug_in(&self) -> PlugIn {
        self.plug_in
    }

    pub fn t_range(&self) -> (usize, usize) {
        (self.first_t, self.last_t)
    }

    fn absorb(&mut self, batch: &DataBatch, sigma0: &UnitDetHpd, opts: FixedPointOptions) -> Result<()> {
        let (tyler_sigma, tyler_tau) = converged_tyler(batch, opts)?;
        self.tyler_logdet_sum += tyler_sigma.logdet()?;
        for (acc, t) in self.tyler_log_texture_sums.iter_mut().zip(&tyler_tau) {
            *acc += t.ln();
        }
        for (acc, a) in self.quad_sums.iter_mut().zip(quadratic_forms(sigma0, batch)?) {
            *acc += a;
        }
        if let Some(pooled) = self.pooled.as_mut() {
            pooled.push(batch)?;
        }
        if self.batches == 0 {
            self.first_t = batch.t();
        }
        self.last_t = batch.t();
        self.batches += 1;
        Ok(())
    }

    /// Statistic terms with the recursive `Σ̂₀` plugged in.
    pub fn terms(&self, sigma0: &UnitDetHpd) -> Result<GlrtTerms> {
        if self.batches == 0 {
            return Err(Error::input("no batch absorbed yet"));
        }
        let denom = (self.batches * self.p) as f64;
        let sums = match &self.pooled {
            Some(pooled) => pooled.quad_sums(sigma0)?,
            None => self.quad_sums.clone(),
        };
        Ok(GlrtTerms {
            p: self.p,
            n: self.n,
            batches: self.batches,
            h0_logdet: sigma0.logdet()?,
            h0_texture_sums: sums.iter().map(|s| s / denom).collect(),
            tyler_logdet_sum: self.tyler_logdet_sum,
            tyler_log_texture_sums: self.tyler_log_texture_sums.clone(),
        })
    }
}

/// Advances the recursive detector by one batch.
///
/// The first batch seeds the estimator with its Tyler estimate; every later
/// batch triggers one [`recursive_step`]. The emitted statistic uses the
/// recursive joint estimate in place of the exact one, so no past batch is
/// reprocessed.
pub fn glrt_recursive(
    state: RecursiveState,
    mut history: RunningSufficientStats,
    batch: &DataBatch,
    opts: FixedPointOptions,
    threshold_log: f64,
) -> Result<(DetectionResult, RecursiveState, RunningSufficientStats)> {
    if batch.p() != history.p || batch.n() != history.n {
        return Err(Error::dim(format!(
            "batch t={} is {}x{}, detector expects {}x{}",
            batch.t(),
            batch.p(),
            batch.n(),
            history.p,
            history.n
        )));
    }
    if state.t != history.batches {
        return Err(Error::input(format!(
            "recursive state has absorbed {} batches but the accumulators hold {}",
            state.t, history.batches
        )));
    }
    let state = if history.batches == 0 {
        RecursiveState::seeded(batch, state.alpha0, opts)?
    } else {
        recursive_step(&state, batch)?
    };
    history.absorb(batch, state.current.sigma(), opts)?;
    let terms = history.terms(state.current.sigma())?;
    let log_lambda = checked_log_lambda(&terms)?;
    Ok((
        DetectionResult::new(log_lambda, threshold_log, history.t_range()),
        state,
        history,
    ))
}

/// Owning wrapper around [`glrt_recursive`].
#[derive(Clone, Debug)]
pub struct RecursiveDetector {
    state: RecursiveState,
    stats: RunningSufficientStats,
    opts: FixedPointOptions,
    threshold_log: f64,
}

impl RecursiveDetector {
    pub fn new(
        p: usize,
        n: usize,
        alpha0: f64,
        plug_in: PlugIn,
        opts: FixedPointOptions,
        threshold_log: f64,
    ) -> Result<Self> {
        let mut state = RecursiveState::standard(p, n);
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::input(format!("alpha0 must be positive, got {alpha0}")));
        }
        state.alpha0 = alpha0;
        Ok(Self {
            state,
            stats: RunningSufficientStats::new(p, n, plug_in),
            opts,
            threshold_log,
        })
    }

    pub fn push(&mut self, batch: &DataBatch) -> Result<DetectionResult> {
        let (result, state, stats) = glrt_recursive(
            self.state.clone(),
            self.stats.clone(),
            batch,
            self.opts,
            self.threshold_log,
        )?;
        self.state = state;
        self.stats = stats;
        Ok(result)
    }

    pub fn state(&self) -> &RecursiveState {
        &self.state
    }

    pub fn stats(&self) -> &RunningSufficientStats {
        &self.stats
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DetectorMode {
    Batch,
    Recursive { alpha0: f64, plug_in: PlugIn },
}

/// `log Λ` of a whole series under the chosen detector.
pub fn series_statistic(batches: &[DataBatch], mode: DetectorMode, opts: FixedPointOptions) -> Result<f64> {
    let (p, n) = check_series(batches)?;
    match mode {
        DetectorMode::Batch => checked_log_lambda(&glrt_terms(batches, opts)?),
        DetectorMode::Recursive { alpha0, plug_in } => {
            let mut det = RecursiveDetector::new(p, n, alpha0, plug_in, opts, f64::INFINITY)?;
            let mut last = 0.0;
            for b in batches {
                last = det.push(b)?.log_lambda;
            }
            Ok(last)
        }
    }
}

#[derive(Clone, Debug)]
pub struct CalibrationConfig {
    pub p: usize,
    pub n: usize,
    pub t_count: usize,
    pub pfa: f64,
    pub trials: usize,
    pub texture_law: TextureLaw,
    pub seed: u64,
    /// Null-hypothesis scatter matrix; identity when `None`.
    pub sigma: Option<UnitDetHpd>,
    pub mode: DetectorMode,
    pub fixed_point: FixedPointOptions,
}

impl CalibrationConfig {
    pub fn new(p: usize, n: usize, t_count: usize, pfa: f64, trials: usize, seed: u64) -> Self {
        Self {
            p,
            n,
            t_count,
            pfa,
            trials,
            texture_law: TextureLaw::default(),
            seed,
            sigma: None,
            mode: DetectorMode::Batch,
            fixed_point: FixedPointOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold_log: f64,
    pub pfa: f64,
    /// Null statistics of the successful trials, sorted ascending.
    pub null_samples: Vec<f64>,
    pub failed_trials: usize,
    pub warning: Option<String>,
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Null-hypothesis statistics, one per trial, in trial order. Each trial
/// draws textures once and holds them (and `Σ`) fixed over all `T` batches.
pub fn null_statistics(cfg: &CalibrationConfig) -> Result<(Vec<f64>, usize)> {
    if cfg.p == 0 || cfg.n == 0 || cfg.t_count == 0 || cfg.trials == 0 {
        return Err(Error::input("p, n, T and trials must be positive"));
    }
    cfg.texture_law.validate()?;
    cfg.fixed_point.validate()?;
    let sigma = cfg.sigma.clone().unwrap_or_else(|| UnitDetHpd::identity(cfg.p));
    if sigma.dim() != cfg.p {
        return Err(Error::dim("calibration Σ does not match p"));
    }
    let outcomes: Vec<Result<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, trial as u64);
            let tau = sample_textures(&cfg.texture_law, cfg.n, &mut rng);
            let batches = (1..=cfg.t_count)
                .map(|t| sample_cg_batch(&sigma, &tau, t, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            series_statistic(&batches, cfg.mode, cfg.fixed_point)
        })
        .collect();
    let mut stats = Vec::with_capacity(cfg.trials);
    let mut failed = 0;
    for o in outcomes {
        match o {
            Ok(v) => stats.push(v),
            Err(e) => {
                log::debug!("calibration trial failed: {e}");
                failed += 1;
            }
        }
    }
    Ok((stats, failed))
}

/// Monte Carlo threshold: the `(1 − pfa)`-quantile of `log Λ` under H0.
pub fn calibrate_threshold(cfg: &CalibrationConfig) -> Result<Calibration> {
    if !(cfg.pfa > 0.0 && cfg.pfa < 1.0) {
        return Err(Error::input(format!("pfa must lie in (0, 1), got {}", cfg.pfa)));
    }
    let (mut samples, failed) = null_statistics(cfg)?;
    if samples.is_empty() {
        return Err(Error::numerical("every calibration trial failed"));
    }
    samples.sort_by(f64::total_cmp);
    let recommended = (100.0 / cfg.pfa).ceil() as usize;
    let warning = (cfg.trials < recommended).then(|| {
        format!(
            "{} trials is below the recommended {} for pfa = {}",
            cfg.trials, recommended, cfg.pfa
        )
    });
    Ok(Calibration {
        threshold_log: empirical_quantile(&samples, 1.0 - cfg.pfa),
        pfa: cfg.pfa,
        null_samples: samples,
        failed_trials: failed,
        warning,
    })
}
