//! Synthetic compound Gaussian data and the Monte Carlo MSE study.
//!
//! Every trial draws its own `(Σ★, τ★)`, feeds `T` batches through the joint
//! estimator, the arithmetic mean of Tyler estimates and the recursive
//! estimator, and records `δ²(θ★, θ̂^{(T)})` on a logarithmic grid of `T`.
//! Trials run in parallel; each owns a ChaCha stream keyed by its index, so
//! results do not depend on the thread count.

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    arithmetic_mean_update, default_alpha0, icrb, recursive_step, to_db, tyler_estimate, DataBatch, FixedPointOptions,
    PooledScatter, RecursiveState,
};
use crate::hermitian::{c64, herm_part, symmetrize, CMatrix, HpdMatrix, C64};
use crate::manifold::{
    ambient_distance_squared, distance_squared, project_tangent, AmbientPoint, CgPoint, CgTangent, TextureVector,
    UnitDetHpd,
};

/// Trial RNG: one ChaCha8 stream per trial index under a common seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Standard circular complex Gaussian: real and imaginary parts `N(0, 1/2)`.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    // Column-major fill keeps the draw order independent of nalgebra internals.
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = standard_complex(rng);
        }
    }
    m
}

/// Haar-distributed unitary matrix: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(p: usize, rng: &mut R) -> CMatrix {
    let g = complex_gaussian_matrix(p, p, rng);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..p {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0) };
        q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

/// `U diag(λ) Uᴴ` with Haar `U`.
pub fn unitary_congruence(u: &CMatrix, eigenvalues: &[f64]) -> CMatrix {
    let mut scaled = u.clone();
    for (j, &l) in eigenvalues.iter().enumerate() {
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= l);
    }
    symmetrize(&(scaled * u.adjoint()))
}

/// Random HPD matrix with condition number `cond`: Haar eigenvectors and
/// log-uniform eigenvalues pinned to `1` and `cond` at the extremes.
pub fn random_hpd<R: Rng + ?Sized>(p: usize, cond: f64, rng: &mut R) -> HpdMatrix {
    let u = haar_unitary(p, rng);
    let log_cond = cond.max(1.0).ln();
    let mut eigs: Vec<f64> = (0..p).map(|_| (rng.random::<f64>() * log_cond).exp()).collect();
    if p >= 2 {
        eigs[0] = 1.0;
        eigs[p - 1] = cond.max(1.0);
    }
    HpdMatrix::from_hermitian_unchecked(unitary_congruence(&u, &eigs))
}

/// Degrees of freedom of the chi-squared law used for the eigenvalues of
/// random scatter matrices.
pub const COVARIANCE_CHI2_DOF: f64 = 2.0;

/// `Σ = U Λ Uᴴ` with Haar `U` and `Λ` drawn chi-squared, then rescaled to unit
/// product.
pub fn random_unit_det_covariance<R: Rng + ?Sized>(p: usize, rng: &mut R) -> UnitDetHpd {
    let eigs = unit_product_chi2(p, rng);
    let u = haar_unitary(p, rng);
    let sigma = HpdMatrix::from_hermitian_unchecked(unitary_congruence(&u, &eigs));
    sigma
        .det_normalize()
        .expect("chi-squared spectrum renormalized to unit product is HPD")
}

/// `p` chi-squared draws rescaled by their geometric mean.
pub fn unit_product_chi2<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    let chi2 = ChiSquared::new(COVARIANCE_CHI2_DOF).expect("positive degrees of freedom");
    let raw: Vec<f64> = (0..p)
        .map(|_| loop {
            let v: f64 = chi2.sample(rng);
            if v > 0.0 {
                break v;
            }
        })
        .collect();
    let mean_log = raw.iter().map(|v| v.ln()).sum::<f64>() / p as f64;
    raw.iter().map(|v| (v.ln() - mean_log).exp()).collect()
}

/// Random manifold point for tests and property checks: moderately
/// conditioned `Σ` and log-normal textures.
pub fn random_point<R: Rng + ?Sized>(p: usize, n: usize, rng: &mut R) -> CgPoint {
    let cond = 1.0 + 99.0 * rng.random::<f64>();
    let sigma = random_hpd(p, cond, rng).det_normalize().expect("well-conditioned");
    let tau = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z.exp()
        })
        .collect();
    CgPoint::new(sigma, TextureVector::new(tau).expect("positive"))
}

/// Random tangent vector at `theta` (Gaussian ambient draw, projected).
pub fn random_tangent<R: Rng + ?Sized>(theta: &CgPoint, rng: &mut R) -> CgTangent {
    let a = complex_gaussian_matrix(theta.p(), theta.p(), rng);
    let a = herm_part(&a).expect("square").into_matrix();
    // Scale so that Σ-directions are relative to Σ.
    let s = theta.sigma().sqrt().expect("HPD");
    let a = s.as_matrix() * a * s.as_matrix();
    let tau: Vec<f64> = theta
        .tau()
        .iter()
        .map(|t| {
            let z: f64 = rng.sample(StandardNormal);
            z * t
        })
        .collect();
    project_tangent(theta, &a, &tau).expect("dimensions match")
}

/// Source of positive texture values.
pub trait TextureSampler: Send + Sync {
    fn sample_texture(&self, rng: &mut dyn RngCore) -> f64;
}

/// Built-in texture laws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TextureLaw {
    /// `Γ(shape, scale)`; `shape = scale = 1` gives K-distributed samples.
    Gamma {
        shape: f64,
        scale: f64,
    },
    Constant {
        value: f64,
    },
}

impl Default for TextureLaw {
    fn default() -> Self {
        TextureLaw::Gamma { shape: 1.0, scale: 1.0 }
    }
}

impl TextureLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TextureLaw::Gamma { shape, scale } if shape > 0.0 && scale > 0.0 => Ok(()),
            TextureLaw::Constant { value } if value > 0.0 => Ok(()),
            other => Err(Error::input(format!("invalid texture law {other:?}"))),
        }
    }
}

impl TextureSampler for TextureLaw {
    fn sample_texture(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            TextureLaw::Gamma { shape, scale } => {
                let g = Gamma::new(shape, scale).expect("validated gamma parameters");
                loop {
                    let v: f64 = g.sample(rng);
                    if v > 0.0 {
                        return v;
                    }
                }
            }
            TextureLaw::Constant { value } => value,
        }
    }
}

pub fn sample_textures(law: &dyn TextureSampler, n: usize, rng: &mut dyn RngCore) -> TextureVector {
    TextureVector::new((0..n).map(|_| law.sample_texture(rng)).collect())
        .expect("texture samplers return positive values")
}

/// `x_i = sqrt(τ_i) Σ^{1/2} z_i` with `z_i` standard circular complex Gaussian.
pub fn sample_cg_batch<R: Rng + ?Sized>(
    sigma: &HpdMatrix,
    tau: &TextureVector,
    t: usize,
    rng: &mut R,
) -> Result<DataBatch> {
    let root = sigma.sqrt()?;
    sample_with_root(&root, tau, t, rng)
}

fn sample_with_root<R: Rng + ?Sized>(
    root: &HpdMatrix,
    tau: &TextureVector,
    t: usize,
    rng: &mut R,
) -> Result<DataBatch> {
    let p = root.dim();
    let mut z = complex_gaussian_matrix(p, tau.len(), rng);
    for (mut col, ti) in z.column_iter_mut().zip(tau.iter()) {
        let s = ti.sqrt();
        col.iter_mut().for_each(|v| *v *= s);
    }
    DataBatch::new(root.as_matrix() * z, t)
}

/// The estimators that [`run_mse_experiment`] can track.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mle,
    Arithmetic,
    Recursive,
}

/// How the error of the arithmetic-mean baseline is measured. The running
/// mean itself is never renormalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithmeticError {
    /// `δ²` after rescaling the mean scatter matrix to unit determinant, so
    /// the estimate is a point of the parameter manifold.
    #[default]
    Projected,
    /// Affine-invariant distance to the raw mean, determinant bias included.
    Ambient,
}

/// `T` values at which the MSE is recorded.
pub const CHECKPOINTS: [usize; 7] = [1, 3, 10, 30, 100, 300, 1000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub p: usize,
    pub n: usize,
    /// Largest number of batches `T`.
    pub t_max: usize,
    /// `None` means `1/(pn)`.
    pub alpha0: Option<f64>,
    pub texture_shape: f64,
    pub texture_scale: f64,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub arithmetic_error: ArithmeticError,
    pub fixed_point: FixedPointOptions,
}

impl ScenarioConfig {
    pub fn new(p: usize, n: usize, t_max: usize) -> Self {
        Self {
            p,
            n,
            t_max,
            alpha0: None,
            texture_shape: 1.0,
            texture_scale: 1.0,
            trials: 200,
            seed: 0,
            estimators: vec![EstimatorKind::Mle, EstimatorKind::Arithmetic, EstimatorKind::Recursive],
            arithmetic_error: ArithmeticError::default(),
            fixed_point: FixedPointOptions {
                tol: 1e-8,
                max_iter: 1000,
            },
        }
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0.unwrap_or_else(|| default_alpha0(self.p, self.n))
    }

    pub fn texture_law(&self) -> TextureLaw {
        TextureLaw::Gamma {
            shape: self.texture_shape,
            scale: self.texture_scale,
        }
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        let mut out: Vec<usize> = CHECKPOINTS.iter().copied().filter(|&t| t <= self.t_max).collect();
        if out.last() != Some(&self.t_max) {
            out.push(self.t_max);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 || self.t_max == 0 || self.trials == 0 {
            return Err(Error::input("p, n, T and trials must all be positive"));
        }
        if self.estimators.is_empty() {
            return Err(Error::input("at least one estimator must be selected"));
        }
        if !(self.alpha0() > 0.0) {
            return Err(Error::input("alpha0 must be positive"));
        }
        self.texture_law().validate()?;
        self.fixed_point.validate()
    }

    fn tracks(&self, kind: EstimatorKind) -> bool {
        self.estimators.contains(&kind)
    }
}

/// MSE at one checkpoint, linear scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseRecord {
    pub t: usize,
    pub icrb: f64,
    pub mle: Option<f64>,
    pub arithmetic: Option<f64>,
    pub recursive: Option<f64>,
}

impl MseRecord {
    pub fn get(&self, kind: EstimatorKind) -> Option<f64> {
        match kind {
            EstimatorKind::Mle => self.mle,
            EstimatorKind::Arithmetic => self.arithmetic,
            EstimatorKind::Recursive => self.recursive,
        }
    }

    pub fn db(&self, kind: EstimatorKind) -> Option<f64> {
        self.get(kind).map(to_db)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseCurve {
    pub config: ScenarioConfig,
    pub records: Vec<MseRecord>,
    pub trials_used: usize,
    pub trials_failed: usize,
    /// Error message of each failed trial, by trial index.
    pub failures: Vec<(usize, String)>,
}

impl MseCurve {
    pub fn record(&self, t: usize) -> Option<&MseRecord> {
        self.records.iter().find(|r| r.t == t)
    }

    /// CSV with columns `T,icrb_db,mle_db,art_db,rec_db`; estimators that were
    /// not run leave their column empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,icrb_db,mle_db,art_db,rec_db\n");
        let cell = |v: Option<f64>| v.map(|x| format!("{}", to_db(x))).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t,
                to_db(r.icrb),
                cell(r.mle),
                cell(r.arithmetic),
                cell(r.recursive)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MseCurve serializes")
    }
}

/// Squared errors of one trial at each checkpoint, in checkpoint order.
#[derive(Debug)]
struct TrialErrors {
    mle: Vec<f64>,
    arithmetic: Vec<f64>,
    recursive: Vec<f64>,
}

fn run_trial(config: &ScenarioConfig, checkpoints: &[usize], trial: usize) -> Result<TrialErrors> {
    let mut rng = trial_rng(config.seed, trial as u64);
    let (p, n) = (config.p, config.n);
    let opts = config.fixed_point;
    let sigma = random_unit_det_covariance(p, &mut rng);
    let tau = sample_textures(&config.texture_law(), n, &mut rng);
    let truth = CgPoint::new(sigma, tau);
    let truth_ambient = truth.to_ambient();
    let root = truth.sigma().sqrt()?;

    let want_mle = config.tracks(EstimatorKind::Mle);
    let want_art = config.tracks(EstimatorKind::Arithmetic);
    let want_rec = config.tracks(EstimatorKind::Recursive);

    let mut pooled = PooledScatter::new(p, n);
    let mut mean: Option<AmbientPoint> = None;
    let mut rec: Option<RecursiveState> = None;
    let mut errors = TrialErrors {
        mle: Vec::new(),
        arithmetic: Vec::new(),
        recursive: Vec::new(),
    };
    let mut next_checkpoint = checkpoints.iter().peekable();

    for t in 1..=config.t_max {
        let batch = sample_with_root(&root, truth.tau(), t, &mut rng)?;
        if want_mle {
            pooled.push(&batch)?;
        }
        if want_art {
            let tyler = tyler_estimate(&batch, opts)?;
            if !tyler.converged {
                return Err(Error::numerical(format!(
                    "Tyler estimate at t={t} did not converge (residual {:e})",
                    tyler.residual
                )));
            }
            mean = Some(match mean {
                None => tyler.point.to_ambient(),
                Some(m) => arithmetic_mean_update(&m, &tyler.point, t - 1)?,
            });
        }
        if want_rec {
            rec = Some(match rec {
                None => RecursiveState::seeded(&batch, config.alpha0(), opts)?,
                Some(state) => recursive_step(&state, &batch)?,
            });
        }

        if next_checkpoint.peek() == Some(&&t) {
            next_checkpoint.next();
            if want_mle {
                let est = pooled.solve(opts)?;
                if !est.converged {
                    return Err(Error::numerical(format!(
                        "joint estimate at T={t} did not converge (residual {:e})",
                        est.residual
                    )));
                }
                let denom = (t * p) as f64;
                let tau_hat = TextureVector::new(est.quad_sums.iter().map(|q| q / denom).collect())?;
                let point = CgPoint::new(est.sigma, tau_hat);
                errors.mle.push(distance_squared(&truth, &point)?);
            }
            if let Some(m) = &mean {
                let err = match config.arithmetic_error {
                    ArithmeticError::Ambient => ambient_distance_squared(&truth_ambient, m)?,
                    ArithmeticError::Projected => {
                        let point = CgPoint::new(m.sigma.det_normalize()?, m.tau.clone());
                        distance_squared(&truth, &point)?
                    }
                };
                errors.arithmetic.push(err);
            }
            if let Some(state) = &rec {
                errors.recursive.push(distance_squared(&truth, &state.current)?);
            }
        }
    }
    Ok(errors)
}

/// Runs the Monte Carlo MSE study. Parallelism follows the ambient rayon pool.
pub fn run_mse_experiment(config: &ScenarioConfig) -> Result<MseCurve> {
    config.validate()?;
    let checkpoints = config.checkpoints();
    let outcomes: Vec<Result<TrialErrors>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &checkpoints, trial))
        .collect();

    let mut failures = Vec::new();
    let mut used: Vec<TrialErrors> = Vec::with_capacity(outcomes.len());
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(e) => used.push(e),
            Err(e) => failures.push((trial, e.to_string())),
        }
    }
    if used.is_empty() {
        return Err(Error::numerical(format!(
            "all {} trials failed; first failure: {}",
            config.trials,
            failures.first().map(|f| f.1.as_str()).unwrap_or("")
        )));
    }

    let count = used.len() as f64;
    // Fixed summation order (trial index) for reproducibility.
    let mean_at = |select: fn(&TrialErrors) -> &Vec<f64>, k: usize| -> Option<f64> {
        if select(&used[0]).is_empty() {
            return None;
        }
        Some(used.iter().map(|e| select(e)[k]).sum::<f64>() / count)
    };
    let records = checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| MseRecord {
            t,
            icrb: icrb(config.p, config.n, t),
            mle: mean_at(|e| &e.mle, k),
            arithmetic: mean_at(|e| &e.arithmetic, k),
            recursive: mean_at(|e| &e.recursive, k),
        })
        .collect();

    Ok(MseCurve {
        config: config.clone(),
        records,
        trials_used: used.len(),
        trials_failed: failures.len(),
        failures,
    })
}

/// Real diagonal as a complex vector (helper for building test matrices).
pub fn real_vector(values: &[f64]) -> DVector<C64> {
    DVector::from_iterator(values.len(), values.iter().map(|&v| c64(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::frobenius;

    /// Two-sample Kolmogorov-Smirnov statistic.
    fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    /// Critical value of the two-sample KS statistic at level 1%.
    fn ks_critical_1pct(n: usize, m: usize) -> f64 {
        1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
    }

    #[test]
    fn scalar_covariance_is_one() {
        let mut rng = trial_rng(1, 0);
        let s = random_unit_det_covariance(1, &mut rng);
        assert!((s.as_matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_covariance_has_unit_determinant() {
        let mut rng = trial_rng(2, 0);
        for _ in 0..1000 {
            let p = 1 + (rng.random::<u32>() % 10) as usize;
            let s = random_unit_det_covariance(p, &mut rng);
            assert!(s.logdet().unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn haar_matrix_is_unitary() {
        let mut rng = trial_rng(3, 0);
        let u = haar_unitary(6, &mut rng);
        let err = frobenius(&(u.adjoint() * &u - CMatrix::identity(6, 6)));
        assert!(err < 1e-13);
    }

    #[test]
    fn covariance_spectrum_matches_direct_sampling() {
        // Largest eigenvalue of the generated Σ vs. the largest of directly
        // sampled, renormalized chi-squared values.
        let p = 4;
        let draws = 10_000;
        let mut rng = trial_rng(4, 0);
        let generated: Vec<f64> = (0..draws)
            .map(|_| random_unit_det_covariance(p, &mut rng).eig().unwrap().max())
            .collect();
        let mut rng = trial_rng(4, 1);
        let chi2 = ChiSquared::new(COVARIANCE_CHI2_DOF).unwrap();
        let direct: Vec<f64> = (0..draws)
            .map(|_| {
                let raw: Vec<f64> = (0..p).map(|_| chi2.sample(&mut rng)).collect();
                let g = raw.iter().product::<f64>().powf(1.0 / p as f64);
                raw.iter().fold(0.0f64, |m, v| m.max(v / g))
            })
            .collect();
        let d = ks_two_sample(generated, direct);
        assert!(d < ks_critical_1pct(draws, draws), "KS statistic {d}");
    }

    #[test]
    fn identity_batches_are_standard_gaussian() {
        let mut rng = trial_rng(5, 0);
        let n = 20_000;
        let b = sample_cg_batch(&HpdMatrix::identity(2), &TextureVector::ones(n), 1, &mut rng).unwrap();
        let cov = b.samples() * b.samples().adjoint() / c64(n as f64);
        assert!(frobenius(&(cov - CMatrix::identity(2, 2))) < 5.0 / (n as f64).sqrt() * 2.0);
    }

    #[test]
    fn batch_second_moment_matches_model() {
        let mut rng = trial_rng(6, 0);
        let sigma = random_unit_det_covariance(3, &mut rng);
        let tau = TextureVector::new(vec![0.5, 2.0]).unwrap();
        let draws = 100_000;
        let mut acc = vec![CMatrix::zeros(3, 3); 2];
        let root = sigma.sqrt().unwrap();
        for t in 0..draws {
            let b = sample_with_root(&root, &tau, t, &mut rng).unwrap();
            for (i, a) in acc.iter_mut().enumerate() {
                let x = b.samples().column(i);
                *a += &x * x.adjoint();
            }
        }
        for (i, a) in acc.iter().enumerate() {
            let emp = a / c64(draws as f64);
            let want = sigma.as_matrix() * c64(tau[i]);
            assert!(frobenius(&(emp - &want)) / frobenius(&want) < 0.02);
        }
    }

    #[test]
    fn k_distributed_norms_match_direct_sampling() {
        // ‖x‖² for x = sqrt(τ) z, τ ~ Γ(1,1), vs. the product of independent
        // Γ(1,1) and Γ(p,1) draws.
        let p = 3;
        let draws = 10_000;
        let law = TextureLaw::default();
        let mut rng = trial_rng(7, 0);
        let mut generated = Vec::with_capacity(draws);
        for t in 0..draws {
            let tau = sample_textures(&law, 1, &mut rng);
            let b = sample_cg_batch(&HpdMatrix::identity(p), &tau, t, &mut rng).unwrap();
            generated.push(b.samples().column(0).iter().map(|z| z.norm_sqr()).sum::<f64>());
        }
        let mut rng = trial_rng(7, 1);
        let g1 = Gamma::new(1.0, 1.0).unwrap();
        let gp = Gamma::new(p as f64, 1.0).unwrap();
        let direct: Vec<f64> = (0..draws).map(|_| g1.sample(&mut rng) * gp.sample(&mut rng)).collect();
        let d = ks_two_sample(generated, direct);
        assert!(d < ks_critical_1pct(draws, draws), "KS statistic {d}");
    }

    #[test]
    fn checkpoints_are_truncated() {
        assert_eq!(ScenarioConfig::new(2, 4, 100).checkpoints(), vec![1, 3, 10, 30, 100]);
        assert_eq!(ScenarioConfig::new(2, 4, 50).checkpoints(), vec![1, 3, 10, 30, 50]);
        assert_eq!(ScenarioConfig::new(2, 4, 1).checkpoints(), vec![1]);
    }

    #[test]
    fn config_validation() {
        let mut c = ScenarioConfig::new(2, 4, 10);
        c.estimators.clear();
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::new(2, 4, 10);
        c.texture_shape = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn small_experiment_is_reproducible_and_sane() {
        let mut c = ScenarioConfig::new(3, 8, 30);
        c.trials = 16;
        c.seed = 99;
        let a = run_mse_experiment(&c).unwrap();
        let b = run_mse_experiment(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials_used, 16);
        let first = a.record(1).unwrap();
        // All three estimators equal Tyler's estimate at T = 1.
        let m = first.mle.unwrap();
        assert!((first.arithmetic.unwrap() - m).abs() < 1e-6 * m);
        assert!((first.recursive.unwrap() - m).abs() < 1e-6 * m);
        let last = a.record(30).unwrap();
        assert!(last.mle.unwrap() < first.mle.unwrap());
        assert!(a.to_csv().starts_with("T,icrb_db,mle_db,art_db,rec_db\n"));
    }
}
