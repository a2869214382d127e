//! Estimation of compound Gaussian parameters.
//!
//! * [`tyler_estimate`]: per-batch Tyler fixed point for `(Σ, τ)`.
//! * [`mle_h0`] / [`PooledScatter`]: joint estimate over several batches that
//!   share one scatter matrix and one texture per pixel.
//! * [`riemannian_gradient`] and [`recursive_step`]: one stochastic Riemannian
//!   ascent step per incoming batch with stepsize `α₀ / (t + 1)`.
//! * [`arithmetic_mean_update`]: the naive Euclidean running mean of Tyler
//!   estimates, kept as a baseline.
//! * [`icrb`]: the intrinsic Cramér-Rao bound on `E[δ²]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{frobenius, symmetrize, trace_product_herm, CMatrix, CVector, HpdMatrix};
use crate::manifold::{exp_map, project_tangent, AmbientPoint, CgPoint, CgTangent, TextureVector, UnitDetHpd};

/// Quadratic forms or textures below this value are treated as a numerical
/// breakdown.
pub const UNDERFLOW_GUARD: f64 = 1e-300;

/// `n` complex samples of dimension `p` observed at time index `t`, stored as
/// the columns of a `p × n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DataBatch {
    samples: CMatrix,
    t: usize,
}

impl DataBatch {
    pub fn new(samples: CMatrix, t: usize) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::input(format!(
                "batch needs p >= 1 and n >= 1, got {}x{}",
                samples.nrows(),
                samples.ncols()
            )));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::input(format!("batch t={t} contains non-finite values")));
        }
        if let Some(i) = samples
            .column_iter()
            .position(|c| c.iter().all(|z| z.re == 0.0 && z.im == 0.0))
        {
            return Err(Error::input(format!("sample {i} of batch t={t} is the zero vector")));
        }
        Ok(Self { samples, t })
    }

    pub fn from_vectors(vectors: &[CVector], t: usize) -> Result<Self> {
        let p = vectors.first().map(|v| v.len()).unwrap_or(0);
        if vectors.iter().any(|v| v.len() != p) {
            return Err(Error::dim("samples in a batch must share one dimension"));
        }
        Self::new(CMatrix::from_fn(p, vectors.len(), |r, c| vectors[c][r]), t)
    }

    pub fn p(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n(&self) -> usize {
        self.samples.ncols()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn samples(&self) -> &CMatrix {
        &self.samples
    }

    pub fn with_time(mut self, t: usize) -> Self {
        self.t = t;
        self
    }

    /// Applies `x ↦ A x` to every sample.
    pub fn transformed(&self, a: &CMatrix) -> Result<Self> {
        if a.ncols() != self.p() {
            return Err(Error::dim("transform does not match sample dimension"));
        }
        Self::new(a * &self.samples, self.t)
    }

    /// Applies `x_i ↦ c_i x_i`.
    pub fn scaled(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.n() {
            return Err(Error::dim("one scale factor per sample is required"));
        }
        let mut out = self.samples.clone();
        for (mut col, &ci) in out.column_iter_mut().zip(c) {
            col.iter_mut().for_each(|z| *z *= ci);
        }
        Self::new(out, self.t)
    }

    fn outer(&self, i: usize) -> CMatrix {
        let x = self.samples.column(i);
        &x * x.adjoint()
    }

    fn check_against(&self, theta: &CgPoint) -> Result<()> {
        if self.p() != theta.p() || self.n() != theta.n() {
            return Err(Error::dim(format!(
                "batch t={} is {}x{} but the parameters have (p, n) = ({}, {})",
                self.t,
                self.p(),
                self.n(),
                theta.p(),
                theta.n()
            )));
        }
        Ok(())
    }
}

/// `x_iᴴ Σ⁻¹ x_i` for every sample of the batch.
pub fn quadratic_forms(sigma: &HpdMatrix, batch: &DataBatch) -> Result<Vec<f64>> {
    let chol = sigma.cholesky()?;
    let mut whitened = batch.samples.clone();
    chol.l_dirty().solve_lower_triangular_mut(&mut whitened);
    let forms: Vec<f64> = whitened
        .column_iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    guard_positive(&forms, "quadratic form")?;
    Ok(forms)
}

fn guard_positive(values: &[f64], what: &str) -> Result<()> {
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= UNDERFLOW_GUARD))
    {
        return Err(Error::numerical(format!(
            "{what} {i} underflowed or is not finite: {v:e}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

impl FixedPointOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::input(format!(
                "fixed-point options need tol > 0 and max_iter >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorReport {
    pub point: CgPoint,
    pub iterations: usize,
    /// Relative change `‖Σ_{k+1} − Σ_k‖_F / ‖Σ_k‖_F` of the last iteration.
    pub residual: f64,
    pub converged: bool,
}

/// Per-pixel scatter matrices `S_i = Σ_t x_i^{(t)} x_i^{(t)ᴴ}` accumulated over
/// batches. This is the sufficient statistic of the joint (null hypothesis)
/// estimator; a single batch gives Tyler's estimator.
#[derive(Clone, Debug)]
pub struct PooledScatter {
    p: usize,
    n: usize,
    batches: usize,
    scatters: Vec<CMatrix>,
}

/// Result of solving the pooled fixed point.
#[derive(Clone, Debug)]
pub struct PooledEstimate {
    pub sigma: UnitDetHpd,
    /// `tr(Σ̂⁻¹ S_i)`, i.e. `Σ_t x_i^{(t)ᴴ} Σ̂⁻¹ x_i^{(t)}`.
    pub quad_sums: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl PooledScatter {
    pub fn new(p: usize, n: usize) -> Self {
        Self {
            p,
            n,
            batches: 0,
            scatters: vec![CMatrix::zeros(p, p); n],
        }
    }

    pub fn from_batches(batches: &[DataBatch]) -> Result<Self> {
        let first = batches
            .first()
            .ok_or_else(|| Error::input("at least one batch is required"))?;
        let mut pooled = Self::new(first.p(), first.n());
        for b in batches {
            pooled.push(b)?;
        }
        Ok(pooled)
    }

    pub fn push(&mut self, batch: &DataBatch) -> Result<()> {
        if batch.p() != self.p || batch.n() != self.n {
            return Err(Error::dim(format!(
                "batch t={} is {}x{}, expected {}x{}",
                batch.t(),
                batch.p(),
                batch.n(),
                self.p,
                self.n
            )));
        }
        for (i, s) in self.scatters.iter_mut().enumerate() {
            *s += batch.outer(i);
        }
        self.batches += 1;
        Ok(())
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `tr(Σ⁻¹ S_i)` for every pixel.
    pub fn quad_sums(&self, sigma: &HpdMatrix) -> Result<Vec<f64>> {
        let inv = sigma.cholesky()?.inverse();
        let sums: Vec<f64> = self.scatters.iter().map(|s| trace_product_herm(&inv, s).re).collect();
        guard_positive(&sums, "pooled quadratic form")?;
        Ok(sums)
    }

    /// Iterates `Σ ← (p/n) Σ_i S_i / tr(Σ⁻¹S_i)` from `Σ = I`, normalizing the
    /// determinant after every step.
    pub fn solve(&self, opts: FixedPointOptions) -> Result<PooledEstimate> {
        opts.validate()?;
        if self.batches == 0 {
            return Err(Error::input("no batches accumulated"));
        }
        if self.n < self.p {
            log::warn!("n = {} < p = {}: the scatter fixed point is ill-posed", self.n, self.p);
        }
        let weight = self.p as f64 / self.n as f64;
        let mut sigma = HpdMatrix::identity(self.p);
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iter {
            iterations += 1;
            let sums = self.quad_sums(&sigma)?;
            let mut next = CMatrix::zeros(self.p, self.p);
            for (s, q) in self.scatters.iter().zip(&sums) {
                next += s.map(|z| z * (weight / q));
            }
            let next = HpdMatrix::from_hermitian_unchecked(next);
            let scale = (-next.logdet_cholesky()? / self.p as f64).exp();
            let next = HpdMatrix::from_hermitian_unchecked(next.as_matrix().map(|z| z * scale));
            residual = frobenius(&(next.as_matrix() - sigma.as_matrix())) / frobenius(sigma.as_matrix());
            sigma = next;
            if !residual.is_finite() {
                return Err(Error::numerical("scatter fixed point diverged"));
            }
            if residual <= opts.tol {
                converged = true;
                break;
            }
        }
        // Final validation of positivity and determinant.
        let sigma = sigma.det_normalize()?;
        let quad_sums = self.quad_sums(&sigma)?;
        Ok(PooledEstimate {
            sigma,
            quad_sums,
            iterations,
            residual,
            converged,
        })
    }
}

/// Tyler's estimator of `(Σ, τ)` from a single batch, with `Σ` normalized to
/// unit determinant and `τ_i = x_iᴴ Σ̂⁻¹ x_i / p`.
pub fn tyler_estimate(batch: &DataBatch, opts: FixedPointOptions) -> Result<EstimatorReport> {
    let mut pooled = PooledScatter::new(batch.p(), batch.n());
    pooled.push(batch)?;
    let est = pooled.solve(opts)?;
    let p = batch.p() as f64;
    let tau = quadratic_forms(&est.sigma, batch)?.into_iter().map(|a| a / p).collect();
    Ok(EstimatorReport {
        point: CgPoint::new(est.sigma, TextureVector::new(tau)?),
        iterations: est.iterations,
        residual: est.residual,
        converged: est.converged,
    })
}

/// Joint estimate under the null hypothesis (all batches share `θ`).
#[derive(Clone, Debug)]
pub struct H0Estimate {
    pub sigma: UnitDetHpd,
    /// `τ̂_{i,0}^{(t)} = x_i^{(t)ᴴ} Σ̂₀⁻¹ x_i^{(t)} / (T p)`, one vector per batch.
    pub textures: Vec<TextureVector>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl H0Estimate {
    /// `Σ_t τ̂_{i,0}^{(t)}`, the common texture of pixel `i`.
    pub fn pooled_textures(&self) -> TextureVector {
        let n = self.textures[0].len();
        let sums = (0..n).map(|i| self.textures.iter().map(|t| t[i]).sum()).collect();
        TextureVector::from_positive(sums)
    }

    pub fn report(&self) -> EstimatorReport {
        EstimatorReport {
            point: CgPoint::new(self.sigma.clone(), self.pooled_textures()),
            iterations: self.iterations,
            residual: self.residual,
            converged: self.converged,
        }
    }
}

pub fn mle_h0(batches: &[DataBatch], opts: FixedPointOptions) -> Result<H0Estimate> {
    let pooled = PooledScatter::from_batches(batches)?;
    let est = pooled.solve(opts)?;
    let denom = (batches.len() * pooled.p()) as f64;
    let textures = batches
        .iter()
        .map(|b| {
            let forms = quadratic_forms(&est.sigma, b)?;
            TextureVector::new(forms.into_iter().map(|a| a / denom).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(H0Estimate {
        sigma: est.sigma,
        textures,
        iterations: est.iterations,
        residual: est.residual,
        converged: est.converged,
    })
}

/// `Σ_i [ −p log τ_i − x_iᴴ Σ⁻¹ x_i / τ_i ]` (additive constants dropped).
pub fn cg_log_likelihood(theta: &CgPoint, batch: &DataBatch) -> Result<f64> {
    batch.check_against(theta)?;
    let p = theta.p() as f64;
    let forms = quadratic_forms(theta.sigma(), batch)?;
    Ok(forms
        .iter()
        .zip(theta.tau().iter())
        .map(|(a, t)| -p * t.ln() - a / t)
        .sum())
}

/// Riemannian gradient of [`cg_log_likelihood`] for the Fisher metric:
/// `(Σ_i [p x_ix_iᴴ − a_i Σ] / τ_i, n (a − p τ))` with `a_i = x_iᴴΣ⁻¹x_i`.
pub fn riemannian_gradient(theta: &CgPoint, batch: &DataBatch) -> Result<CgTangent> {
    batch.check_against(theta)?;
    let p = theta.p() as f64;
    let n = theta.n() as f64;
    let a = quadratic_forms(theta.sigma(), batch)?;
    let tau = theta.tau();

    let mut weighted = batch.samples.clone();
    for (mut col, t) in weighted.column_iter_mut().zip(tau.iter()) {
        let w = p / t;
        col.iter_mut().for_each(|z| *z *= w);
    }
    let c: f64 = a.iter().zip(tau.iter()).map(|(ai, ti)| ai / ti).sum();
    let g_sigma = symmetrize(&(weighted * batch.samples.adjoint())) - theta.sigma().as_matrix().map(|z| z * c);
    let g_tau: Vec<f64> = a.iter().zip(tau.iter()).map(|(ai, ti)| n * (ai - p * ti)).collect();
    project_tangent(theta, &g_sigma, &g_tau)
}

/// State of the recursive estimator after absorbing `t` batches.
#[derive(Clone, Debug)]
pub struct RecursiveState {
    pub current: CgPoint,
    pub t: usize,
    pub alpha0: f64,
}

impl RecursiveState {
    /// Fresh state at `θ^{(0)} = initial` with no batch absorbed.
    pub fn new(initial: CgPoint, alpha0: f64) -> Result<Self> {
        Self::at(initial, 0, alpha0)
    }

    /// `θ^{(0)} = (I_p, 1_n)` with `α₀ = 1/(pn)`.
    pub fn standard(p: usize, n: usize) -> Self {
        Self {
            current: CgPoint::identity(p, n),
            t: 0,
            alpha0: default_alpha0(p, n),
        }
    }

    /// State that has already absorbed `t` batches and sits at `current`.
    pub fn at(current: CgPoint, t: usize, alpha0: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::input(format!("alpha0 must be positive, got {alpha0}")));
        }
        Ok(Self { current, t, alpha0 })
    }

    /// Starts the recursion from Tyler's estimate of the first batch, counting
    /// that batch as absorbed.
    pub fn seeded(first: &DataBatch, alpha0: f64, opts: FixedPointOptions) -> Result<Self> {
        let report = tyler_estimate(first, opts)?;
        if !report.converged {
            return Err(Error::numerical(format!(
                "Tyler estimate of the seeding batch t={} did not converge (residual {:e})",
                first.t(),
                report.residual
            )));
        }
        Self::at(report.point, 1, alpha0)
    }
}

pub fn default_alpha0(p: usize, n: usize) -> f64 {
    1.0 / (p * n) as f64
}

/// `θ^{(t+1)} = exp_{θ^{(t)}}((α₀ / (t+1)) grad L^{(t+1)}(θ^{(t)}))`.
///
/// This is gradient *ascent* on the log-likelihood of the new batch.
pub fn recursive_step(state: &RecursiveState, batch: &DataBatch) -> Result<RecursiveState> {
    let grad = riemannian_gradient(&state.current, batch)?;
    if !grad.is_finite() {
        return Err(Error::numerical(format!(
            "non-finite gradient at batch t={}",
            batch.t()
        )));
    }
    let step = state.alpha0 / (state.t + 1) as f64;
    let next = exp_map(&state.current, &grad.scale(step))?;
    let (sigma, tau) = next.into_parts();
    let sigma = sigma.det_normalize()?;
    Ok(RecursiveState {
        current: CgPoint::new(sigma, tau),
        t: state.t + 1,
        alpha0: state.alpha0,
    })
}

/// `(t · mean + new) / (t + 1)`, entrywise on both components. The scatter
/// matrix is left un-normalized.
pub fn arithmetic_mean_update(mean: &AmbientPoint, new_tyler: &CgPoint, t: usize) -> Result<AmbientPoint> {
    if t == 0 {
        return Err(Error::input("arithmetic mean update needs t >= 1"));
    }
    if mean.sigma.dim() != new_tyler.p() || mean.tau.len() != new_tyler.n() {
        return Err(Error::dim("running mean and new estimate have different shapes"));
    }
    let w_old = t as f64 / (t + 1) as f64;
    let w_new = 1.0 / (t + 1) as f64;
    let sigma = mean.sigma.as_matrix().map(|z| z * w_old) + new_tyler.sigma().as_matrix().map(|z| z * w_new);
    let tau = mean
        .tau
        .iter()
        .zip(new_tyler.tau().iter())
        .map(|(a, b)| w_old * a + w_new * b)
        .collect();
    Ok(AmbientPoint {
        sigma: HpdMatrix::from_hermitian_unchecked(sigma),
        tau: TextureVector::from_positive(tau),
    })
}

/// `(p² − 1 + n) / (T p n)`.
pub fn icrb(p: usize, n: usize, t: usize) -> f64 {
    let (p, n, t) = (p as f64, n as f64, t as f64);
    (p * p - 1.0 + n) / (t * p * n)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
