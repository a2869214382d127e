//! The compound Gaussian parameter manifold `SH⁺⁺_p × R⁺⁺ⁿ`.
//!
//! Points are pairs `(Σ, τ)` with `Σ` Hermitian positive definite of unit
//! determinant and `τ` a vector of positive textures. The Fisher information
//! metric splits into the affine-invariant metric on `Σ` (weight `1/p`) and the
//! log-Euclidean metric on each texture (weight `1/n`), so geodesics, the
//! exponential map and the distance are all available in closed form.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::hermitian::{herm_part, symmetrize, trace_product_herm, CMatrix, HermitianMatrix, HpdMatrix};

/// Tolerance on `|logdet Σ|` for the unit-determinant constraint.
pub const TOL_UNIT_DET: f64 = 1e-8;

/// Relative tolerance on `|tr(Σ⁻¹ξ_Σ)| / ‖ξ_Σ‖_F` for tangent vectors.
pub const TOL_TANGENT: f64 = 1e-8;

/// HPD matrix with unit determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitDetHpd(HpdMatrix);

impl UnitDetHpd {
    pub fn new(matrix: HpdMatrix) -> Result<Self> {
        let ld = matrix.logdet()?;
        if ld.abs() > TOL_UNIT_DET {
            return Err(Error::domain(format!(
                "matrix does not have unit determinant: logdet = {ld:e}"
            )));
        }
        Ok(Self(matrix))
    }

    pub(crate) fn from_normalized(matrix: HpdMatrix) -> Self {
        Self(matrix)
    }

    pub fn identity(p: usize) -> Self {
        Self(HpdMatrix::identity(p))
    }

    pub fn as_hpd(&self) -> &HpdMatrix {
        &self.0
    }

    pub fn into_hpd(self) -> HpdMatrix {
        self.0
    }
}

impl Deref for UnitDetHpd {
    type Target = HpdMatrix;

    fn deref(&self) -> &HpdMatrix {
        &self.0
    }
}

/// Strictly positive texture vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TextureVector(Vec<f64>);

impl TextureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("texture vector must not be empty"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!(
                "texture {i} must be positive and finite, got {v}"
            )));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_positive(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for TextureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A point `θ = (Σ, τ)` of the manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct CgPoint {
    sigma: UnitDetHpd,
    tau: TextureVector,
}

impl CgPoint {
    pub fn new(sigma: UnitDetHpd, tau: TextureVector) -> Self {
        Self { sigma, tau }
    }

    /// `(I_p, 1_n)`.
    pub fn identity(p: usize, n: usize) -> Self {
        Self::new(UnitDetHpd::identity(p), TextureVector::ones(n))
    }

    pub fn sigma(&self) -> &UnitDetHpd {
        &self.sigma
    }

    pub fn tau(&self) -> &TextureVector {
        &self.tau
    }

    pub fn p(&self) -> usize {
        self.sigma.dim()
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }

    pub fn into_parts(self) -> (UnitDetHpd, TextureVector) {
        (self.sigma, self.tau)
    }

    pub fn to_ambient(&self) -> AmbientPoint {
        AmbientPoint {
            sigma: self.sigma.as_hpd().clone(),
            tau: self.tau.clone(),
        }
    }

    fn check_same_shape(&self, other: &CgPoint) -> Result<()> {
        if self.p() != other.p() || self.n() != other.n() {
            return Err(Error::dim(format!(
                "points live on different manifolds: (p, n) = ({}, {}) vs ({}, {})",
                self.p(),
                self.n(),
                other.p(),
                other.n()
            )));
        }
        Ok(())
    }
}

/// A `(Σ, τ)` pair whose scatter matrix is not constrained to unit determinant,
/// e.g. a Euclidean average of manifold points.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientPoint {
    pub sigma: HpdMatrix,
    pub tau: TextureVector,
}

/// Tangent vector `ξ = (ξ_Σ, ξ_τ)` at a base point, with `tr(Σ⁻¹ξ_Σ) = 0`.
///
/// The texture component is stored in ambient coordinates (not log
/// coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct CgTangent {
    base: CgPoint,
    xi_sigma: HermitianMatrix,
    xi_tau: Vec<f64>,
}

impl CgTangent {
    /// Builds a tangent vector, checking dimensions and the trace condition.
    pub fn new(base: &CgPoint, xi_sigma: HermitianMatrix, xi_tau: Vec<f64>) -> Result<Self> {
        check_tangent_dims(base, xi_sigma.as_matrix(), &xi_tau)?;
        let tr = sigma_inv_trace(base.sigma(), xi_sigma.as_matrix())?;
        let norm = xi_sigma.frobenius_norm();
        if tr.abs() > TOL_TANGENT * norm {
            return Err(Error::domain(format!(
                "ξ_Σ is not tangent: tr(Σ⁻¹ξ_Σ) = {tr:e}, ‖ξ_Σ‖ = {norm:e}"
            )));
        }
        Ok(Self::from_parts(base.clone(), xi_sigma, xi_tau))
    }

    pub(crate) fn from_parts(base: CgPoint, xi_sigma: HermitianMatrix, xi_tau: Vec<f64>) -> Self {
        Self { base, xi_sigma, xi_tau }
    }

    pub fn zero(base: &CgPoint) -> Self {
        Self::from_parts(base.clone(), HermitianMatrix::zeros(base.p()), vec![0.0; base.n()])
    }

    pub fn base(&self) -> &CgPoint {
        &self.base
    }

    pub fn xi_sigma(&self) -> &HermitianMatrix {
        &self.xi_sigma
    }

    pub fn xi_tau(&self) -> &[f64] {
        &self.xi_tau
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_parts(
            self.base.clone(),
            self.xi_sigma.scale(c),
            self.xi_tau.iter().map(|v| v * c).collect(),
        )
    }

    pub fn add(&self, other: &CgTangent) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::domain("cannot add tangent vectors at different base points"));
        }
        let sigma = self.xi_sigma.as_matrix() + other.xi_sigma.as_matrix();
        let tau = self.xi_tau.iter().zip(&other.xi_tau).map(|(a, b)| a + b).collect();
        Ok(Self::from_parts(
            self.base.clone(),
            HermitianMatrix::from_symmetrized(symmetrize(&sigma)),
            tau,
        ))
    }

    /// `|tr(Σ⁻¹ξ_Σ)|` at the base point.
    pub fn trace_residual(&self) -> Result<f64> {
        Ok(sigma_inv_trace(self.base.sigma(), self.xi_sigma.as_matrix())?.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.xi_sigma
            .as_matrix()
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
            && self.xi_tau.iter().all(|v| v.is_finite())
    }
}

fn check_tangent_dims(base: &CgPoint, a_sigma: &CMatrix, a_tau: &[f64]) -> Result<()> {
    let p = base.p();
    if a_sigma.nrows() != p || a_sigma.ncols() != p {
        return Err(Error::dim(format!(
            "Σ-component is {}x{}, base point has p = {p}",
            a_sigma.nrows(),
            a_sigma.ncols()
        )));
    }
    if a_tau.len() != base.n() {
        return Err(Error::dim(format!(
            "τ-component has length {}, base point has n = {}",
            a_tau.len(),
            base.n()
        )));
    }
    Ok(())
}

fn sigma_inverse(sigma: &HpdMatrix) -> Result<CMatrix> {
    Ok(sigma.cholesky()?.inverse())
}

/// Real part of `tr(Σ⁻¹A)` for Hermitian `A`.
fn sigma_inv_trace(sigma: &HpdMatrix, a: &CMatrix) -> Result<f64> {
    Ok(trace_product_herm(&sigma_inverse(sigma)?, a).re)
}

fn check_base(theta: &CgPoint, v: &CgTangent) -> Result<()> {
    if theta.p() != v.base.p() || theta.n() != v.base.n() {
        return Err(Error::dim(format!(
            "tangent vector dimensions (p, n) = ({}, {}) do not match point ({}, {})",
            v.base.p(),
            v.base.n(),
            theta.p(),
            theta.n()
        )));
    }
    if theta != &v.base {
        return Err(Error::domain("tangent vector is attached to a different base point"));
    }
    Ok(())
}

/// Fisher information metric
/// `(1/p) tr(Σ⁻¹ξ_ΣΣ⁻¹η_Σ) + (1/n) Σ_i ξ_τ,i η_τ,i / τ_i²`.
pub fn metric(theta: &CgPoint, xi: &CgTangent, eta: &CgTangent) -> Result<f64> {
    check_base(theta, xi)?;
    check_base(theta, eta)?;
    let p = theta.p() as f64;
    let n = theta.n() as f64;
    let chol = theta.sigma().cholesky()?;
    let a = chol.solve(xi.xi_sigma.as_matrix());
    let b = chol.solve(eta.xi_sigma.as_matrix());
    // tr(AB) = Σ_jk A_jk B_kj
    let sigma_part: f64 = (0..a.nrows())
        .flat_map(|j| (0..a.ncols()).map(move |k| (j, k)))
        .map(|(j, k)| (a[(j, k)] * b[(k, j)]).re)
        .sum();
    let tau_part: f64 = xi
        .xi_tau
        .iter()
        .zip(&eta.xi_tau)
        .zip(theta.tau().iter())
        .map(|((x, y), t)| x * y / (t * t))
        .sum();
    Ok(sigma_part / p + tau_part / n)
}

pub fn norm(theta: &CgPoint, xi: &CgTangent) -> Result<f64> {
    Ok(metric(theta, xi, xi)?.max(0.0).sqrt())
}

/// Orthogonal projection onto the tangent space:
/// `ξ_Σ = herm(A) − (1/p) tr(Σ⁻¹ herm(A)) Σ`, `ξ_τ = a_τ`.
pub fn project_tangent(theta: &CgPoint, a_sigma: &CMatrix, a_tau: &[f64]) -> Result<CgTangent> {
    check_tangent_dims(theta, a_sigma, a_tau)?;
    let h = herm_part(a_sigma)?.into_matrix();
    let p = theta.p() as f64;
    let shift = sigma_inv_trace(theta.sigma(), &h)? / p;
    let xi = &h - theta.sigma().as_matrix().map(|z| z * shift);
    Ok(CgTangent::from_parts(
        theta.clone(),
        HermitianMatrix::from_symmetrized(symmetrize(&xi)),
        a_tau.to_vec(),
    ))
}

/// `Σ^{1/2} exp(Σ^{-1/2} ξ_Σ Σ^{-1/2}) Σ^{1/2}` with the trace of the inner
/// generator removed, so the unit determinant survives round-off.
fn exp_sigma(sigma: &HpdMatrix, xi_sigma: &CMatrix) -> Result<UnitDetHpd> {
    let (s, is) = sigma.sqrt_and_inv_sqrt()?;
    let inner = HermitianMatrix::from_symmetrized(symmetrize(&(is.as_matrix() * xi_sigma * is.as_matrix())));
    let eig = inner.eig()?;
    let mean = eig.values.mean();
    let e = eig.map(|l| (l - mean).exp());
    HpdMatrix::from_hermitian_unchecked(symmetrize(&(s.as_matrix() * e * s.as_matrix()))).det_normalize()
}

/// Riemannian exponential map `exp_θ(ξ)`.
pub fn exp_map(theta: &CgPoint, xi: &CgTangent) -> Result<CgPoint> {
    check_base(theta, xi)?;
    if !xi.is_finite() {
        return Err(Error::numerical("tangent vector has non-finite entries"));
    }
    let sigma = exp_sigma(theta.sigma(), xi.xi_sigma.as_matrix())?;
    let tau: Vec<f64> = theta
        .tau()
        .iter()
        .zip(&xi.xi_tau)
        .map(|(t, x)| t * (x / t).exp())
        .collect();
    if let Some(v) = tau.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::numerical(format!("texture left the positive orthant: {v}")));
    }
    Ok(CgPoint::new(sigma, TextureVector::from_positive(tau)))
}

/// Eigendecomposition of the relative matrix `Σ₀^{-1/2} Σ₁ Σ₀^{-1/2}` plus the
/// square-root factors of `Σ₀`.
struct Relative {
    sqrt0: HpdMatrix,
    eig: crate::hermitian::HermitianEigen,
}

fn relative(sigma0: &HpdMatrix, sigma1: &HpdMatrix) -> Result<Relative> {
    if sigma0.dim() != sigma1.dim() {
        return Err(Error::dim(format!(
            "scatter matrices have sizes {} and {}",
            sigma0.dim(),
            sigma1.dim()
        )));
    }
    let (sqrt0, isqrt0) = sigma0.sqrt_and_inv_sqrt()?;
    let m = HpdMatrix::from_hermitian_unchecked(isqrt0.as_matrix() * sigma1.as_matrix() * isqrt0.as_matrix());
    let eig = m.eig()?;
    Ok(Relative { sqrt0, eig })
}

/// Riemannian logarithm `log_θ₀(θ₁)`, the inverse of [`exp_map`].
pub fn log_map(theta0: &CgPoint, theta1: &CgPoint) -> Result<CgTangent> {
    theta0.check_same_shape(theta1)?;
    let rel = relative(theta0.sigma(), theta1.sigma())?;
    let mean = rel.eig.values.iter().map(|l| l.ln()).sum::<f64>() / theta0.p() as f64;
    let log_rel = rel.eig.map(|l| l.ln() - mean);
    let s = rel.sqrt0.as_matrix();
    let xi_sigma = HermitianMatrix::from_symmetrized(symmetrize(&(s * log_rel * s)));
    let xi_tau = theta0
        .tau()
        .iter()
        .zip(theta1.tau().iter())
        .map(|(t0, t1)| t0 * (t1 / t0).ln())
        .collect();
    Ok(CgTangent::from_parts(theta0.clone(), xi_sigma, xi_tau))
}

/// Point `γ(t)` on the geodesic with `γ(0) = θ₀`, `γ(1) = θ₁`; any real `t`.
pub fn geodesic(theta0: &CgPoint, theta1: &CgPoint, t: f64) -> Result<CgPoint> {
    theta0.check_same_shape(theta1)?;
    let rel = relative(theta0.sigma(), theta1.sigma())?;
    let mean = rel.eig.values.iter().map(|l| l.ln()).sum::<f64>() / theta0.p() as f64;
    let powered = rel.eig.map(|l| (t * (l.ln() - mean)).exp());
    let s = rel.sqrt0.as_matrix();
    let sigma = HpdMatrix::from_hermitian_unchecked(symmetrize(&(s * powered * s))).det_normalize()?;
    let tau = theta0
        .tau()
        .iter()
        .zip(theta1.tau().iter())
        .map(|(t0, t1)| t0.powf(1.0 - t) * t1.powf(t))
        .collect();
    Ok(CgPoint::new(sigma, TextureVector::from_positive(tau)))
}

/// Affine-invariant squared distance `‖log(Σ₀^{-1/2}Σ₁Σ₀^{-1/2})‖²_F` on
/// HPD matrices (no determinant constraint).
pub fn hpd_distance_squared(sigma0: &HpdMatrix, sigma1: &HpdMatrix) -> Result<f64> {
    let rel = relative(sigma0, sigma1)?;
    Ok(rel.eig.values.iter().map(|l| l.ln().powi(2)).sum())
}

/// `Σ_i log²(τ₁,i / τ₀,i)`.
pub fn texture_distance_squared(tau0: &[f64], tau1: &[f64]) -> Result<f64> {
    if tau0.len() != tau1.len() {
        return Err(Error::dim(format!(
            "texture vectors have lengths {} and {}",
            tau0.len(),
            tau1.len()
        )));
    }
    Ok(tau0.iter().zip(tau1).map(|(a, b)| (b / a).ln().powi(2)).sum())
}

/// `δ² = (1/p) δ²_{H⁺⁺}(Σ₀, Σ₁) + (1/n) δ²_{R⁺⁺}(τ₀, τ₁)`.
pub fn distance_squared(theta0: &CgPoint, theta1: &CgPoint) -> Result<f64> {
    theta0.check_same_shape(theta1)?;
    let p = theta0.p() as f64;
    let n = theta0.n() as f64;
    Ok(hpd_distance_squared(theta0.sigma(), theta1.sigma())? / p
        + texture_distance_squared(theta0.tau(), theta1.tau())? / n)
}

pub fn distance(theta0: &CgPoint, theta1: &CgPoint) -> Result<f64> {
    Ok(distance_squared(theta0, theta1)?.sqrt())
}

/// The same weighted distance evaluated between pairs that need not satisfy
/// the unit-determinant constraint.
pub fn ambient_distance_squared(a: &AmbientPoint, b: &AmbientPoint) -> Result<f64> {
    if a.sigma.dim() != b.sigma.dim() || a.tau.len() != b.tau.len() {
        return Err(Error::dim("ambient points have different shapes"));
    }
    let p = a.sigma.dim() as f64;
    let n = a.tau.len() as f64;
    Ok(hpd_distance_squared(&a.sigma, &b.sigma)? / p + texture_distance_squared(&a.tau, &b.tau)? / n)
}

/// Convenience for building a diagonal unit-determinant point in tests and
/// examples.
pub fn diagonal_point(sigma_diag: &[f64], tau: &[f64]) -> Result<CgPoint> {
    let sigma = UnitDetHpd::new(HpdMatrix::from_real_diagonal(sigma_diag)?)?;
    Ok(CgPoint::new(sigma, TextureVector::new(tau.to_vec())?))
}

#[cfg(test)]
pub(crate) fn real_diag(diag: &[f64]) -> CMatrix {
    let p = diag.len();
    CMatrix::from_fn(p, p, |i, j| {
        if i == j {
            crate::hermitian::c64(diag[i])
        } else {
            crate::hermitian::c64(0.0)
        }
    })
}
