//! Complex Hermitian linear algebra.
//!
//! Every matrix function in this crate acts on Hermitian inputs, so they are all
//! evaluated through the spectral form `f(A) = U diag(f(λ)) Uᴴ` of a Hermitian
//! eigendecomposition. Results are re-symmetrized with [`herm_part`] after each
//! composite operation so that round-off never accumulates an anti-Hermitian
//! component.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::manifold::UnitDetHpd;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance on `‖A − Aᴴ‖_F / ‖A‖_F` accepted when wrapping a matrix
/// as Hermitian.
pub const TOL_HERM: f64 = 1e-10;

/// An HPD matrix must satisfy `λ_min > HPD_EIG_RATIO · λ_max`.
pub const HPD_EIG_RATIO: f64 = 1e-12;

const EIG_EPS: f64 = f64::EPSILON;
const EIG_MAX_ITER: usize = 10_000;

#[inline]
pub(crate) fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(A + Aᴴ) / 2` on an already-checked square matrix.
pub(crate) fn symmetrize(a: &CMatrix) -> CMatrix {
    let mut out = a + a.adjoint();
    out.iter_mut().for_each(|z| *z *= 0.5);
    out
}

pub(crate) fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `tr(A B)` for Hermitian `B`, computed elementwise as `Σ A_jk conj(B_jk)`.
pub(crate) fn trace_product_herm(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Hermitian part `(A + Aᴴ)/2` of a square matrix.
pub fn herm_part(a: &CMatrix) -> Result<HermitianMatrix> {
    if !a.is_square() {
        return Err(Error::dim(format!(
            "herm_part needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(HermitianMatrix(symmetrize(a)))
}

/// Eigendecomposition `A = U diag(λ) Uᴴ` with eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    fn compute(a: &CMatrix) -> Result<Self> {
        let p = a.nrows();
        let norm = frobenius(a);
        if !norm.is_finite() {
            return Err(Error::numerical("eigensolver input has non-finite entries"));
        }
        let eig = SymmetricEigen::try_new(a.clone(), EIG_EPS, EIG_MAX_ITER).ok_or_else(|| {
            Error::numerical(format!(
                "Hermitian eigensolver did not converge in {EIG_MAX_ITER} iterations \
                 (p = {p}, ‖A‖_F = {norm:e})"
            ))
        })?;

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = CMatrix::zeros(p, p);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("eigensolver produced non-finite eigenvalues"));
        }
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U diag(f(λ)) Uᴴ`, symmetrized.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        symmetrize(&(scaled * self.vectors.adjoint()))
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// A complex Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Wraps `a` after checking it is square and Hermitian to [`TOL_HERM`].
    /// The stored matrix is the exact Hermitian part of `a`.
    pub fn new(a: CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(format!(
                "Hermitian matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let skew = frobenius(&(&a - a.adjoint())) / 2.0;
        let norm = frobenius(&a);
        if skew > TOL_HERM * norm {
            return Err(Error::domain(format!(
                "matrix is not Hermitian: ‖A − Aᴴ‖/2 = {skew:e}, ‖A‖ = {norm:e}"
            )));
        }
        Ok(Self(symmetrize(&a)))
    }

    pub(crate) fn from_symmetrized(a: CMatrix) -> Self {
        debug_assert!(a.is_square());
        Self(a)
    }

    pub fn zeros(p: usize) -> Self {
        Self(CMatrix::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        Self(CMatrix::identity(p, p))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&v| c64(v)));
        Self(CMatrix::from_diagonal(&d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.0)
    }

    /// Real trace (the imaginary part of a Hermitian trace is zero).
    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    pub fn eig(&self) -> Result<HermitianEigen> {
        HermitianEigen::compute(&self.0)
    }

    /// Matrix exponential; always HPD.
    pub fn exp(&self) -> Result<HpdMatrix> {
        let eig = self.eig()?;
        Ok(HpdMatrix(eig.map(f64::exp)))
    }
}

/// A complex Hermitian positive-definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HpdMatrix(CMatrix);

impl HpdMatrix {
    /// Checks Hermitian symmetry and `λ_min > HPD_EIG_RATIO · λ_max`.
    pub fn new(a: CMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(a)?;
        let out = Self(h.0);
        out.positive_eig()?;
        Ok(out)
    }

    /// Wraps a matrix known to be HPD by construction; only symmetrizes.
    pub(crate) fn from_hermitian_unchecked(a: CMatrix) -> Self {
        Self(symmetrize(&a))
    }

    pub fn identity(p: usize) -> Self {
        Self(CMatrix::identity(p, p))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::from_real_diagonal(diag).0)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn to_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix(self.0.clone())
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("HPD scale factor must be positive, got {c}")));
        }
        Ok(Self(self.0.map(|z| z * c)))
    }

    /// Eigendecomposition, failing with a domain error if the spectrum is not
    /// safely positive.
    pub fn eig(&self) -> Result<HermitianEigen> {
        self.positive_eig()
    }

    fn positive_eig(&self) -> Result<HermitianEigen> {
        let eig = HermitianEigen::compute(&self.0)?;
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 0.0 && lo > HPD_EIG_RATIO * hi) {
            return Err(Error::domain(format!(
                "matrix is not safely positive definite: λ_min = {lo:e}, λ_max = {hi:e}"
            )));
        }
        Ok(eig)
    }

    pub fn log(&self) -> Result<HermitianMatrix> {
        Ok(HermitianMatrix(self.eig()?.map(f64::ln)))
    }

    pub fn sqrt(&self) -> Result<HpdMatrix> {
        Ok(Self(self.eig()?.map(f64::sqrt)))
    }

    pub fn inv_sqrt(&self) -> Result<HpdMatrix> {
        Ok(Self(self.eig()?.map(|l| 1.0 / l.sqrt())))
    }

    /// `(A^{1/2}, A^{-1/2})` from a single eigendecomposition.
    pub fn sqrt_and_inv_sqrt(&self) -> Result<(HpdMatrix, HpdMatrix)> {
        let eig = self.eig()?;
        Ok((Self(eig.map(f64::sqrt)), Self(eig.map(|l| 1.0 / l.sqrt()))))
    }

    pub fn pow(&self, t: f64) -> Result<HpdMatrix> {
        if t == 0.0 {
            return Ok(Self::identity(self.dim()));
        }
        Ok(Self(self.eig()?.map(|l| l.powf(t))))
    }

    pub fn inverse(&self) -> Result<HpdMatrix> {
        Ok(Self(self.eig()?.map(|l| 1.0 / l)))
    }

    /// `Σ log λ_i`.
    pub fn logdet(&self) -> Result<f64> {
        Ok(self.eig()?.values.iter().map(|l| l.ln()).sum())
    }

    /// Log-determinant from a Cholesky factor, for fixed-point loops where an
    /// eigendecomposition per iteration is wasteful.
    pub(crate) fn logdet_cholesky(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>())
    }

    pub(crate) fn cholesky(&self) -> Result<nalgebra::Cholesky<C64, nalgebra::Dyn>> {
        nalgebra::Cholesky::new(self.0.clone()).ok_or_else(|| {
            Error::numerical(format!(
                "Cholesky factorization failed on a {0}x{0} matrix (not numerically positive definite)",
                self.dim()
            ))
        })
    }

    /// `A / exp(logdet(A)/p)`, which has unit determinant.
    pub fn det_normalize(&self) -> Result<UnitDetHpd> {
        let p = self.dim() as f64;
        let scale = (-self.logdet()? / p).exp();
        let normalized = Self(self.0.map(|z| z * scale));
        Ok(UnitDetHpd::from_normalized(normalized))
    }

    /// `A Σ Aᴴ` for an arbitrary square `A`.
    pub fn congruence(&self, a: &CMatrix) -> Result<HpdMatrix> {
        if a.ncols() != self.dim() || !a.is_square() {
            return Err(Error::dim("congruence transform must be square and match"));
        }
        Self::new(symmetrize(&(a * &self.0 * a.adjoint())))
    }
}

pub fn mat_exp(a: &HermitianMatrix) -> Result<HpdMatrix> {
    a.exp()
}

pub fn mat_log(a: &HpdMatrix) -> Result<HermitianMatrix> {
    a.log()
}

pub fn mat_sqrt(a: &HpdMatrix) -> Result<HpdMatrix> {
    a.sqrt()
}

pub fn mat_inv_sqrt(a: &HpdMatrix) -> Result<HpdMatrix> {
    a.inv_sqrt()
}

pub fn mat_pow(a: &HpdMatrix, t: f64) -> Result<HpdMatrix> {
    a.pow(t)
}

pub fn logdet(a: &HpdMatrix) -> Result<f64> {
    a.logdet()
}

pub fn det_normalize(a: &HpdMatrix) -> Result<UnitDetHpd> {
    a.det_normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{complex_gaussian_matrix, random_hpd};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
        frobenius(&(a - b)) / frobenius(b).max(f64::MIN_POSITIVE)
    }

    fn real(rows: &[&[f64]]) -> CMatrix {
        let p = rows.len();
        CMatrix::from_fn(p, rows[0].len(), |i, j| c64(rows[i][j]))
    }

    #[test]
    fn herm_part_examples() {
        let a = real(&[&[0.0, 2.0], &[0.0, 0.0]]);
        let h = herm_part(&a).unwrap();
        assert_eq!(h.as_matrix(), &real(&[&[0.0, 1.0], &[1.0, 0.0]]));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = complex_gaussian_matrix(3, 3, &mut rng);
        let hb = herm_part(&b).unwrap();
        assert_eq!(hb.as_matrix(), &hb.as_matrix().adjoint());
        // Fixed point.
        let again = herm_part(hb.as_matrix()).unwrap();
        assert_eq!(again, hb);

        assert!(matches!(herm_part(&CMatrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn hermitian_constructor_rejects_skew() {
        let a = real(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(HermitianMatrix::new(a), Err(Error::Domain(_))));
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let eig = HermitianMatrix::identity(4).eig().unwrap();
        assert!(eig.values.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        let u = &eig.vectors;
        assert!(rel_err(&(u.adjoint() * u), &CMatrix::identity(4, 4)) < 1e-14);

        let eig = HermitianMatrix::from_real_diagonal(&[4.0, 1.0]).eig().unwrap();
        assert_eq!(eig.values.as_slice(), &[1.0, 4.0]);
        for j in 0..2 {
            let col_norm: f64 = eig.vectors.column(j).iter().map(|z| z.norm_sqr()).sum();
            assert!((col_norm - 1.0).abs() < 1e-14);
        }
        assert!(eig.vectors[(1, 0)].norm() > 0.999);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = herm_part(&complex_gaussian_matrix(4, 4, &mut rng)).unwrap();
            let eig = a.eig().unwrap();
            let rebuilt = eig.map(|l| l);
            assert!(rel_err(&rebuilt, a.as_matrix()) < 1e-12);
            assert!(eig.values.iter().zip(eig.values.iter().skip(1)).all(|(a, b)| a <= b));
            // Eigenvalues are real: Uᴴ A U is diagonal with negligible imaginary parts.
            let d = eig.vectors.adjoint() * a.as_matrix() * &eig.vectors;
            let scale = a.frobenius_norm();
            for i in 0..4 {
                assert!(d[(i, i)].im.abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn matrix_function_examples() {
        let z = HermitianMatrix::zeros(3).exp().unwrap();
        assert_eq!(z.as_matrix(), &CMatrix::identity(3, 3));

        let e = std::f64::consts::E;
        let l = HpdMatrix::from_real_diagonal(&[e, 1.0 / e]).unwrap().log().unwrap();
        assert!(rel_err(l.as_matrix(), &real(&[&[1.0, 0.0], &[0.0, -1.0]])) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hpd(3, 50.0, &mut rng);
        let half = a.pow(0.5).unwrap();
        let sq = half.as_matrix() * half.as_matrix();
        assert!(rel_err(&sq, a.as_matrix()) < 1e-10);

        assert!(rel_err(a.pow(1.0).unwrap().as_matrix(), a.as_matrix()) < 1e-12);
        assert_eq!(a.pow(0.0).unwrap().as_matrix(), &CMatrix::identity(3, 3));

        let (s, is) = a.sqrt_and_inv_sqrt().unwrap();
        assert!(rel_err(&(s.as_matrix() * is.as_matrix()), &CMatrix::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn logdet_and_normalization_examples() {
        assert_eq!(HpdMatrix::identity(5).logdet().unwrap(), 0.0);

        let two = HpdMatrix::from_real_diagonal(&[2.0; 4]).unwrap();
        let n = two.det_normalize().unwrap();
        assert!(rel_err(n.as_matrix(), &CMatrix::identity(4, 4)) < 1e-15);

        let d = HpdMatrix::from_real_diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let n = d.det_normalize().unwrap();
        assert!(
            rel_err(
                n.as_matrix(),
                &real(&[&[0.5, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]])
            ) < 1e-15
        );
        let det: f64 = n.as_matrix().diagonal().iter().map(|z| z.re).product();
        assert!((det - 1.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let indefinite = real(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(matches!(HpdMatrix::new(indefinite), Err(Error::Domain(_))));
        // Conditioning beyond the positivity threshold is rejected, not clamped.
        let near_singular = real(&[&[1.0, 0.0], &[0.0, 1e-13]]);
        assert!(matches!(HpdMatrix::new(near_singular.clone()), Err(Error::Domain(_))));
        let unchecked = HpdMatrix::from_hermitian_unchecked(near_singular);
        assert!(matches!(unchecked.log(), Err(Error::Domain(_))));
        assert!(matches!(unchecked.sqrt(), Err(Error::Domain(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exp_log_round_trip(seed in any::<u64>(), p in 1usize..=32, log_cond in 0.0f64..6.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hpd(p, 10f64.powf(log_cond), &mut rng);
            let back = a.log().unwrap().exp().unwrap();
            prop_assert!(rel_err(back.as_matrix(), a.as_matrix()) < 1e-10);
        }

        #[test]
        fn pow_is_additive(seed in any::<u64>(), p in 1usize..=8, s in -2.0f64..2.0, t in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hpd(p, 100.0, &mut rng);
            let lhs = a.pow(s).unwrap().as_matrix() * a.pow(t).unwrap().as_matrix();
            let rhs = a.pow(s + t).unwrap();
            prop_assert!(rel_err(&lhs, rhs.as_matrix()) < 1e-10);
        }

        #[test]
        fn normalized_logdet_vanishes(seed in any::<u64>(), p in 1usize..=16, scale in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hpd(p, 1e4, &mut rng).scale(scale).unwrap();
            let n = a.det_normalize().unwrap();
            prop_assert!(n.logdet().unwrap().abs() < 1e-10);
        }
    }
}
