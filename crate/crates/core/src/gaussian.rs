//! Multivariate Gaussians with cached Cholesky factors.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::operator::LinearOperator;
use crate::scalar::{c, Real};

/// Default size above which implicit precisions are not materialized.
pub const DEFAULT_DENSE_THRESHOLD: usize = 4096;

/// Relative asymmetry tolerated in a supplied covariance or precision.
const SYMMETRY_TOL: f64 = 1e-12;

/// `N(mean, Σ)` with `Σ` symmetric positive definite.
///
/// Both triangular factors are cached: `chol` with `chol·cholᵀ = Σ` and
/// `prec_chol` with `prec_chol·prec_cholᵀ = Σ⁻¹`. Whichever one was not
/// supplied at construction is derived on first use.
#[derive(Debug, Clone)]
pub struct Gaussian<T: Real> {
    mean: DVector<T>,
    chol: OnceLock<DMatrix<T>>,
    prec_chol: OnceLock<DMatrix<T>>,
}

fn symmetric_part<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.norm();
    let asym = (m - m.transpose()).norm();
    if scale > T::zero() && asym > c::<T>(SYMMETRY_TOL) * scale {
        return Err(Error::NotSymmetric((asym / scale).as_f64()));
    }
    Ok((m + m.transpose()) * c::<T>(0.5))
}

fn lower_factor<T: Real>(m: DMatrix<T>) -> Result<DMatrix<T>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = Cholesky::new(m).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    if l.diagonal().iter().any(|&d| d <= T::zero()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(l)
}

/// Given a lower factor `F` of `M`, returns a lower factor of `M⁻¹`.
fn inverse_factor<T: Real>(factor: &DMatrix<T>) -> DMatrix<T> {
    let n = factor.nrows();
    let inv = factor.solve_lower_triangular(&DMatrix::identity(n, n)).expect("factor has a positive diagonal");
    // M⁻¹ = F⁻ᵀ F⁻¹
    let m_inv = inv.transpose() * &inv;
    let sym = (&m_inv + m_inv.transpose()) * c::<T>(0.5);
    lower_factor(sym).expect("inverse of a positive definite matrix is positive definite")
}

impl<T: Real> Gaussian<T> {
    /// Builds from a dense covariance.
    pub fn new(mean: DVector<T>, covariance: DMatrix<T>) -> Result<Self> {
        check_dim(mean.len(), covariance.nrows())?;
        let l = lower_factor(symmetric_part(&covariance)?)?;
        Ok(Self {
            mean,
            chol: OnceLock::from(l),
            prec_chol: OnceLock::new(),
        })
    }

    /// Builds from a dense precision matrix `Σ⁻¹`.
    pub fn from_precision(mean: DVector<T>, precision: DMatrix<T>) -> Result<Self> {
        check_dim(mean.len(), precision.nrows())?;
        let p = lower_factor(symmetric_part(&precision)?)?;
        Ok(Self {
            mean,
            chol: OnceLock::new(),
            prec_chol: OnceLock::from(p),
        })
    }

    /// Builds `N(mean, (δ LᵀL)⁻¹)`. The precision is materialized densely,
    /// which is refused above `dense_threshold` unknowns.
    pub fn from_precision_operator(mean: DVector<T>, l: &LinearOperator<T>, delta: T, dense_threshold: usize) -> Result<Self> {
        let n = l.cols();
        check_dim(n, mean.len())?;
        if n > dense_threshold {
            return Err(Error::TooLarge { n, threshold: dense_threshold });
        }
        if delta <= T::zero() {
            return Err(Error::InvalidParameter("delta must be positive".into()));
        }
        Self::from_precision(mean, l.normal_matrix() * delta)
    }

    /// Standard normal in `n` dimensions.
    pub fn standard(n: usize) -> Self {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    /// Lower factor of the covariance.
    pub fn chol(&self) -> &DMatrix<T> {
        self.chol
            .get_or_init(|| inverse_factor(self.prec_chol.get().expect("one factor is always present")))
    }

    /// Lower factor of the precision.
    pub fn prec_chol(&self) -> &DMatrix<T> {
        self.prec_chol
            .get_or_init(|| inverse_factor(self.chol.get().expect("one factor is always present")))
    }

    pub fn covariance(&self) -> DMatrix<T> {
        let l = self.chol();
        l * l.transpose()
    }

    pub fn precision(&self) -> DMatrix<T> {
        let p = self.prec_chol();
        p * p.transpose()
    }

    /// `Σ v`.
    pub fn apply_covariance(&self, v: &DVector<T>) -> DVector<T> {
        let l = self.chol();
        l * (l.transpose() * v)
    }

    /// `Σ⁻¹ v`.
    pub fn apply_precision(&self, v: &DVector<T>) -> DVector<T> {
        let p = self.prec_chol();
        p * (p.transpose() * v)
    }

    /// Solves `Σ y = x` through the precision factor.
    pub fn solve_covariance(&self, x: &DVector<T>) -> DVector<T> {
        self.apply_precision(x)
    }

    /// One draw `μ + chol·z`, `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let z = DVector::from_fn(self.dim(), |_, _| T::standard_normal(rng));
        &self.mean + self.chol() * z
    }

    /// One draw from `N(0, Σ⁻¹)`.
    pub fn sample_precision_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let z = DVector::from_fn(self.dim(), |_, _| T::standard_normal(rng));
        self.prec_chol() * z
    }

    /// `−½ (x−μ)ᵀ Σ⁻¹ (x−μ) − ½ log det(2πΣ)`.
    pub fn log_density(&self, x: &DVector<T>) -> Result<T> {
        check_dim(self.dim(), x.len())?;
        let l = self.chol();
        let r = l.solve_lower_triangular(&(x - &self.mean)).expect("factor has a positive diagonal");
        Ok(c::<T>(-0.5) * r.norm_squared() - self.half_log_det_2pi())
    }

    /// `½ log det(2πΣ)`.
    pub fn half_log_det_2pi(&self) -> T {
        let log_diag: T = self.chol().diagonal().iter().map(|d| d.ln()).sum();
        log_diag + c::<T>(0.5 * (2.0 * std::f64::consts::PI).ln()) * c::<T>(self.dim() as f64)
    }

    pub fn density(&self, x: &DVector<T>) -> Result<T> {
        self.log_density(x).map(|v| v.exp())
    }
}

/// Whether `[U₁, Σ U₂]` has numerical rank `n`.
///
/// For a jointly orthonormal `[U₁, U₂]` and SPD `Σ` this always holds; a
/// `false` signals a violated precondition.
pub fn mixed_basis_full_rank<T: Real>(u1: &DMatrix<T>, u2: &DMatrix<T>, sigma: &DMatrix<T>) -> Result<bool> {
    let n = sigma.nrows();
    check_dim(n, sigma.ncols())?;
    check_dim(n, u1.nrows())?;
    check_dim(n, u2.nrows())?;
    check_dim(n, u1.ncols() + u2.ncols())?;
    let mut mixed = DMatrix::zeros(n, n);
    mixed.columns_mut(0, u1.ncols()).copy_from(u1);
    mixed.columns_mut(u1.ncols(), u2.ncols()).copy_from(&(sigma * u2));
    let sv = mixed.singular_values();
    let max = sv.max();
    let min = sv.min();
    Ok(max > T::zero() && min > c::<T>(1e-10) * max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::testing::{random_orthonormal, random_spd};

    fn empirical_cov(samples: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let n = samples[0].len();
        let k = samples.len() as f64;
        let mean = samples.iter().fold(DVector::zeros(n), |acc, s| acc + s) / k;
        let cov = samples.iter().fold(DMatrix::zeros(n, n), |acc, s| {
            let d = s - &mean;
            acc + &d * d.transpose()
        }) / (k - 1.0);
        (mean, cov)
    }

    #[test]
    fn standard_normal_mean_is_small() {
        let g = Gaussian::<f64>::standard(3);
        let mut rng = stream(11);
        let draws: Vec<_> = (0..100_000).map(|_| g.sample(&mut rng)).collect();
        let (mean, _) = empirical_cov(&draws);
        let bound = 4.0 / (1e5f64).sqrt();
        assert!(mean.iter().all(|m| m.abs() < bound), "{mean}");
    }

    #[test]
    fn diagonal_variances() {
        let g = Gaussian::new(DVector::from_vec(vec![3.0, -1.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        let mut rng = stream(12);
        let draws: Vec<_> = (0..100_000).map(|_| g.sample(&mut rng)).collect();
        let (_, cov) = empirical_cov(&draws);
        assert!((cov[(0, 0)] / 4.0 - 1.0).abs() < 0.05);
        assert!((cov[(1, 1)] / 9.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn random_spd_covariance_recovered() {
        let mut rng = stream(13);
        let sigma: DMatrix<f64> = random_spd(4, &mut rng);
        let g = Gaussian::new(DVector::zeros(4), sigma.clone()).unwrap();
        let draws: Vec<_> = (0..100_000).map(|_| g.sample(&mut rng)).collect();
        let (_, cov) = empirical_cov(&draws);
        assert!((cov - &sigma).norm() / sigma.norm() < 0.05);
    }

    #[test]
    fn precision_noise_moments() {
        let g = Gaussian::new(DVector::zeros(1), DMatrix::from_element(1, 1, 4.0)).unwrap();
        let mut rng = stream(14);
        let draws: Vec<_> = (0..100_000).map(|_| g.sample_precision_noise(&mut rng)).collect();
        let (_, cov) = empirical_cov(&draws);
        assert!((cov[(0, 0)] / 0.25 - 1.0).abs() < 0.05);

        let sigma: DMatrix<f64> = random_spd(3, &mut rng);
        let g = Gaussian::new(DVector::zeros(3), sigma.clone()).unwrap();
        let draws: Vec<_> = (0..100_000).map(|_| g.sample_precision_noise(&mut rng)).collect();
        let (_, cov) = empirical_cov(&draws);
        let prec = sigma.try_inverse().unwrap();
        assert!((cov - &prec).norm() / prec.norm() < 0.05);
    }

    #[test]
    fn log_density_known_values() {
        let g = Gaussian::<f64>::standard(1);
        let v = g.log_density(&DVector::from_element(1, 0.0)).unwrap();
        assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);

        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let g = Gaussian::new(DVector::zeros(2), sigma).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        // inverse of [[2,1],[1,2]] is [[2,-1],[-1,2]]/3, so xᵀΣ⁻¹x = 2/3
        let expected = -(2.0 / 3.0) / 2.0 - 0.5 * ((2.0 * std::f64::consts::PI).powi(2) * 3.0).ln();
        assert!((g.log_density(&x).unwrap() - expected).abs() < 1e-12);
        assert!((g.log_density(&DVector::zeros(2)).unwrap() + g.half_log_det_2pi()).abs() < 1e-14);
        assert!(matches!(g.log_density(&DVector::zeros(3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_bad_covariances() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(Gaussian::new(DVector::zeros(2), asym), Err(Error::NotSymmetric(_))));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(Gaussian::new(DVector::zeros(2), singular).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(Gaussian::new(DVector::zeros(2), indefinite).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn factor_reconstructs_covariance() {
        let mut rng = stream(15);
        for n in [1, 3, 8, 20] {
            let sigma: DMatrix<f64> = random_spd(n, &mut rng);
            let g = Gaussian::new(DVector::zeros(n), sigma.clone()).unwrap();
            let l = g.chol();
            assert!((l * l.transpose() - &sigma).norm() / sigma.norm() < 1e-10);
        }
    }

    #[test]
    fn precision_round_trip() {
        let mut rng = stream(16);
        for n in [2, 5, 16, 64] {
            let sigma: DMatrix<f64> = random_spd(n, &mut rng);
            let g = Gaussian::new(DVector::zeros(n), sigma.clone()).unwrap();
            let x = DVector::from_fn(n, |_, _| f64::standard_normal(&mut rng));
            let via_prec = g.solve_covariance(&x);
            let direct = sigma.clone().cholesky().unwrap().solve(&x);
            assert!((via_prec - &direct).norm() / direct.norm() < 1e-8, "n={n}");
            // and the precision-built Gaussian recovers the covariance factor
            let h = Gaussian::from_precision(DVector::zeros(n), g.precision()).unwrap();
            assert!((h.covariance() - &sigma).norm() / sigma.norm() < 1e-8);
        }
    }

    #[test]
    fn implicit_precision_respects_threshold() {
        let l = LinearOperator::<f64>::identity(5);
        let g = Gaussian::from_precision_operator(DVector::zeros(5), &l, 4.0, 10).unwrap();
        assert!((g.covariance() - DMatrix::identity(5, 5) * 0.25).norm() < 1e-12);
        assert!(matches!(
            Gaussian::from_precision_operator(DVector::zeros(5), &l, 4.0, 4),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn seeds_repeat_bitwise() {
        let mut rng = stream(17);
        let g = Gaussian::<f64>::new(DVector::zeros(3), random_spd(3, &mut rng)).unwrap();
        let run = |g: &Gaussian<f64>| {
            let mut r = stream(99);
            (0..5).map(|_| g.sample(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(run(&g), run(&g.clone()));
    }

    #[test]
    fn mixed_basis_examples() {
        let mut rng = stream(18);
        let u: DMatrix<f64> = random_orthonormal(3, &mut rng);
        let ident = DMatrix::<f64>::identity(3, 3);
        let (u1, u2) = (u.columns(0, 1).into_owned(), u.columns(1, 2).into_owned());
        assert!(mixed_basis_full_rank(&u1, &u2, &ident).unwrap());
        let sigma: DMatrix<f64> = random_spd(3, &mut rng);
        assert!(mixed_basis_full_rank(&u1, &u2, &sigma).unwrap());
        let mut dup = u2.clone();
        dup.set_column(0, &u1.column(0));
        assert!(!mixed_basis_full_rank(&u1, &dup, &ident).unwrap());
        assert!(mixed_basis_full_rank(&u1, &u1, &ident).is_err());
    }

    #[test]
    fn mixed_basis_property_random_instances() {
        let mut rng = stream(19);
        for trial in 0..200 {
            let n = 1 + trial % 16;
            let k = trial % (n + 1);
            let u: DMatrix<f64> = random_orthonormal(n, &mut rng);
            let sigma: DMatrix<f64> = random_spd(n, &mut rng);
            let u1 = u.columns(0, k).into_owned();
            let u2 = u.columns(k, n - k).into_owned();
            assert!(mixed_basis_full_rank(&u1, &u2, &sigma).unwrap(), "trial {trial}");
        }
    }
}
