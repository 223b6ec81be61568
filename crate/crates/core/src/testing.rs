//! Random instance generators shared by unit tests, integration tests and
//! the `verify` harness.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::scalar::{c, Real};

/// Standard normal vector.
pub fn random_vector<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(n, |_, _| T::standard_normal(rng))
}

/// Haar-ish orthonormal `n × n` matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthonormal<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    let g = DMatrix::from_fn(n, n, |_, _| T::standard_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// SPD matrix `Q diag(λ) Qᵀ` with eigenvalues uniform in `[0.3, 3]`.
pub fn random_spd<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    random_spd_in(n, c(0.3), c(3.0), rng)
}

/// SPD matrix with eigenvalues uniform in `[lo, hi]`.
pub fn random_spd_in<T: Real, R: Rng + ?Sized>(n: usize, lo: T, hi: T, rng: &mut R) -> DMatrix<T> {
    let q = random_orthonormal::<T, _>(n, rng);
    let eig = DVector::from_fn(n, |_, _| lo + (hi - lo) * T::uniform01(rng));
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * c::<T>(0.5)
}
