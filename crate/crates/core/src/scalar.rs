//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], which is implemented for
//! `f32` and `f64`. The linear algebra comes from nalgebra, so `Real` builds
//! on its `RealField` (itself layered on num-traits) and adds the handful of
//! conversions and random draws the samplers need.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use nalgebra::RealField;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Floating point scalar usable throughout the crate.
pub trait Real: RealField + Copy + Debug + Display + Sum + Send + Sync + 'static {
    /// Lossy conversion from `f64`.
    fn of(x: f64) -> Self;

    /// Widening conversion to `f64`.
    fn as_f64(self) -> f64;

    /// Machine epsilon.
    fn epsilon() -> Self;

    /// Draws one standard normal variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draws from `Gamma(shape, rate)`; shape and rate must be positive.
    fn gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self;

    /// Draws from `[0, 1)`.
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn epsilon() -> Self {
                <$t>::EPSILON
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self {
                // rand_distr is shape-scale; the samplers here are shape-rate
                let dist = Gamma::new(shape, 1.0 / rate).expect("gamma parameters must be positive");
                dist.sample(rng)
            }

            #[inline]
            fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Shorthand for [`Real::of`].
#[inline]
pub fn c<T: Real>(x: f64) -> T {
    T::of(x)
}
