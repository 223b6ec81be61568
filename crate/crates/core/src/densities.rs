//! Closed-form densities of obliquely projected Gaussians on the boundary
//! of a halfspace and of a disc, and the two Gaussian integrals behind them.
//!
//! In both cases the preimage of a boundary point `p` with outward normal
//! `e` is the ray `p + tΣe`, `t ≥ 0`, so the boundary density is a
//! one-dimensional Gaussian integral along that ray times a Jacobian.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::Gaussian;
use crate::scalar::{c, Real};
use crate::special::{erfc, erfcx};

/// `√π/2 · exp(c) · erfcx(z)`, merging `exp(c + z²)` when `erfcx` would overflow.
fn scaled_half_erfc(c: f64, z: f64) -> f64 {
    if z >= 0.0 {
        c.exp() * erfcx(z)
    } else {
        (c + z * z).exp() * erfc(z)
    }
}

/// `∫₀^∞ exp(at² + bt + c) dt` for `a < 0`.
pub fn gauss_integral_linear(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a < 0.0) {
        return Err(Error::InvalidParameter(format!("quadratic coefficient must be negative, got {a}")));
    }
    let s = (-a).sqrt();
    Ok(PI.sqrt() / (2.0 * s) * scaled_half_erfc(c, -b / (2.0 * s)))
}

/// `∫₀^∞ (d + ft) exp(−½(at² + bt + c)) dt` for `a > 0`.
pub fn gauss_integral_affine(a: f64, b: f64, c: f64, d: f64, f: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("quadratic coefficient must be positive, got {a}")));
    }
    let z = b / (8.0 * a).sqrt();
    let elementary = f / a * (-0.5 * c).exp();
    let erfc_part = (2.0 * PI).sqrt() * (2.0 * a * d - b * f) / (4.0 * a.powf(1.5)) * scaled_half_erfc(-0.5 * c, z);
    Ok(elementary + erfc_part)
}

/// A density on a boundary piece, in surface coordinates.
pub trait BoundaryDensity<T: Real> {
    fn surface_dim(&self) -> usize;
    fn eval(&self, u: &[T]) -> T;
}

/// Orthonormal basis of `Null(aᵀ)` from the Householder reflector that maps
/// `a` onto a coordinate axis.
pub fn nullspace_basis<T: Real>(a: &DVector<T>) -> Result<DMatrix<T>> {
    let n = a.len();
    let norm = a.norm();
    if n < 1 || !(norm > T::zero()) {
        return Err(Error::InvalidParameter("normal must be nonzero".into()));
    }
    let mut v = a / norm;
    let sign = if v[0] >= T::zero() { T::one() } else { -T::one() };
    v[0] += sign;
    let vv = v.norm_squared();
    let h = DMatrix::identity(n, n) - &v * v.transpose() * (c::<T>(2.0) / vv);
    Ok(h.columns(1, n - 1).into_owned())
}

/// Density on the hyperplane `aᵀx = b` of `N(μ, Σ)` obliquely projected onto
/// `{aᵀx ≤ b}`, in coordinates `x = x0 + Fu`.
#[derive(Debug, Clone)]
pub struct HalfspaceBoundaryDensity<T: Real> {
    g: Gaussian<T>,
    x0: DVector<T>,
    f: DMatrix<T>,
    /// `‖a‖⁻¹ aᵀΣa ∫₀^∞ exp(−t aᵀ(p − μ) − ½t² aᵀΣa) dt`, independent of `u`.
    factor: T,
}

impl<T: Real> HalfspaceBoundaryDensity<T> {
    pub fn new(g: &Gaussian<T>, a: &DVector<T>, b: T, x0: &DVector<T>, f: &DMatrix<T>) -> Result<Self> {
        let n = g.dim();
        check_dim(n, a.len())?;
        check_dim(n, x0.len())?;
        check_dim(n, f.nrows())?;
        check_dim(n - 1, f.ncols())?;
        let tol = c::<T>(1e-10);
        let scale = T::one() + b.abs() + a.norm() * x0.norm();
        if (a.dot(x0) - b).abs() > tol * scale {
            return Err(Error::InvalidParameter("x0 is not on the hyperplane".into()));
        }
        if n > 1 {
            let gram = f.transpose() * f - DMatrix::identity(n - 1, n - 1);
            if gram.amax() > tol {
                return Err(Error::InvalidParameter("basis columns are not orthonormal".into()));
            }
            if (f.transpose() * a).amax() > tol * a.norm() {
                return Err(Error::InvalidParameter("basis is not orthogonal to the normal".into()));
            }
        }
        let sa = g.apply_covariance(a).dot(a).as_f64();
        let gap = (b - a.dot(g.mean())).as_f64();
        let integral = gauss_integral_linear(-0.5 * sa, -gap, 0.0)?;
        let factor = c::<T>(sa / a.norm().as_f64() * integral);
        Ok(Self {
            g: g.clone(),
            x0: x0.clone(),
            f: f.clone(),
            factor,
        })
    }

    /// Builds `x0` as the point of the hyperplane closest to the origin and
    /// `F` from [`nullspace_basis`].
    pub fn with_default_chart(g: &Gaussian<T>, a: &DVector<T>, b: T) -> Result<Self> {
        let x0 = a * (b / a.norm_squared());
        let f = nullspace_basis(a)?;
        Self::new(g, a, b, &x0, &f)
    }

    pub fn point(&self, u: &[T]) -> DVector<T> {
        &self.x0 + &self.f * DVector::from_column_slice(u)
    }
}

impl<T: Real> BoundaryDensity<T> for HalfspaceBoundaryDensity<T> {
    fn surface_dim(&self) -> usize {
        self.f.ncols()
    }

    fn eval(&self, u: &[T]) -> T {
        let p = self.point(u);
        self.g.density(&p).map(|d| d * self.factor).unwrap_or_else(|_| T::zero())
    }
}

/// Density over the angle `u` on the circle `‖x − center‖ = r` of a planar
/// Gaussian obliquely projected onto the disc.
///
/// With `e = (cos u, sin u)` and `p = center + r e`, the chart
/// `(t, u) ↦ p + tΣe` has Jacobian `r eᵀΣe + t det Σ`, so the density is
/// `π(p) ∫₀^∞ (r α + t det Σ) exp(−½(α t² + β t)) dt` with `α = eᵀΣe` and
/// `β = 2eᵀ(p − μ)`.
#[derive(Debug, Clone)]
pub struct DiscBoundaryDensity<T: Real> {
    g: Gaussian<T>,
    radius: T,
    center: DVector<T>,
    det: f64,
}

impl<T: Real> DiscBoundaryDensity<T> {
    pub fn new(g: &Gaussian<T>, radius: T, center: &DVector<T>) -> Result<Self> {
        if g.dim() != 2 {
            return Err(Error::Unsupported("disc boundary density needs a planar Gaussian"));
        }
        check_dim(2, center.len())?;
        if !(radius > T::zero()) {
            return Err(Error::InvalidParameter("radius must be positive".into()));
        }
        let det = g.covariance().determinant().as_f64();
        Ok(Self {
            g: g.clone(),
            radius,
            center: center.clone(),
            det,
        })
    }

    /// Unit disc centered at the origin.
    pub fn unit(g: &Gaussian<T>) -> Result<Self> {
        Self::new(g, T::one(), &DVector::zeros(2))
    }

    pub fn point(&self, u: T) -> DVector<T> {
        let e = DVector::from_vec(vec![u.cos(), u.sin()]);
        &self.center + e * self.radius
    }
}

impl<T: Real> BoundaryDensity<T> for DiscBoundaryDensity<T> {
    fn surface_dim(&self) -> usize {
        1
    }

    fn eval(&self, u: &[T]) -> T {
        let e = DVector::from_vec(vec![u[0].cos(), u[0].sin()]);
        let p = &self.center + &e * self.radius;
        let alpha = self.g.apply_covariance(&e).dot(&e).as_f64();
        let beta = 2.0 * e.dot(&(&p - self.g.mean())).as_f64();
        let d = self.radius.as_f64() * alpha;
        let ray = gauss_integral_affine(alpha, beta, 0.0, d, self.det).unwrap_or(0.0);
        self.g.density(&p).map(|dens| dens * c::<T>(ray)).unwrap_or_else(|_| T::zero())
    }
}

/// The one-dimensional boundary densities of a planar Gaussian obliquely
/// projected onto the quarter disc `{x ≥ 0, y ≥ 0, x² + y² ≤ r²}`: the bottom
/// edge in `x ∈ (0, r)`, the left edge in `y ∈ (0, r)` and the arc in the
/// angle `u ∈ (0, π/2)`.
#[derive(Debug, Clone)]
pub struct QuarterDiscDensities<T: Real> {
    pub bottom: HalfspaceBoundaryDensity<T>,
    pub left: HalfspaceBoundaryDensity<T>,
    pub arc: DiscBoundaryDensity<T>,
    pub radius: T,
}

impl<T: Real> QuarterDiscDensities<T> {
    pub fn new(g: &Gaussian<T>, radius: T) -> Result<Self> {
        let zero = T::zero();
        let origin = DVector::zeros(2);
        let bottom = HalfspaceBoundaryDensity::new(
            g,
            &DVector::from_vec(vec![zero, -T::one()]),
            zero,
            &origin,
            &DMatrix::from_column_slice(2, 1, &[T::one(), zero]),
        )?;
        let left = HalfspaceBoundaryDensity::new(
            g,
            &DVector::from_vec(vec![-T::one(), zero]),
            zero,
            &origin,
            &DMatrix::from_column_slice(2, 1, &[zero, T::one()]),
        )?;
        let arc = DiscBoundaryDensity::new(g, radius, &origin)?;
        Ok(Self { bottom, left, arc, radius })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_half_line};
    use crate::rng::stream;
    use crate::testing::{random_spd, random_vector};
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    /// Quadrature split at the integrand's peak so that a far-away peak is
    /// never missed.
    fn peaked_oracle(g: impl Fn(f64) -> f64, peak: f64) -> f64 {
        let peak = peak.max(0.0);
        let head = if peak > 0.0 { integrate(&g, 0.0, peak, 0.0, 1e-14).value } else { 0.0 };
        head + integrate_half_line(|s| g(peak + s), 1e-14).value
    }

    fn linear_oracle(a: f64, b: f64, c: f64) -> f64 {
        peaked_oracle(|t| (a * t * t + b * t + c).exp(), -b / (2.0 * a))
    }

    fn affine_oracle(a: f64, b: f64, c: f64, d: f64, f: f64) -> f64 {
        peaked_oracle(|t| (d + f * t) * (-0.5 * (a * t * t + b * t + c)).exp(), -b / (2.0 * a))
    }

    /// Unit-disc density as displayed in closed form, with `α = nᵀΣn`.
    fn disc_display(g: &Gaussian<f64>, u: f64) -> f64 {
        let sigma = g.covariance();
        let n = v(&[u.cos(), u.sin()]);
        let rn = v(&[-u.sin(), u.cos()]);
        let sn = &sigma * &n;
        let alpha = n.dot(&sn);
        let beta = 2.0 * n.dot(&(&n - g.mean()));
        let k = sn[0] * rn[1] - sn[1] * rn[0];
        let det = sigma.determinant();
        let z = beta / (8.0 * alpha).sqrt();
        g.density(&n).unwrap() * (det / alpha + PI.sqrt() / (8f64.sqrt() * alpha.powf(1.5)) * (2.0 * alpha * k - beta * det) * (z * z).exp() * libm::erfc(z))
    }

    /// Ray integral `∫₀^∞ (r eᵀΣe + t det Σ) π(p + tΣe) dt` by quadrature.
    fn disc_ray_oracle(g: &Gaussian<f64>, r: f64, center: &DVector<f64>, u: f64) -> f64 {
        let sigma = g.covariance();
        let e = v(&[u.cos(), u.sin()]);
        let p = center + &e * r;
        let se = &sigma * &e;
        let jac0 = r * e.dot(&se);
        let det = sigma.determinant();
        integrate_half_line(|t| (jac0 + t * det) * g.density(&(&p + &se * t)).unwrap(), 1e-13).value
    }

    #[test]
    fn linear_identity_examples() {
        assert!((gauss_integral_linear(-0.5, 0.0, 0.0).unwrap() - (PI / 2.0).sqrt()).abs() < 1e-15);
        let val = gauss_integral_linear(-1.0, 1.0, 0.0).unwrap();
        assert!((val - linear_oracle(-1.0, 1.0, 0.0)).abs() < 1e-10);
        let val = gauss_integral_linear(-1.0, -50.0, 0.0).unwrap();
        let q = linear_oracle(-1.0, -50.0, 0.0);
        assert!(val.is_finite() && val > 0.0);
        assert!((val / q - 1.0).abs() < 1e-10);
        assert!(gauss_integral_linear(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn affine_identity_examples() {
        assert!((gauss_integral_affine(1.0, 0.0, 0.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((gauss_integral_affine(1.0, 0.0, 0.0, 1.0, 0.0).unwrap() - (PI / 2.0).sqrt()).abs() < 1e-15);
        assert!(gauss_integral_affine(-1.0, 0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn identities_match_quadrature_on_random_draws() {
        let mut rng = stream(11);
        for _ in 0..1000 {
            let a = rng.random_range(0.5..4.0);
            let b = rng.random_range(-5.0..5.0);
            let c = rng.random_range(-2.0..2.0);
            let d = rng.random_range(0.1..2.0);
            let f = rng.random_range(0.1..2.0);
            let exact = gauss_integral_affine(a, b, c, d, f).unwrap();
            assert!((exact / affine_oracle(a, b, c, d, f) - 1.0).abs() < 1e-9);
            let exact = gauss_integral_linear(-a, b, c).unwrap();
            assert!((exact / linear_oracle(-a, b, c) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identities_in_extreme_regimes() {
        let mut rng = stream(12);
        for _ in 0..1000 {
            let a = rng.random_range(0.5..4.0);
            let b = rng.random_range(-100.0..100.0);
            let d = rng.random_range(0.1..2.0);
            let f = rng.random_range(0.1..2.0);
            // keep the integrand's peak at order one
            let c = if b < 0.0 { b * b / (4.0 * a) } else { 0.0 };
            let exact = gauss_integral_affine(a, b, c, d, f).unwrap();
            assert!(
                (exact / affine_oracle(a, b, c, d, f) - 1.0).abs() < 1e-6,
                "a={a} b={b} c={c} d={d} f={f} {exact} {}",
                affine_oracle(a, b, c, d, f)
            );
            let c = if b > 0.0 { -b * b / (4.0 * a) } else { 0.0 };
            let exact = gauss_integral_linear(-a, b, c).unwrap();
            assert!(
                (exact / linear_oracle(-a, b, c) - 1.0).abs() < 1e-6,
                "a={a} b={b} c={c} {exact} {}",
                linear_oracle(-a, b, c)
            );
        }
    }

    #[test]
    fn halfspace_point_mass_in_one_dimension() {
        let g = Gaussian::<f64>::standard(1);
        let dens = HalfspaceBoundaryDensity::new(&g, &v(&[1.0]), 0.0, &v(&[0.0]), &DMatrix::zeros(1, 0)).unwrap();
        assert_eq!(dens.surface_dim(), 0);
        assert!((dens.eval(&[]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn halfspace_line_mass_is_half() {
        let g = Gaussian::<f64>::standard(2);
        let dens = HalfspaceBoundaryDensity::new(&g, &v(&[0.0, 1.0]), 0.0, &v(&[0.0, 0.0]), &DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let mass = integrate(|u| dens.eval(&[u]), -40.0, 40.0, 1e-13, 1e-12).value;
        assert!((mass - 0.5).abs() < 1e-6);
    }

    #[test]
    fn halfspace_mass_equals_exterior_probability() {
        let mut rng = stream(13);
        for _ in 0..20 {
            let g = Gaussian::new(random_vector(2, &mut rng), random_spd(2, &mut rng)).unwrap();
            let a: DVector<f64> = random_vector(2, &mut rng);
            let b = rng.random_range(-1.0..1.0);
            let dens = HalfspaceBoundaryDensity::with_default_chart(&g, &a, b).unwrap();
            let mass = integrate(|u| dens.eval(&[u]), -60.0, 60.0, 1e-14, 1e-12).value;
            let s = g.apply_covariance(&a).dot(&a).sqrt();
            let exterior = crate::special::normal_sf((b - a.dot(g.mean())) / s);
            assert!((mass - exterior).abs() < 1e-8, "{mass} vs {exterior}");
        }
    }

    #[test]
    fn halfspace_rejects_bad_charts() {
        let g = Gaussian::<f64>::standard(2);
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(HalfspaceBoundaryDensity::new(&g, &v(&[0.0, 1.0]), 0.0, &v(&[0.0, 1.0]), &f).is_err());
        let skew = DMatrix::from_column_slice(2, 1, &[0.6, 0.8]);
        assert!(HalfspaceBoundaryDensity::new(&g, &v(&[0.0, 1.0]), 0.0, &v(&[0.0, 0.0]), &skew).is_err());
        let long = DMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        assert!(HalfspaceBoundaryDensity::new(&g, &v(&[0.0, 1.0]), 0.0, &v(&[0.0, 0.0]), &long).is_err());
    }

    #[test]
    fn nullspace_basis_is_orthonormal_complement() {
        let mut rng = stream(14);
        for n in 1..8 {
            let a: DVector<f64> = random_vector(n, &mut rng);
            let f = nullspace_basis(&a).unwrap();
            assert_eq!(f.ncols(), n - 1);
            assert!((f.transpose() * &f - DMatrix::identity(n - 1, n - 1)).amax() < 1e-14);
            assert!((f.transpose() * &a).amax() < 1e-14 * a.norm());
        }
    }

    #[test]
    fn disc_rotationally_symmetric_case() {
        let g = Gaussian::<f64>::standard(2);
        let dens = DiscBoundaryDensity::unit(&g).unwrap();
        let first = dens.eval(&[0.0]);
        for k in 1..16 {
            let u = 2.0 * PI * k as f64 / 16.0;
            assert!((dens.eval(&[u]) - first).abs() < 1e-14);
        }
        let mass = integrate(|u| dens.eval(&[u]), 0.0, 2.0 * PI, 1e-14, 1e-12).value;
        assert!((mass - (-0.5f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn disc_mass_concentrates_toward_the_mean() {
        let g = Gaussian::new(v(&[3.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        let dens = DiscBoundaryDensity::unit(&g).unwrap();
        assert!(dens.eval(&[0.0]) > dens.eval(&[PI]));
    }

    #[test]
    fn disc_matches_closed_form_display() {
        let mut rng = stream(15);
        for _ in 0..20 {
            let g = Gaussian::new(random_vector(2, &mut rng), random_spd(2, &mut rng)).unwrap();
            let dens = DiscBoundaryDensity::unit(&g).unwrap();
            for k in 0..12 {
                let u = 2.0 * PI * (k as f64 + 0.3) / 12.0;
                let (x, y) = (dens.eval(&[u]), disc_display(&g, u));
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn disc_radius_and_center_ray_integral() {
        let mut rng = stream(16);
        for _ in 0..20 {
            let g = Gaussian::new(random_vector(2, &mut rng), random_spd(2, &mut rng)).unwrap();
            let r = rng.random_range(0.3..2.0);
            let center: DVector<f64> = random_vector::<f64, _>(2, &mut rng) * 0.5;
            let dens = DiscBoundaryDensity::new(&g, r, &center).unwrap();
            for k in 0..8 {
                let u = 2.0 * PI * (k as f64 + 0.5) / 8.0;
                let (x, y) = (dens.eval(&[u]), disc_ray_oracle(&g, r, &center, u));
                assert!((x - y).abs() <= 1e-9 * y.max(1e-300), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn disc_mass_equals_exterior_probability_for_isotropic_gaussians() {
        for s in [0.5f64, 1.0, 2.0] {
            let g = Gaussian::new(DVector::zeros(2), DMatrix::identity(2, 2) * (s * s)).unwrap();
            let dens = DiscBoundaryDensity::new(&g, 1.3, &DVector::zeros(2)).unwrap();
            let mass = integrate(|u| dens.eval(&[u]), 0.0, 2.0 * PI, 1e-14, 1e-12).value;
            assert!((mass - (-0.5 * (1.3 / s).powi(2)).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn disc_needs_planar_gaussian() {
        assert!(DiscBoundaryDensity::unit(&Gaussian::<f64>::standard(3)).is_err());
    }

    proptest! {
        #[test]
        fn densities_are_nonnegative(seed in 0u64..5_000, u in 0.0f64..6.3) {
            let mut rng = stream(seed);
            let g = Gaussian::new(random_vector::<f64, _>(2, &mut rng) * 3.0, random_spd(2, &mut rng)).unwrap();
            let q = QuarterDiscDensities::new(&g, 1.0).unwrap();
            prop_assert!(q.arc.eval(&[u]) >= 0.0);
            prop_assert!(q.bottom.eval(&[u]) >= 0.0);
            prop_assert!(q.left.eval(&[u]) >= 0.0);
        }
    }
}
