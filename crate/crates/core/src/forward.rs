//! Test problems: Gaussian blur, finite-difference priors, a parallel-beam
//! Radon transform, the Shepp–Logan phantom, a piecewise test signal and
//! noisy data generation.
//!
//! Images are stored row-major with row 0 at the top. On a `side × side`
//! image the pixel `(r, c)` covers the unit square centred at
//! `(−side/2 + c + ½, side/2 − r − ½)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::operator::{CsrMatrix, LinearOperator};
use crate::rng::stream;
use crate::scalar::{c, Real};

/// Tolerance below which a ray direction component counts as zero.
const PARALLEL_TOL: f64 = 1e-12;

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.into()))
    }
}

/// Dense Toeplitz blur `A_ij = h/(γ√(2π)) exp(−½(h(i−j)/γ)²)`, `h = 1/n`.
pub fn build_blur_operator<T: Real>(n: usize, gamma: f64) -> Result<LinearOperator<T>> {
    require(n >= 2, "blur needs n >= 2")?;
    require(gamma > 0.0 && gamma.is_finite(), "blur width must be positive")?;
    let h = 1.0 / n as f64;
    let scale = h / (gamma * (2.0 * PI).sqrt());
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = h * (i as f64 - j as f64) / gamma;
        c::<T>(scale * (-0.5 * d * d).exp())
    });
    Ok(LinearOperator::dense("gaussian blur", m))
}

/// Periodic forward difference `(Lx)ᵢ = x_{(i+1) mod n} − xᵢ`.
pub fn build_periodic_diff<T: Real>(n: usize) -> Result<LinearOperator<T>> {
    require(n >= 2, "difference operator needs n >= 2")?;
    let rows = (0..n).map(|i| vec![(i, -T::one()), ((i + 1) % n, T::one())]).collect();
    Ok(LinearOperator::sparse("periodic difference", CsrMatrix::from_rows(n, rows)))
}

/// Horizontal then vertical forward differences of a row-major image,
/// `rows(cols−1) + cols(rows−1)` outputs.
pub fn build_diff_2d<T: Real>(rows: usize, cols: usize) -> Result<LinearOperator<T>> {
    require(rows >= 2 && cols >= 2, "image difference operator needs at least 2x2")?;
    let idx = |r: usize, c: usize| r * cols + c;
    let mut out = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols - 1 {
            out.push(vec![(idx(r, c), -T::one()), (idx(r, c + 1), T::one())]);
        }
    }
    for c in 0..cols {
        for r in 0..rows - 1 {
            out.push(vec![(idx(r, c), -T::one()), (idx(r + 1, c), T::one())]);
        }
    }
    Ok(LinearOperator::sparse("image difference", CsrMatrix::from_rows(rows * cols, out)))
}

/// Parallel-beam geometry: `n_angles` angles `θᵢ = iπ/n_angles` and
/// `n_rays` unit-spaced rays per angle centred on the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelBeam {
    pub side: usize,
    pub n_angles: usize,
    pub n_rays: usize,
}

impl ParallelBeam {
    pub fn angle(&self, i: usize) -> f64 {
        i as f64 * PI / self.n_angles as f64
    }

    /// Signed offset of ray `k` from the centre.
    pub fn offset(&self, k: usize) -> f64 {
        k as f64 - 0.5 * (self.n_rays as f64 - 1.0)
    }

    /// Ray `k` at angle `θ`: points `s(cos θ, sin θ) + t(−sin θ, cos θ)`.
    pub fn ray(&self, i: usize, k: usize) -> ([f64; 2], [f64; 2]) {
        let (s, th) = (self.offset(k), self.angle(i));
        ([s * th.cos(), s * th.sin()], [-th.sin(), th.cos()])
    }
}

/// Exact intersection lengths of a line with the pixels of a
/// `side × side` unit-pixel image on `[−side/2, side/2]²`.
pub fn ray_pixel_lengths(side: usize, origin: [f64; 2], dir: [f64; 2]) -> Vec<(usize, f64)> {
    let h = 0.5 * side as f64;
    let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ax in 0..2 {
        if dir[ax].abs() < PARALLEL_TOL {
            if origin[ax].abs() >= h {
                return Vec::new();
            }
        } else {
            let (a, b) = ((-h - origin[ax]) / dir[ax], (h - origin[ax]) / dir[ax]);
            t_lo = t_lo.max(a.min(b));
            t_hi = t_hi.min(a.max(b));
        }
    }
    if !(t_hi > t_lo) {
        return Vec::new();
    }
    let mut ts = vec![t_lo, t_hi];
    for ax in 0..2 {
        if dir[ax].abs() < PARALLEL_TOL {
            continue;
        }
        for j in 0..=side {
            let t = (-h + j as f64 - origin[ax]) / dir[ax];
            if t > t_lo && t < t_hi {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    let last = side as isize - 1;
    // an axis-parallel ray on a grid line is shared evenly by both neighbours
    let on_line = |ax: usize| {
        let u = origin[ax] + h;
        dir[ax].abs() < PARALLEL_TOL && (u - u.round()).abs() < 1e-9
    };
    let (split_col, split_row) = (on_line(0), on_line(1));
    let mut out = Vec::with_capacity(2 * ts.len());
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-12 {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let x = origin[0] + tm * dir[0] + h;
        let y = h - (origin[1] + tm * dir[1]);
        let cols = if split_col {
            [x.round() as isize - 1, x.round() as isize]
        } else {
            [x.floor() as isize; 2]
        };
        let rows = if split_row {
            [y.round() as isize - 1, y.round() as isize]
        } else {
            [y.floor() as isize; 2]
        };
        for k in 0..2 {
            let col = cols[k].clamp(0, last) as usize;
            let row = rows[k].clamp(0, last) as usize;
            out.push((row * side + col, 0.5 * len));
        }
    }
    out
}

/// Physical width of the CT field of view. Scaled-down images keep this
/// width, so their pixels are `CT_FIELD_OF_VIEW / side` long.
pub const CT_FIELD_OF_VIEW: f64 = 100.0;

pub fn ct_pixel_size(side: usize) -> f64 {
    CT_FIELD_OF_VIEW / side as f64
}

/// Sparse parallel-beam Radon transform with exact ray–pixel intersection
/// lengths on unit pixels. Row `i·n_rays + k` is ray `k` at angle `i`.
pub fn build_radon<T: Real>(img_side: usize, n_angles: usize, n_rays: usize) -> Result<LinearOperator<T>> {
    build_radon_scaled(img_side, n_angles, n_rays, 1.0)
}

/// [`build_radon`] with pixels (and ray spacing) of length `pixel_size`.
pub fn build_radon_scaled<T: Real>(img_side: usize, n_angles: usize, n_rays: usize, pixel_size: f64) -> Result<LinearOperator<T>> {
    require(img_side >= 1 && n_angles >= 1 && n_rays >= 1, "radon dimensions must be positive")?;
    require(pixel_size > 0.0 && pixel_size.is_finite(), "pixel size must be positive")?;
    let geom = ParallelBeam {
        side: img_side,
        n_angles,
        n_rays,
    };
    let rows = (0..n_angles)
        .flat_map(|i| (0..n_rays).map(move |k| (i, k)))
        .map(|(i, k)| {
            let (o, d) = geom.ray(i, k);
            ray_pixel_lengths(img_side, o, d)
                .into_iter()
                .map(|(j, len)| (j, c::<T>(pixel_size * len)))
                .collect()
        })
        .collect();
    Ok(LinearOperator::sparse("radon", CsrMatrix::from_rows(img_side * img_side, rows)))
}

/// Ellipses `(intensity, a, b, x0, y0, φ°)` of the modified Shepp–Logan
/// phantom on `[−1, 1]²`.
pub const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Whether `(x, y)` lies in the ellipse `e` of [`SHEPP_LOGAN`].
pub fn in_ellipse(e: &[f64; 6], x: f64, y: f64) -> bool {
    let phi = e[5].to_radians();
    let (dx, dy) = (x - e[3], y - e[4]);
    let u = dx * phi.cos() + dy * phi.sin();
    let v = -dx * phi.sin() + dy * phi.cos();
    (u / e[1]).powi(2) + (v / e[2]).powi(2) <= 1.0
}

/// Modified Shepp–Logan phantom sampled at pixel centres, clamped to `[0, 1]`.
pub fn shepp_logan<T: Real>(side: usize) -> Result<DVector<T>> {
    require(side >= 16, "phantom needs side >= 16")?;
    let s = side as f64;
    Ok(DVector::from_fn(side * side, |p, _| {
        let (r, col) = (p / side, p % side);
        let x = -1.0 + (2.0 * col as f64 + 1.0) / s;
        let y = 1.0 - (2.0 * r as f64 + 1.0) / s;
        let v: f64 = SHEPP_LOGAN.iter().filter(|e| in_ellipse(e, x, y)).map(|e| e[0]).sum();
        c::<T>(v.clamp(0.0, 1.0))
    }))
}

/// Breakpoints of [`make_test_signal`] on `t = i/n`.
pub const SIGNAL_BREAKS: [f64; 9] = [0.1, 0.25, 0.35, 0.45, 0.5, 0.6, 0.65, 0.95, 1.0];

/// Value of the test signal at `t ∈ [0, 1]`: a block at 1, a plateau at 1
/// with a dip to 0.8, a raised-cosine bump and zero elsewhere.
pub fn test_signal_at(t: f64) -> f64 {
    let [b0, b1, b2, b3, b4, b5, b6, b7, _] = SIGNAL_BREAKS;
    if t < b0 {
        0.0
    } else if t < b1 {
        1.0
    } else if t < b2 {
        0.0
    } else if t < b3 {
        1.0
    } else if t < b4 {
        0.8
    } else if t < b5 {
        1.0
    } else if t < b6 {
        0.0
    } else if t < b7 {
        0.5 * (1.0 - (2.0 * PI * (t - b6) / (b7 - b6)).cos())
    } else {
        0.0
    }
}

/// The test signal sampled at `t = i/n`, `i = 0, …, n−1`.
pub fn make_test_signal<T: Real>(n: usize) -> Result<DVector<T>> {
    require(n >= 16, "test signal needs n >= 16")?;
    Ok(DVector::from_fn(n, |i, _| c::<T>(test_signal_at(i as f64 / n as f64))))
}

/// Operators, ground truth and noisy data `b = A x_true + e`,
/// `e ~ N(0, λ_true⁻¹ I)` drawn from `noise_seed`.
#[derive(Debug, Clone)]
pub struct ProblemInstance<T: Real> {
    pub a: LinearOperator<T>,
    pub l: LinearOperator<T>,
    pub x_true: DVector<T>,
    pub b: DVector<T>,
    pub lambda_true: f64,
    pub noise_seed: u64,
    /// `‖e‖ / ‖A x_true‖`.
    pub relative_noise: f64,
}

pub fn make_instance<T: Real>(a: LinearOperator<T>, l: LinearOperator<T>, x_true: DVector<T>, lambda_true: f64, seed: u64) -> Result<ProblemInstance<T>> {
    check_dim(a.cols(), x_true.len())?;
    check_dim(a.cols(), l.cols())?;
    require(lambda_true > 0.0, "noise precision must be positive")?;
    let clean = a.apply(&x_true);
    let sd = c::<T>(1.0 / lambda_true.sqrt());
    let mut rng = stream(seed);
    let e = DVector::from_fn(clean.len(), |_, _| sd * T::standard_normal(&mut rng));
    let relative_noise = e.norm().as_f64() / clean.norm().as_f64();
    Ok(ProblemInstance {
        b: clean + e,
        a,
        l,
        x_true,
        lambda_true,
        noise_seed: seed,
        relative_noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::adjoint_mismatch;
    use crate::testing::random_vector;

    #[test]
    fn blur_entries_and_symmetry() {
        let (n, gamma) = (128, 0.02);
        let a = build_blur_operator::<f64>(n, gamma).unwrap().to_dense();
        let h = 1.0 / n as f64;
        for (i, j) in [(0, 0), (5, 9), (100, 3), (64, 65)] {
            let d = h * (i as f64 - j as f64);
            let expected = h / (gamma * (2.0 * PI).sqrt()) * (-0.5 * (d / gamma).powi(2)).exp();
            assert!((a[(i, j)] - expected).abs() <= 1e-15 * expected.max(1e-300));
        }
        assert_eq!((&a - a.transpose()).amax(), 0.0);
        // interior rows carry the full discretized kernel mass
        for i in 20..108 {
            assert!((a.row(i).sum() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn blur_conditioning_worsens_with_width() {
        let sv = |g: f64| build_blur_operator::<f64>(32, g).unwrap().to_dense().singular_values().min();
        let grid: Vec<f64> = (1..=10).map(|k| 0.005 * k as f64).collect();
        let values: Vec<f64> = grid.iter().map(|&g| sv(g)).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn periodic_difference_stencil_and_spectrum() {
        let l = build_periodic_diff::<f64>(4).unwrap();
        assert_eq!(l.apply(&DVector::from_element(4, 3.0)), DVector::zeros(4));
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(l.apply(&e1), DVector::from_vec(vec![-1.0, 0.0, 0.0, 1.0]));
        let n = 8;
        let ltl = build_periodic_diff::<f64>(n).unwrap().normal_matrix();
        let mut eig: Vec<f64> = ltl.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let mut expected: Vec<f64> = (0..n).map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn image_difference_stencil() {
        let (rows, cols) = (4, 5);
        let l = build_diff_2d::<f64>(rows, cols).unwrap();
        assert_eq!((l.rows(), l.cols()), (rows * (cols - 1) + cols * (rows - 1), rows * cols));
        assert_eq!(l.apply(&DVector::from_element(rows * cols, 2.0)).amax(), 0.0);
        let mut delta = DVector::zeros(rows * cols);
        delta[cols + 2] = 1.0;
        let out = l.apply(&delta);
        let mut nonzero: Vec<f64> = out.iter().copied().filter(|&v| v != 0.0).collect();
        nonzero.sort_by(f64::total_cmp);
        assert_eq!(nonzero, vec![-1.0, -1.0, 1.0, 1.0]);
        for (r, c) in [(8, 8), (17, 31), (2, 40)] {
            assert!(build_diff_2d::<f64>(r, c).unwrap().opnorm_sq_estimate() <= 8.0 * 1.01);
        }
    }

    /// Length of a line inside the square `[−h, h]²` by clipping against
    /// each slab in turn.
    fn chord(h: f64, o: [f64; 2], d: [f64; 2]) -> f64 {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for ax in 0..2 {
            if d[ax] == 0.0 {
                if o[ax].abs() >= h {
                    return 0.0;
                }
                continue;
            }
            let t1 = (-h - o[ax]) / d[ax];
            let t2 = (h - o[ax]) / d[ax];
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
        (hi - lo).max(0.0)
    }

    #[test]
    fn uniform_image_projects_to_chord_lengths() {
        let geom = ParallelBeam {
            side: 20,
            n_angles: 37,
            n_rays: 31,
        };
        let a = build_radon::<f64>(geom.side, geom.n_angles, geom.n_rays).unwrap();
        let proj = a.apply(&DVector::from_element(geom.side * geom.side, 1.0));
        for i in 0..geom.n_angles {
            for k in 0..geom.n_rays {
                let (o, d) = geom.ray(i, k);
                let d = [
                    if d[0].abs() < PARALLEL_TOL { 0.0 } else { d[0] },
                    if d[1].abs() < PARALLEL_TOL { 0.0 } else { d[1] },
                ];
                let expected = chord(10.0, o, d);
                assert!((proj[i * geom.n_rays + k] - expected).abs() < 1e-10, "angle {i} ray {k}");
            }
        }
    }

    #[test]
    fn zero_degree_projection_is_column_sums() {
        let side = 16;
        let pixel = 0.75;
        let a = build_radon_scaled::<f64>(side, 4, side, pixel).unwrap();
        let mut rng = crate::rng::stream(41);
        let img: DVector<f64> = random_vector(side * side, &mut rng);
        let proj = a.apply(&img);
        for c in 0..side {
            let col: f64 = (0..side).map(|r| img[r * side + c]).sum();
            assert!((proj[c] - pixel * col).abs() < 1e-12);
        }
        // at 90° the rays run right to left through rows, bottom row first
        for k in 0..side {
            let row: f64 = (0..side).map(|c| img[(side - 1 - k) * side + c]).sum();
            assert!((proj[2 * side + k] - pixel * row).abs() < 1e-12);
        }
        // a ray along a grid line is shared by the two adjacent columns
        let odd = build_radon::<f64>(side, 1, side + 1).unwrap().apply(&img);
        for k in 1..side {
            let shared: f64 = (0..side).map(|r| 0.5 * (img[r * side + k - 1] + img[r * side + k])).sum();
            assert!((odd[k] - shared).abs() < 1e-12);
        }
    }

    #[test]
    fn operators_are_adjoint_consistent() {
        let mut rng = crate::rng::stream(42);
        let ops: Vec<LinearOperator<f64>> = vec![
            build_blur_operator(32, 0.03).unwrap(),
            build_periodic_diff(17).unwrap(),
            build_diff_2d(6, 9).unwrap(),
            build_radon(12, 10, 17).unwrap(),
        ];
        for op in ops {
            let u = random_vector(op.cols(), &mut rng);
            let v = random_vector(op.rows(), &mut rng);
            assert!(adjoint_mismatch(&op, &u, &v) < 1e-10, "{}", op.label());
        }
    }

    #[test]
    fn radon_of_centered_disc_across_angles() {
        // a pixelized disc is not rotation invariant: individual rays near
        // the rim differ by whole pixel chords between angles. The total
        // mass per angle is a unit-spacing quadrature of the same integral.
        let (side, n_angles, n_rays) = (64, 30, 91);
        let a = build_radon::<f64>(side, n_angles, n_rays).unwrap();
        let radius = 20.0;
        let disc = DVector::from_fn(side * side, |p, _| {
            let (r, c) = ((p / side) as f64, (p % side) as f64);
            let (x, y) = (-32.0 + c + 0.5, 32.0 - r - 0.5);
            if x * x + y * y <= radius * radius {
                1.0
            } else {
                0.0
            }
        });
        let proj = a.apply(&disc);
        let area = disc.sum();
        for i in 0..n_angles {
            let view = proj.rows(i * n_rays, n_rays);
            assert!((view.sum() / area - 1.0).abs() < 2e-3, "angle {i}: {} vs {area}", view.sum());
            assert!((view[n_rays / 2] - 2.0 * radius).abs() < 2.0);
        }
        // exact symmetries of the pixel grid
        let view = |i: usize| proj.rows(i * n_rays, n_rays).into_owned();
        assert!((view(0) - view(15)).amax() < 1e-12);
        for i in 1..15 {
            assert!((view(i) - view(n_angles - i)).amax() < 1e-9);
        }
    }

    #[test]
    fn pixel_size_scales_entries() {
        let side = 16;
        let unit = build_radon::<f64>(side, 6, 23).unwrap().to_dense();
        let scaled = build_radon_scaled::<f64>(side, 6, 23, 2.5).unwrap().to_dense();
        assert!((scaled - unit * 2.5).amax() < 1e-12);
        assert!(build_radon_scaled::<f64>(side, 6, 23, 0.0).is_err());
    }

    #[test]
    fn phantom_range_and_background() {
        let side = 64;
        let img = shepp_logan::<f64>(side).unwrap();
        assert!(img.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let outer = &SHEPP_LOGAN[0];
        for p in 0..side * side {
            let (r, c) = (p / side, p % side);
            let x = -1.0 + (2.0 * c as f64 + 1.0) / side as f64;
            let y = 1.0 - (2.0 * r as f64 + 1.0) / side as f64;
            if !in_ellipse(outer, x, y) {
                assert_eq!(img[p], 0.0);
            }
        }
        // skull rim at full intensity, brain at 0.2, dark ventricles at 0
        let at = |x: f64, y: f64| {
            let c = ((x + 1.0) * side as f64 / 2.0) as usize;
            let r = ((1.0 - y) * side as f64 / 2.0) as usize;
            img[r * side + c]
        };
        assert_eq!(at(0.0, 0.9), 1.0);
        assert!((at(0.0, -0.3) - 0.2).abs() < 1e-12);
        assert_eq!(at(0.22, 0.0), 0.0);
        assert!((at(0.0, 0.35) - 0.3).abs() < 1e-12);
        assert!(shepp_logan::<f64>(8).is_err());
    }

    #[test]
    fn test_signal_features() {
        let n = 128;
        let x = make_test_signal::<f64>(n).unwrap();
        assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let extreme = x.iter().filter(|&&v| v == 0.0 || v == 1.0).count();
        assert!(extreme as f64 >= 0.25 * n as f64);
        // instantaneous jumps between 0 and 1
        assert!(x.as_slice().windows(2).any(|w| w[0] == 0.0 && w[1] == 1.0));
        assert!(x.as_slice().windows(2).any(|w| w[0] == 1.0 && w[1] == 0.0));
        // small deviation from 1
        assert!(x.iter().any(|&v| v == 0.8));
        // smooth bump: many distinct intermediate values with small steps
        let smooth: Vec<f64> = x.iter().copied().filter(|&v| v > 0.0 && v < 1.0 && v != 0.8).collect();
        assert!(smooth.len() > 20);
        assert!(smooth.windows(2).all(|w| (w[1] - w[0]).abs() < 0.2));
    }

    #[test]
    fn instance_noise_level_and_reproducibility() {
        let n = 128;
        let x = make_test_signal::<f64>(n).unwrap();
        for seed in 0..5 {
            let inst = make_instance(build_blur_operator(n, 0.02).unwrap(), build_periodic_diff(n).unwrap(), x.clone(), 1000.0, seed).unwrap();
            assert!((0.02..=0.12).contains(&inst.relative_noise), "{}", inst.relative_noise);
            let again = make_instance(inst.a.clone(), inst.l.clone(), x.clone(), 1000.0, seed).unwrap();
            assert_eq!(inst.b, again.b);
        }
        let exact = make_instance(
            build_blur_operator(n, 0.02).unwrap(),
            build_periodic_diff(n).unwrap(),
            x.clone(),
            f64::INFINITY,
            0,
        )
        .unwrap();
        assert_eq!(exact.b, exact.a.apply(&x));
        assert_eq!(exact.relative_noise, 0.0);
    }

    #[test]
    fn ct_instance_noise_level() {
        let side = 32;
        for seed in 0..3 {
            let inst = make_instance(
                build_radon_scaled::<f64>(side, 45, 45, ct_pixel_size(side)).unwrap(),
                build_diff_2d(side, side).unwrap(),
                shepp_logan(side).unwrap(),
                5.0,
                seed,
            )
            .unwrap();
            assert!((0.01..=0.10).contains(&inst.relative_noise), "{}", inst.relative_noise);
        }
    }
}
