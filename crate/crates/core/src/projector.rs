//! Monte Carlo sampling of obliquely projected Gaussians and executable
//! checks of the structure of the projected distribution: positive mass on
//! boundary and interior, the mean in the relative interior, face masses,
//! proportionality to the Gaussian density on each face, and the normal-cone
//! preimage of boundary points in one dimension.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::constraints::{ConstraintSet, FaceId};
use crate::error::{check_dim, Error, Result};
use crate::gaussian::Gaussian;
use crate::rng::substream;
use crate::scalar::Real;
use crate::solver::{ObliqueProjector, SolverConfig};
use crate::special::{normal_cdf, normal_sf};
use crate::stats::{energy_test, ks_test, TestResult};

/// Samples per RNG substream; fixed so results do not depend on the number
/// of worker threads.
pub const CHUNK_SIZE: usize = 1000;

/// Minimum number of samples on a face for a proportionality test.
pub const MIN_FACE_SAMPLES: usize = 500;

/// Significance level of all goodness-of-fit checks.
pub const SIGNIFICANCE: f64 = 0.01;

/// Permutations in the energy-distance test.
pub const PERMUTATIONS: usize = 500;

/// Cap on samples entering the quadratic-cost energy test.
const ENERGY_SUBSAMPLE: usize = 500;

/// Substream ids above this are reserved for the checks.
const CHECK_STREAM_BASE: u64 = 1 << 40;

/// Projected Gaussian draws with the face each one landed on.
#[derive(Debug, Clone)]
pub struct ProjectedSampleSet<T: Real> {
    pub samples: Vec<DVector<T>>,
    pub face_labels: Vec<FaceId>,
    pub gaussian: Gaussian<T>,
    pub set: ConstraintSet<T>,
    pub seed: u64,
}

impl<T: Real> ProjectedSampleSet<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> DVector<T> {
        let mut m = DVector::zeros(self.set.dim());
        for s in &self.samples {
            m += s;
        }
        m / T::of(self.samples.len() as f64)
    }

    /// Empirical probability of every face that received samples.
    pub fn face_masses(&self) -> BTreeMap<FaceId, f64> {
        let mut counts = BTreeMap::new();
        for f in &self.face_labels {
            *counts.entry(f.clone()).or_insert(0usize) += 1;
        }
        let n = self.len() as f64;
        counts.into_iter().map(|(f, c)| (f, c as f64 / n)).collect()
    }
}

/// Draws `x★ ~ g`, projects each draw obliquely onto `set` and labels its
/// face. Chunk `k` of [`CHUNK_SIZE`] samples uses substream `k` of `seed`.
pub fn mc_project<T: Real>(g: &Gaussian<T>, set: &ConstraintSet<T>, n_samples: usize, seed: u64, cfg: &SolverConfig) -> Result<ProjectedSampleSet<T>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let projector = ObliqueProjector::new(g, set, *cfg)?;
    let chunks = n_samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<Vec<(DVector<T>, FaceId)>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let count = CHUNK_SIZE.min(n_samples - k * CHUNK_SIZE);
            (0..count)
                .map(|_| {
                    let z = projector.project(&g.sample(&mut rng))?;
                    let face = set.face_of(&z, set.default_tol(&z))?;
                    Ok((z, face))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let (samples, face_labels) = parts.into_iter().flatten().unzip();
    Ok(ProjectedSampleSet {
        samples,
        face_labels,
        gaussian: g.clone(),
        set: set.clone(),
        seed,
    })
}

/// Fractions of samples on the relative boundary and in the interior.
pub fn check_positive_mass<T: Real>(s: &ProjectedSampleSet<T>) -> (f64, f64) {
    let n = s.len().max(1) as f64;
    let boundary = s.face_labels.iter().filter(|f| f.active_count() > 0).count() as f64 / n;
    (boundary, 1.0 - boundary)
}

/// Whether the sample mean satisfies every constraint strictly. Constraints
/// that are tight on the whole set (degenerate box sides) are skipped.
pub fn check_mean_in_relint<T: Real>(s: &ProjectedSampleSet<T>) -> bool {
    if s.is_empty() {
        return false;
    }
    let residuals = match s.set.residuals(&s.mean()) {
        Ok(r) => r,
        Err(_) => return false,
    };
    let degenerate = degenerate_constraints(&s.set);
    residuals.iter().zip(degenerate).all(|(&r, skip)| skip || r < T::zero())
}

fn degenerate_constraints<T: Real>(set: &ConstraintSet<T>) -> Vec<bool> {
    match set.kind() {
        crate::constraints::SetKind::Box { lo, hi } => (0..lo.len()).flat_map(|i| [lo[i] == hi[i]; 2]).collect(),
        _ => vec![false; set.constraint_count()],
    }
}

/// Which goodness-of-fit test a face check used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTest {
    /// One-dimensional face, KS against the truncated restricted Gaussian.
    KolmogorovSmirnov,
    /// Face of dimension two or more, energy-distance permutation test
    /// against rejection-sampled draws from the restricted Gaussian.
    Energy,
    /// A vertex carries a point mass; nothing to test.
    Vertex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFitReport {
    pub test: FitTest,
    pub result: TestResult,
    pub passed: bool,
}

/// Affine chart `x = x0 + F u` of a face's affine hull, with the face's
/// inactive constraints expressed as `C u ≤ r`.
#[derive(Debug, Clone)]
pub struct FaceChart {
    pub x0: DVector<f64>,
    pub basis: DMatrix<f64>,
    pub bound_rows: DMatrix<f64>,
    pub bound_rhs: DVector<f64>,
}

impl FaceChart {
    pub fn new<T: Real>(set: &ConstraintSet<T>, face: &FaceId) -> Result<Self> {
        let constraints = set.linear_constraints().ok_or(Error::Unsupported("face charts need a polyhedral set"))?;
        check_dim(constraints.len(), face.active.len())?;
        let n = set.dim();
        let to64 = |v: &DVector<T>| v.map(|x| x.as_f64());
        let (active, inactive): (Vec<_>, Vec<_>) = constraints.iter().zip(&face.active).partition(|(_, &a)| a);
        let (x0, basis) = if active.is_empty() {
            (DVector::zeros(n), DMatrix::identity(n, n))
        } else {
            let e = DMatrix::from_rows(&active.iter().map(|((g, _), _)| to64(g).transpose()).collect::<Vec<_>>());
            let h = DVector::from_iterator(active.len(), active.iter().map(|((_, h), _)| h.as_f64()));
            let x0 = e.clone().svd(true, true).solve(&h, 1e-12).map_err(|msg| Error::InvalidSet(msg.to_string()))?;
            let eig = SymmetricEigen::new(e.transpose() * &e);
            let top = eig.eigenvalues.amax();
            let null: Vec<_> = (0..n)
                .filter(|&i| eig.eigenvalues[i] <= 1e-10 * top)
                .map(|i| eig.eigenvectors.column(i).into_owned())
                .collect();
            let basis = if null.is_empty() {
                DMatrix::zeros(n, 0)
            } else {
                DMatrix::from_columns(&null)
            };
            (x0, basis)
        };
        let bound_rows = if inactive.is_empty() {
            DMatrix::zeros(0, basis.ncols())
        } else {
            DMatrix::from_rows(&inactive.iter().map(|((g, _), _)| to64(g).transpose() * &basis).collect::<Vec<_>>())
        };
        let bound_rhs = DVector::from_iterator(inactive.len(), inactive.iter().map(|((g, h), _)| h.as_f64() - to64(g).dot(&x0)));
        Ok(Self {
            x0,
            basis,
            bound_rows,
            bound_rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn coordinates(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (x - &self.x0)
    }

    pub fn admits(&self, u: &DVector<f64>) -> bool {
        (&self.bound_rows * u - &self.bound_rhs).iter().all(|&r| r <= 0.0)
    }

    /// Mean and precision in `u` of the Gaussian density restricted to the
    /// affine hull: precision `FᵀQF`, mean solving `FᵀQF m = FᵀQ(μ − x0)`.
    pub fn restricted_gaussian(&self, g: &Gaussian<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let q = g.precision();
        let qf = &q * &self.basis;
        let p = self.basis.transpose() * &qf;
        let rhs = qf.transpose() * (g.mean() - &self.x0);
        let m = p.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.solve(&rhs);
        Ok((m, p))
    }

    /// Interval `[lo, hi]` of a one-dimensional chart.
    pub fn interval(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..self.bound_rows.nrows() {
            let (c, r) = (self.bound_rows[(i, 0)], self.bound_rhs[i]);
            if c > 0.0 {
                hi = hi.min(r / c);
            } else if c < 0.0 {
                lo = lo.max(r / c);
            }
        }
        (lo, hi)
    }
}

/// CDF of `N(m, sd²)` truncated to `[lo, hi]`, accurate when the interval
/// sits far in either tail.
pub fn truncated_normal_cdf(x: f64, m: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo {
        return 0.0;
    }
    if x >= hi {
        return 1.0;
    }
    let (a, b, z) = ((lo - m) / sd, (hi - m) / sd, (x - m) / sd);
    if a > 0.0 {
        // upper tail: work with survival functions
        (normal_sf(a) - normal_sf(z)) / (normal_sf(a) - normal_sf(b))
    } else {
        (normal_cdf(z) - normal_cdf(a)) / (normal_cdf(b) - normal_cdf(a))
    }
}

/// Tests whether the samples on `face` follow the Gaussian density
/// restricted to the face (renormalized), at [`SIGNIFICANCE`].
pub fn check_face_proportionality<T: Real>(s: &ProjectedSampleSet<T>, face: &FaceId) -> Result<FaceFitReport> {
    if !s.set.is_polyhedral() {
        return Err(Error::Unsupported("face proportionality is only asserted for polyhedral sets"));
    }
    let on_face: Vec<DVector<f64>> = s
        .samples
        .iter()
        .zip(&s.face_labels)
        .filter(|(_, f)| *f == face)
        .map(|(x, _)| x.map(|v| v.as_f64()))
        .collect();
    if on_face.len() < MIN_FACE_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_FACE_SAMPLES,
            have: on_face.len(),
        });
    }
    let chart = FaceChart::new(&s.set, face)?;
    let g = Gaussian::from_precision(s.gaussian.mean().map(|v| v.as_f64()), s.gaussian.precision().map(|v| v.as_f64()))?;
    if chart.dim() == 0 {
        return Ok(FaceFitReport {
            test: FitTest::Vertex,
            result: TestResult {
                statistic: 0.0,
                p_value: 1.0,
                n: on_face.len(),
            },
            passed: true,
        });
    }
    let (m, p) = chart.restricted_gaussian(&g)?;
    let coords: Vec<DVector<f64>> = on_face.iter().map(|x| chart.coordinates(x)).collect();
    let face_key = face.active.iter().fold(0u64, |h, &a| h.wrapping_mul(31).wrapping_add(u64::from(a) + 1));
    let mut rng = substream(s.seed, CHECK_STREAM_BASE + face_key % CHECK_STREAM_BASE);
    let (test, result) = if chart.dim() == 1 {
        let (lo, hi) = chart.interval();
        let sd = 1.0 / p[(0, 0)].sqrt();
        let u: Vec<f64> = coords.iter().map(|c| c[0]).collect();
        (FitTest::KolmogorovSmirnov, ks_test(&u, |x| truncated_normal_cdf(x, m[0], sd, lo, hi))?)
    } else {
        let take = coords.len().min(ENERGY_SUBSAMPLE);
        let observed = &coords[..take];
        let restricted = Gaussian::from_precision(m, p)?;
        let mut reference = Vec::with_capacity(take);
        let mut attempts = 0usize;
        while reference.len() < take {
            attempts += 1;
            if attempts > 10_000_000 {
                return Err(Error::InsufficientSamples {
                    needed: take,
                    have: reference.len(),
                });
            }
            let u = restricted.sample(&mut rng);
            if chart.admits(&u) {
                reference.push(u);
            }
        }
        (FitTest::Energy, energy_test(observed, &reference, PERMUTATIONS, &mut rng)?)
    };
    Ok(FaceFitReport {
        test,
        result,
        passed: result.passes(SIGNIFICANCE),
    })
}

/// Probability that a one-dimensional `x★` lands in the normal-cone
/// preimage `z + Σ N_C(z)` of the boundary point `z` on `face`.
pub fn inversion_mass_1d<T: Real>(g: &Gaussian<T>, set: &ConstraintSet<T>, face: &FaceId, z: T) -> Result<f64> {
    if g.dim() != 1 || set.dim() != 1 {
        return Err(Error::Unsupported("normal-cone inversion is evaluated in one dimension"));
    }
    let gens = set.normal_cone_generators(face, &DVector::from_element(1, z))?;
    let up = gens.iter().any(|v| v[0] > T::zero());
    let down = gens.iter().any(|v| v[0] < T::zero());
    let mu = g.mean()[0].as_f64();
    let sd = g.covariance()[(0, 0)].as_f64().sqrt();
    let t = (z.as_f64() - mu) / sd;
    Ok(match (up, down) {
        (true, true) => 1.0,
        (true, false) => normal_sf(t),
        (false, true) => normal_cdf(t),
        (false, false) => 0.0,
    })
}

/// Monte Carlo mass of a face against its normal-cone preimage mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionReport {
    pub mc_mass: f64,
    pub predicted: f64,
    /// Binomial standard error of `mc_mass` under `predicted`.
    pub std_error: f64,
}

impl InversionReport {
    pub fn within(&self, sigmas: f64) -> bool {
        (self.mc_mass - self.predicted).abs() <= sigmas * self.std_error
    }
}

/// Compares the fraction of samples at the vertex `face` of a
/// one-dimensional set with [`inversion_mass_1d`].
pub fn check_inversion_1d<T: Real>(s: &ProjectedSampleSet<T>, face: &FaceId) -> Result<InversionReport> {
    let point = s
        .samples
        .iter()
        .zip(&s.face_labels)
        .find(|(_, f)| *f == face)
        .map(|(x, _)| x[0])
        .ok_or(Error::InsufficientSamples { needed: 1, have: 0 })?;
    let predicted = inversion_mass_1d(&s.gaussian, &s.set, face, point)?;
    let mc_mass = s.face_masses().get(face).copied().unwrap_or(0.0);
    let n = s.len() as f64;
    Ok(InversionReport {
        mc_mass,
        predicted,
        std_error: (predicted * (1.0 - predicted) / n).sqrt(),
    })
}
