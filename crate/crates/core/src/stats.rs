//! Goodness-of-fit statistics: one-sample Kolmogorov–Smirnov and the
//! two-sample energy-distance permutation test.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl TestResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Kolmogorov survival function `Q(t) = 2 Σₖ (−1)^{k−1} exp(−2k²t²)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        // series converges slowly here and the value is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `sup |F_n − F|` of the samples against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, have: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

/// One-sample KS test with the small-sample scaling `(√n + 0.12 + 0.11/√n) D`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    let d = ks_statistic(samples, cdf)?;
    let rn = (samples.len() as f64).sqrt();
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d),
        n: samples.len(),
    })
}

/// Energy distance `2E‖X−Y‖ − E‖X−X'‖ − E‖Y−Y'‖` (V-statistic).
pub fn energy_distance(x: &[DVector<f64>], y: &[DVector<f64>]) -> f64 {
    let pooled: Vec<&DVector<f64>> = x.iter().chain(y).collect();
    let dist = distance_matrix(&pooled);
    let labels: Vec<bool> = (0..pooled.len()).map(|i| i < x.len()).collect();
    energy_from_distances(&dist, pooled.len(), &labels, x.len(), y.len())
}

fn distance_matrix(points: &[&DVector<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (points[i] - points[j]).norm();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

fn energy_from_distances(dist: &[f64], n: usize, in_x: &[bool], nx: usize, ny: usize) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist[i * n + j];
            match (in_x[i], in_x[j]) {
                (true, true) => xx += d,
                (false, false) => yy += d,
                _ => xy += d,
            }
        }
    }
    let (nx, ny) = (nx as f64, ny as f64);
    2.0 * xy / (nx * ny) - 2.0 * xx / (nx * nx) - 2.0 * yy / (ny * ny)
}

/// Permutation test of equal distributions based on [`energy_distance`];
/// the p-value is `(1 + #{perm ≥ observed}) / (1 + permutations)`.
pub fn energy_test<R: Rng + ?Sized>(x: &[DVector<f64>], y: &[DVector<f64>], permutations: usize, rng: &mut R) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            have: x.len().min(y.len()),
        });
    }
    let pooled: Vec<&DVector<f64>> = x.iter().chain(y).collect();
    let n = pooled.len();
    let dist = distance_matrix(&pooled);
    let mut labels: Vec<bool> = (0..n).map(|i| i < x.len()).collect();
    let observed = energy_from_distances(&dist, n, &labels, x.len(), y.len());
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if energy_from_distances(&dist, n, &labels, x.len(), y.len()) >= observed {
            exceed += 1;
        }
    }
    Ok(TestResult {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        n,
    })
}
