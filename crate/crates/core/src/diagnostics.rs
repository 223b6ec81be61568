//! Chain summaries: medians, equal-tailed credible intervals, sample
//! autocorrelation and effective sample size, plus text and 16-bit PGM
//! output.

use std::io::{self, Write};

use nalgebra::DVector;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest lag computed by direct summation; longer ACFs go through an FFT.
pub const DIRECT_ACF_MAX_LAG: usize = 200;
pub const DEFAULT_MAX_LAG: usize = 100;

/// Type-7 quantile of sorted data: linear interpolation between order
/// statistics at position `p (n − 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_columns<T: Real>(samples: &[DVector<T>], needed: usize) -> Result<Vec<Vec<f64>>> {
    if samples.len() < needed {
        return Err(Error::InsufficientSamples { needed, have: samples.len() });
    }
    let n = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|j| {
            let mut col: Vec<f64> = samples.iter().map(|s| s[j].as_f64()).collect();
            col.sort_by(f64::total_cmp);
            col
        })
        .collect())
}

pub fn componentwise_median<T: Real>(samples: &[DVector<T>]) -> Result<DVector<f64>> {
    let cols = sorted_columns(samples, 1)?;
    Ok(DVector::from_iterator(cols.len(), cols.iter().map(|c| quantile_sorted(c, 0.5))))
}

/// Componentwise quantile at probability `p`.
pub fn componentwise_quantile<T: Real>(samples: &[DVector<T>], p: f64) -> Result<DVector<f64>> {
    check_probability(p)?;
    let cols = sorted_columns(samples, 1)?;
    Ok(DVector::from_iterator(cols.len(), cols.iter().map(|c| quantile_sorted(c, p))))
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")))
    }
}

/// Equal-tailed interval with coverage `q`: quantiles at `(1−q)/2` and
/// `(1+q)/2`.
pub fn credible_interval<T: Real>(samples: &[DVector<T>], q: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("credible level {q} outside (0, 1)")));
    }
    let cols = sorted_columns(samples, 2)?;
    let (pl, pu) = (0.5 * (1.0 - q), 0.5 * (1.0 + q));
    let lo = DVector::from_iterator(cols.len(), cols.iter().map(|c| quantile_sorted(c, pl)));
    let hi = DVector::from_iterator(cols.len(), cols.iter().map(|c| quantile_sorted(c, pu)));
    Ok((lo, hi))
}

fn centered(chain: &[f64], max_lag: usize) -> Result<(Vec<f64>, f64)> {
    if chain.len() <= max_lag {
        return Err(Error::InsufficientSamples {
            needed: max_lag + 1,
            have: chain.len(),
        });
    }
    let mean = chain.iter().sum::<f64>() / chain.len() as f64;
    let d: Vec<f64> = chain.iter().map(|x| x - mean).collect();
    let var: f64 = d.iter().map(|x| x * x).sum();
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::DegenerateChain);
    }
    Ok((d, var))
}

/// Biased sample autocorrelation `ρ̂(0..=max_lag)`.
pub fn acf(chain: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let (d, var) = centered(chain, max_lag)?;
    if max_lag <= DIRECT_ACF_MAX_LAG {
        return Ok((0..=max_lag).map(|k| d.iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / var).collect());
    }
    let size = (2 * d.len()).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = d.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = buf[0].re;
    Ok(buf[..=max_lag].iter().map(|z| z.re / scale).collect())
}

/// Effective sample size `N / τ` with `τ` from Geyer's initial positive
/// sequence of paired autocorrelations, clamped to `[1, N]`.
pub fn ess(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 4 {
        return Err(Error::InsufficientSamples { needed: 4, have: n });
    }
    let rho = acf(chain, n - 1)?;
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ok((n as f64 / tau.max(1.0 / n as f64)).clamp(1.0, n as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperSummary {
    pub name: String,
    pub acf: Vec<f64>,
    pub ess: f64,
}

/// Posterior summary of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub level: f64,
    pub median: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub ci_width: DVector<f64>,
    pub hyper: Vec<HyperSummary>,
}

impl SummaryTable {
    /// `hyper` holds named scalar traces; each gets an ACF up to
    /// `min(max_lag, len − 1)` and an ESS.
    pub fn new<T: Real>(samples: &[DVector<T>], level: f64, hyper: &[(&str, &[f64])], max_lag: usize) -> Result<Self> {
        let median = componentwise_median(samples)?;
        let (lower, upper) = credible_interval(samples, level)?;
        let ci_width = &upper - &lower;
        let hyper = hyper
            .iter()
            .map(|(name, trace)| {
                let lag = max_lag.min(trace.len().saturating_sub(1));
                Ok(HyperSummary {
                    name: name.to_string(),
                    acf: acf(trace, lag)?,
                    ess: ess(trace)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            level,
            median,
            lower,
            upper,
            ci_width,
            hyper,
        })
    }

    /// `component,median,lower,upper,ci_width` rows.
    pub fn write_components<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "component,median,lower,upper,ci_width")?;
        for j in 0..self.median.len() {
            writeln!(w, "{j},{:?},{:?},{:?},{:?}", self.median[j], self.lower[j], self.upper[j], self.ci_width[j])?;
        }
        Ok(())
    }

    /// `lag,<name>...` rows followed by an `ess,<value>...` row.
    pub fn write_hyper<W: Write>(&self, mut w: W) -> io::Result<()> {
        let names: Vec<&str> = self.hyper.iter().map(|h| h.name.as_str()).collect();
        writeln!(w, "lag,{}", names.join(","))?;
        let lags = self.hyper.iter().map(|h| h.acf.len()).max().unwrap_or(0);
        for k in 0..lags {
            let row: Vec<String> = self.hyper.iter().map(|h| h.acf.get(k).map_or(String::new(), |v| format!("{v:?}"))).collect();
            writeln!(w, "{k},{}", row.join(","))?;
        }
        let row: Vec<String> = self.hyper.iter().map(|h| format!("{:?}", h.ess)).collect();
        writeln!(w, "ess,{}", row.join(","))
    }
}

/// Writes named columns of equal length as comma-separated text.
pub fn write_columns<W: Write>(mut w: W, names: &[&str], columns: &[&[f64]]) -> io::Result<()> {
    let len = columns.first().map_or(0, |c| c.len());
    if names.len() != columns.len() || columns.iter().any(|c| c.len() != len) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "ragged columns"));
    }
    writeln!(w, "{}", names.join(","))?;
    for i in 0..len {
        let row: Vec<String> = columns.iter().map(|c| format!("{:?}", c[i])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Maps `v` linearly from `[lo, hi]` to `0..=65535`, rounding to nearest
/// and clamping outside the range. A degenerate range maps to 0.
pub fn quantize16(v: f64, lo: f64, hi: f64) -> u16 {
    if !(hi > lo) || !v.is_finite() {
        return 0;
    }
    ((v - lo) / (hi - lo) * 65535.0).round().clamp(0.0, 65535.0) as u16
}

/// Binary 16-bit PGM (`P5`, maxval 65535, big-endian samples) of a
/// row-major image quantized by [`quantize16`].
pub fn write_pgm16<W: Write>(mut w: W, values: &[f64], width: usize, height: usize, lo: f64, hi: f64) -> io::Result<()> {
    if values.len() != width * height {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "image size mismatch"));
    }
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let bytes: Vec<u8> = values.iter().flat_map(|&v| quantize16(v, lo, hi).to_be_bytes()).collect();
    w.write_all(&bytes)
}
