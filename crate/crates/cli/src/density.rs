//! Densities of a planar Gaussian obliquely projected onto a quarter disc,
//! with a Monte Carlo cross-check.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use projpost::constraints::ConstraintSet;
use projpost::densities::{BoundaryDensity, QuarterDiscDensities};
use projpost::diagnostics::write_columns;
use projpost::projector::mc_project;
use projpost::quadrature::integrate;
use projpost::{Gaussian, SolverConfig};

use crate::artifacts::{derive_seed, Artifact, Outcome};
use crate::config::{Config, DensityConfig};
use crate::error::CliError;

/// Pieces of the quarter-disc boundary with a closed-form density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Piece {
    /// `x = 0`, parametrized by `y`.
    Left,
    /// `y = 0`, parametrized by `x`.
    Bottom,
    /// Parametrized by the angle.
    Arc,
}

impl Piece {
    pub const ALL: [Piece; 3] = [Piece::Left, Piece::Bottom, Piece::Arc];

    pub fn name(self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Bottom => "bottom",
            Self::Arc => "arc",
        }
    }
}

pub fn gaussian(d: &DensityConfig) -> Result<Gaussian, CliError> {
    let cov = DMatrix::from_row_slice(2, 2, &[d.covariance[0][0], d.covariance[0][1], d.covariance[1][0], d.covariance[1][1]]);
    Gaussian::new(DVector::from_column_slice(&d.mean), cov).map_err(|e| CliError::Config(format!("density gaussian: {e}")))
}

pub struct Densities {
    pub pieces: QuarterDiscDensities<f64>,
    pub radius: f64,
}

impl Densities {
    pub fn new(d: &DensityConfig) -> Result<Self, CliError> {
        Ok(Self {
            pieces: QuarterDiscDensities::new(&gaussian(d)?, d.radius)?,
            radius: d.radius,
        })
    }

    pub fn span(&self, piece: Piece) -> f64 {
        match piece {
            Piece::Arc => FRAC_PI_2,
            _ => self.radius,
        }
    }

    pub fn eval(&self, piece: Piece, t: f64) -> f64 {
        match piece {
            Piece::Left => self.pieces.left.eval(&[t]),
            Piece::Bottom => self.pieces.bottom.eval(&[t]),
            Piece::Arc => self.pieces.arc.eval(&[t]),
        }
    }

    pub fn mass(&self, piece: Piece, lo: f64, hi: f64) -> f64 {
        integrate(|t| self.eval(piece, t), lo, hi, 0.0, 1e-12).value
    }

    /// `(t, density)` at `points` equally spaced parameters covering the piece.
    pub fn table(&self, piece: Piece, points: usize) -> (Vec<f64>, Vec<f64>) {
        let span = self.span(piece);
        let t: Vec<f64> = (0..points).map(|k| span * k as f64 / (points - 1) as f64).collect();
        let f = t.iter().map(|&t| self.eval(piece, t)).collect();
        (t, f)
    }
}

/// Monte Carlo counts per boundary piece and bin, plus corner and interior.
#[derive(Debug, Clone, PartialEq)]
pub struct McCounts {
    pub total: usize,
    pub bins: BTreeMap<Piece, Vec<usize>>,
    pub corners: usize,
    pub interior: usize,
}

pub fn mc_counts(cfg: &Config, seed: u64) -> Result<McCounts, CliError> {
    let d = &cfg.density;
    let g = gaussian(d)?;
    let set = ConstraintSet::quarter_disc(d.radius)?;
    let s = mc_project(&g, &set, d.samples, seed, &SolverConfig::standalone())?;
    let mut bins: BTreeMap<Piece, Vec<usize>> = Piece::ALL.iter().map(|&p| (p, vec![0; d.bins])).collect();
    let (mut corners, mut interior) = (0, 0);
    let bin = |t: f64, span: f64| ((t / span * d.bins as f64).max(0.0) as usize).min(d.bins - 1);
    for (x, face) in s.samples.iter().zip(&s.face_labels) {
        let (piece, t) = match face.active.as_slice() {
            [true, false, false] => (Piece::Left, x[1]),
            [false, true, false] => (Piece::Bottom, x[0]),
            [false, false, true] => (Piece::Arc, x[1].atan2(x[0])),
            [false, false, false] => {
                interior += 1;
                continue;
            }
            _ => {
                corners += 1;
                continue;
            }
        };
        let span = if piece == Piece::Arc { FRAC_PI_2 } else { d.radius };
        bins.get_mut(&piece).expect("all pieces present")[bin(t, span)] += 1;
    }
    Ok(McCounts {
        total: s.len(),
        bins,
        corners,
        interior,
    })
}

/// Boundary quadrature mass plus Monte Carlo corner and interior mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBalance {
    pub boundary_quadrature: f64,
    pub corner_mc: f64,
    pub interior_mc: f64,
    /// Binomial standard error of the Monte Carlo part.
    pub std_error: f64,
}

impl MassBalance {
    pub fn total(&self) -> f64 {
        self.boundary_quadrature + self.corner_mc + self.interior_mc
    }

    pub fn within(&self, sigmas: f64) -> bool {
        (self.total() - 1.0).abs() <= sigmas * self.std_error
    }
}

pub fn mass_balance(dens: &Densities, mc: &McCounts) -> MassBalance {
    let n = mc.total as f64;
    let boundary_quadrature = Piece::ALL.iter().map(|&p| dens.mass(p, 0.0, dens.span(p))).sum();
    let p = (mc.corners + mc.interior) as f64 / n;
    // with no spread in the counts, one sample is the resolution
    let std_error = if p > 0.0 && p < 1.0 { (p * (1.0 - p) / n).sqrt() } else { 1.0 / n };
    MassBalance {
        boundary_quadrature,
        corner_mc: mc.corners as f64 / n,
        interior_mc: mc.interior as f64 / n,
        std_error,
    }
}

pub fn command(cfg: &Config) -> Result<Outcome, CliError> {
    let d = &cfg.density;
    let dens = Densities::new(d)?;
    let seed = derive_seed(cfg.seed, "density/mc");
    let mut artifacts = Vec::new();
    for piece in Piece::ALL {
        let (t, f) = dens.table(piece, d.table_points);
        let label = if piece == Piece::Arc { "angle" } else { "t" };
        artifacts.push(Artifact::build(format!("{}.csv", piece.name()), |w| {
            write_columns(w, &[label, "density"], &[&t, &f])
        })?);
    }

    // the interior part of the projected distribution is the Gaussian itself
    let g = gaussian(d)?;
    let (mut xs, mut ys, mut fs) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..d.grid {
        for j in 0..d.grid {
            let (x, y) = (d.radius * i as f64 / (d.grid - 1) as f64, d.radius * j as f64 / (d.grid - 1) as f64);
            let inside = x > 0.0 && y > 0.0 && x.hypot(y) < d.radius;
            xs.push(x);
            ys.push(y);
            fs.push(if inside { g.density(&DVector::from_column_slice(&[x, y]))? } else { 0.0 });
        }
    }
    artifacts.push(Artifact::build("interior.csv", |w| write_columns(w, &["x", "y", "density"], &[&xs, &ys, &fs]))?);

    let mc = mc_counts(cfg, seed)?;
    let n = mc.total as f64;
    let mut rows = vec!["piece,bin,lo,hi,mc_mass,quadrature_mass".to_string()];
    for (piece, counts) in &mc.bins {
        let w = dens.span(*piece) / d.bins as f64;
        for (k, &c) in counts.iter().enumerate() {
            let (lo, hi) = (k as f64 * w, (k + 1) as f64 * w);
            rows.push(format!("{},{k},{lo:?},{hi:?},{:?},{:?}", piece.name(), c as f64 / n, dens.mass(*piece, lo, hi)));
        }
    }
    artifacts.push(Artifact::text("histogram.csv", &rows));

    let balance = mass_balance(&dens, &mc);
    let mut masses = vec!["piece,quadrature,mc".to_string()];
    for (piece, counts) in &mc.bins {
        masses.push(format!(
            "{},{:?},{:?}",
            piece.name(),
            dens.mass(*piece, 0.0, dens.span(*piece)),
            counts.iter().sum::<usize>() as f64 / n
        ));
    }
    masses.push(format!("corners,,{:?}", balance.corner_mc));
    masses.push(format!("interior,,{:?}", balance.interior_mc));
    artifacts.push(Artifact::text("masses.csv", &masses));

    let ok = balance.within(3.0);
    let report = vec![
        format!(
            "quarter disc radius {} mean {:?} covariance {:?}, {} samples",
            d.radius, d.mean, d.covariance, mc.total
        ),
        format!(
            "boundary quadrature {:.6} + corners {:.6} + interior {:.6} = {:.6} (3 sigma = {:.6}): {}",
            balance.boundary_quadrature,
            balance.corner_mc,
            balance.interior_mc,
            balance.total(),
            3.0 * balance.std_error,
            if ok { "pass" } else { "FAIL" }
        ),
    ];
    artifacts.push(Artifact::text("report.txt", &report));
    Ok(Outcome {
        artifacts,
        report,
        seeds: BTreeMap::from([("density/mc".to_string(), seed)]),
        failure: (!ok).then(|| format!("mass balance off by {:.3e}", balance.total() - 1.0)),
    })
}
