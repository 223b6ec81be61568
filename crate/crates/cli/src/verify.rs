//! Executable checks of the theory behind the projected posterior.
//!
//! Each suite reports a score: its worst discrepancy divided by the allowed
//! discrepancy. A suite passes when the score is at most
//! `verify.tolerance_scale`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use projpost::constraints::ConstraintSet;
use projpost::densities::{gauss_integral_affine, gauss_integral_linear, BoundaryDensity, DiscBoundaryDensity, HalfspaceBoundaryDensity};
use projpost::projector::{check_face_proportionality, check_inversion_1d, check_mean_in_relint, check_positive_mass, mc_project, SIGNIFICANCE};
use projpost::quadrature::{integrate, integrate_half_line};
use projpost::testing::{random_spd, random_spd_in, random_vector};
use projpost::{stream, Gaussian, ObliqueProjector, SolverConfig, Stream};
use rand::Rng;
use rayon::prelude::*;

use crate::artifacts::{derive_seed, Artifact, Outcome};
use crate::config::Config;
use crate::error::CliError;

/// Relative accuracy required of the closed-form integrals.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Accuracy of the one-dimensional halfspace point mass.
pub const POINT_MASS_TOL: f64 = 1e-12;
/// Accuracy of the isotropic disc boundary mass.
pub const DISC_TOL: f64 = 1e-6;
/// Agreement of iterative and closed-form oblique projections.
pub const PROJECTION_TOL: f64 = 1e-8;
/// Monte Carlo agreement in binomial standard errors.
pub const SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    /// The property under test.
    pub property: &'static str,
    pub score: f64,
    pub detail: String,
}

impl SuiteResult {
    pub fn passed(&self, tolerance_scale: f64) -> bool {
        self.score <= tolerance_scale
    }
}

type Suite = fn(&Config, &mut Stream) -> Result<SuiteResult, CliError>;

pub const SUITES: [(&str, Suite); 9] = [
    ("linear_identity", linear_identity),
    ("affine_identity", affine_identity),
    ("halfspace_point_mass", halfspace_point_mass),
    ("disc_normalization", disc_normalization),
    ("positive_mass", positive_mass),
    ("mean_in_relative_interior", mean_in_relint),
    ("face_proportionality", face_proportionality),
    ("normal_cone_preimage", normal_cone_preimage),
    ("projection_closed_form", projection_closed_form),
];

/// Quadrature over `[0, ∞)` split at the integrand's peak.
fn peaked_quadrature(g: impl Fn(f64) -> f64, peak: f64) -> f64 {
    let peak = peak.max(0.0);
    let head = if peak > 0.0 { integrate(&g, 0.0, peak, 0.0, 1e-14).value } else { 0.0 };
    head + integrate_half_line(|s| g(peak + s), 1e-14).value
}

fn linear_identity(cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.verify.identity_draws {
        let (a, b, c) = (-rng.random_range(0.5..4.0), rng.random_range(-5.0..5.0), rng.random_range(-2.0..2.0));
        let exact = gauss_integral_linear(a, b, c)?;
        let quad = peaked_quadrature(|t| (a * t * t + b * t + c).exp(), -b / (2.0 * a));
        worst = worst.max((exact / quad - 1.0).abs());
    }
    Ok(SuiteResult {
        name: "linear_identity",
        property: "closed form of the integral of exp(at^2+bt+c) over [0,inf) equals quadrature",
        score: worst / IDENTITY_TOL,
        detail: format!("max relative error {worst:.3e} over {} draws", cfg.verify.identity_draws),
    })
}

fn affine_identity(cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.verify.identity_draws {
        let (a, b, c) = (rng.random_range(0.5..4.0), rng.random_range(-5.0..5.0), rng.random_range(-2.0..2.0));
        let (d, f) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
        let exact = gauss_integral_affine(a, b, c, d, f)?;
        let quad = peaked_quadrature(|t| (d + f * t) * (-0.5 * (a * t * t + b * t + c)).exp(), -b / (2.0 * a));
        worst = worst.max((exact / quad - 1.0).abs());
    }
    Ok(SuiteResult {
        name: "affine_identity",
        property: "closed form of the integral of (d+ft)exp(-(at^2+bt+c)/2) over [0,inf) equals quadrature",
        score: worst / IDENTITY_TOL,
        detail: format!("max relative error {worst:.3e} over {} draws", cfg.verify.identity_draws),
    })
}

fn binomial_score(mc: f64, p: f64, n: usize) -> f64 {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    if se > 0.0 {
        (mc - p).abs() / (SIGMAS * se)
    } else if mc == p {
        0.0
    } else {
        f64::INFINITY
    }
}

fn halfspace_point_mass(cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    let g = Gaussian::standard(1);
    let a = DVector::from_element(1, 1.0);
    let dens = HalfspaceBoundaryDensity::new(&g, &a, 0.0, &DVector::zeros(1), &DMatrix::zeros(1, 0))?;
    let analytic = dens.eval(&[]);
    let s = mc_project(
        &g,
        &ConstraintSet::halfspace(a, 0.0)?,
        cfg.verify.samples,
        rng.random(),
        &SolverConfig::standalone(),
    )?;
    let (mc, _) = check_positive_mass(&s);
    let score = ((analytic - 0.5).abs() / POINT_MASS_TOL).max(binomial_score(mc, 0.5, s.len()));
    Ok(SuiteResult {
        name: "halfspace_point_mass",
        property: "a standard normal projected onto x <= 0 puts mass 1/2 on the boundary",
        score,
        detail: format!("analytic {analytic:?}, Monte Carlo {mc:.5}"),
    })
}

fn disc_normalization(cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    let circle = |d: &DiscBoundaryDensity<f64>| integrate(|u| d.eval(&[u]), 0.0, 2.0 * PI, 0.0, 1e-12).value;
    let iso = circle(&DiscBoundaryDensity::unit(&Gaussian::standard(2))?);
    let mut score = (iso - (-0.5f64).exp()).abs() / DISC_TOL;
    let set = ConstraintSet::ball2d(1.0, DVector::zeros(2))?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let g = Gaussian::new(random_vector::<f64, _>(2, rng) * 0.8, random_spd_in(2, 0.2, 2.0, rng))?;
        let boundary = circle(&DiscBoundaryDensity::unit(&g)?);
        let s = mc_project(&g, &set, cfg.verify.samples, rng.random(), &SolverConfig::standalone())?;
        let (_, interior) = check_positive_mass(&s);
        worst = worst.max(binomial_score(interior, 1.0 - boundary, s.len()));
    }
    score = score.max(worst);
    Ok(SuiteResult {
        name: "disc_normalization",
        property: "disc boundary density plus interior mass integrates to one",
        score,
        detail: format!("isotropic boundary mass {iso:.12} vs exp(-1/2); worst random case {worst:.3} of 3 sigma"),
    })
}

fn positive_mass(cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    let mut worst: f64 = 0.0;
    let mut fractions = Vec::new();
    for k in 0..10 {
        let n = if k % 4 == 3 { 2 } else { 2 + k % 3 };
        let g = Gaussian::new(random_vector(n, rng), random_spd(n, rng))?;
        let set = match k % 4 {
            0 => ConstraintSet::nonnegative_orthant(n),
            1 => ConstraintSet::uniform_box(n, -1.0, 1.5)?,
            2 => ConstraintSet::halfspace(random_vector(n, rng), 0.3)?,
            _ => ConstraintSet::ball2d(1.0, DVector::zeros(2))?,
        };
        let s = mc_project(&g, &set, cfg.verify.samples, rng.random(), &SolverConfig::standalone())?;
        let (bd, int) = check_positive_mass(&s);
        let fewest = (bd.min(int) * s.len() as f64).round();
        // at least one sample on each side is required
        worst = worst.max(1.0 / fewest);
        fractions.push(format!("{bd:.3}"));
    }
    Ok(SuiteResult {
        name: "positive_mass",
        property: "boundary and interior both carry positive probability",
        score: worst,
        detail: format!("boundary fractions [{}]", fractions.join(" ")),
    })
}

fn mean_in_relint(cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    // a correlated covariance; with Σ = I the orthant projection of this
    // mean is the Euclidean one and lands at the origin almost surely
    let sigma = DMatrix::from_row_slice(2, 2, &[4.0, 1.2, 1.2, 4.0]);
    let g = Gaussian::new(DVector::from_column_slice(&[-5.0, -5.0]), sigma)?;
    let orthant = mc_project(
        &g,
        &ConstraintSet::nonnegative_orthant(2),
        cfg.verify.samples,
        rng.random(),
        &SolverConfig::standalone(),
    )?;
    let m1 = orthant.mean();
    let g = Gaussian::new(DVector::from_column_slice(&[1.5, -0.5]), random_spd(2, rng))?;
    let unit_box = mc_project(
        &g,
        &ConstraintSet::uniform_box(2, 0.0, 1.0)?,
        cfg.verify.samples,
        rng.random(),
        &SolverConfig::standalone(),
    )?;
    let m2 = unit_box.mean();
    let ok = m1.iter().all(|&v| v > 0.0) && check_mean_in_relint(&orthant) && m2.iter().all(|&v| v > 0.0 && v < 1.0) && check_mean_in_relint(&unit_box);
    Ok(SuiteResult {
        name: "mean_in_relative_interior",
        property: "the projected mean lies in the relative interior of the set",
        score: if ok { 0.0 } else { f64::INFINITY },
        detail: format!("orthant mean ({:.4e}, {:.4e}); box mean ({:.4}, {:.4})", m1[0], m1[1], m2[0], m2[1]),
    })
}

fn face_proportionality(cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    let mut worst: f64 = 0.0;
    let (mut faces, mut rejected, mut min_p) = (0, 0, 1.0f64);
    for n in [2, 3] {
        for _ in 0..cfg.verify.covariances {
            let g = Gaussian::new(random_vector::<f64, _>(n, rng) * 0.3, random_spd(n, rng))?;
            let set = ConstraintSet::nonnegative_orthant(n);
            let s = mc_project(&g, &set, cfg.verify.face_samples, rng.random(), &SolverConfig::standalone())?;
            let edges: Vec<_> = s.face_masses().into_keys().filter(|f| f.face_dim == 1).collect();
            if edges.len() != n {
                return Ok(SuiteResult {
                    name: "face_proportionality",
                    property: "on each face the projected law is proportional to the Gaussian density",
                    score: f64::INFINITY,
                    detail: format!("only {} of {n} edges of the {n}-orthant received samples", edges.len()),
                });
            }
            for face in edges {
                // a face too thin to test counts as a failure
                let p = check_face_proportionality(&s, &face).map_or(0.0, |r| r.result.p_value);
                worst = worst.max(if p > 0.0 { SIGNIFICANCE / p } else { f64::INFINITY });
                min_p = min_p.min(p);
                faces += 1;
                rejected += usize::from(p < SIGNIFICANCE);
            }
        }
    }
    Ok(SuiteResult {
        name: "face_proportionality",
        property: "on each face the projected law is proportional to the Gaussian density",
        score: worst,
        detail: format!("{rejected} of {faces} one-dimensional orthant faces rejected at 1%, smallest KS p-value {min_p:.4}"),
    })
}

fn normal_cone_preimage(cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    let v = |x: f64| DVector::from_element(1, x);
    let cases = [
        (ConstraintSet::halfspace(v(1.0), 0.0)?, 0.3, 2.0),
        (ConstraintSet::halfspace(v(-1.0), -0.5)?, 0.2, 0.7),
        (ConstraintSet::uniform_box(1, 0.0, 1.0)?, 0.2, 0.5),
        (ConstraintSet::nonnegative_orthant(1), -0.4, 1.3),
    ];
    let mut worst: f64 = 0.0;
    let mut vertices = 0;
    for (set, mu, var) in cases {
        let g = Gaussian::new(v(mu), DMatrix::from_element(1, 1, var))?;
        let s = mc_project(&g, &set, cfg.verify.samples, rng.random(), &SolverConfig::standalone())?;
        for face in s.face_masses().into_keys().filter(|f| f.face_dim == 0) {
            let r = check_inversion_1d(&s, &face)?;
            worst = worst.max(binomial_score(r.mc_mass, r.predicted, s.len()));
            vertices += 1;
        }
    }
    Ok(SuiteResult {
        name: "normal_cone_preimage",
        property: "mass at a boundary point equals the Gaussian mass of z + Sigma N_C(z) in one dimension",
        score: worst,
        detail: format!("{vertices} vertices, worst {worst:.3} of 3 sigma"),
    })
}

fn projection_closed_form(_cfg: &Config, rng: &mut Stream) -> Result<SuiteResult, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..7);
        let g = Gaussian::new(random_vector(n, rng), random_spd(n, rng))?;
        let set = ConstraintSet::halfspace(random_vector(n, rng), rng.random_range(-1.0..1.0))?;
        let p = ObliqueProjector::new(&g, &set, SolverConfig::exact())?;
        let x: DVector<f64> = random_vector::<f64, _>(n, rng) * 3.0;
        let closed = p.project(&x)?;
        let iterative = p.project_iterative(&x)?;
        worst = worst.max((closed - iterative).norm());
    }
    Ok(SuiteResult {
        name: "projection_closed_form",
        property: "FISTA matches the closed-form oblique projection onto a halfspace",
        score: worst / PROJECTION_TOL,
        detail: format!("max distance {worst:.3e} over 100 instances"),
    })
}

/// Runs every suite, each on its own seed.
pub fn run(cfg: &Config) -> Result<Vec<(SuiteResult, u64)>, CliError> {
    SUITES
        .par_iter()
        .map(|(name, suite)| {
            let seed = derive_seed(cfg.seed, &format!("verify/{name}"));
            Ok((suite(cfg, &mut stream(seed))?, seed))
        })
        .collect()
}

pub fn command(cfg: &Config) -> Result<Outcome, CliError> {
    let results = run(cfg)?;
    let scale = cfg.verify.tolerance_scale;
    let width = results.iter().map(|(r, _)| r.name.len()).max().unwrap_or(0);
    let mut report = vec![format!("{:<width$}  {:>10}  result  property / detail", "suite", "score")];
    let mut rows = vec!["suite,property,score,passed,detail".to_string()];
    let mut failed = Vec::new();
    let mut seeds = BTreeMap::new();
    for (r, seed) in &results {
        let ok = r.passed(scale);
        if !ok {
            failed.push(r.name);
        }
        report.push(format!(
            "{:<width$}  {:>10.4}  {}    {}",
            r.name,
            r.score,
            if ok { "pass" } else { "FAIL" },
            r.property
        ));
        report.push(format!("{:<width$}  {:>10}          {}", "", "", r.detail));
        rows.push(format!("{},\"{}\",{:?},{ok},\"{}\"", r.name, r.property, r.score, r.detail));
        seeds.insert(format!("verify/{}", r.name), *seed);
    }
    report.push(format!(
        "tolerance scale {scale}: {} of {} suites passed",
        results.len() - failed.len(),
        results.len()
    ));
    let artifacts = vec![Artifact::text("verify.csv", &rows), Artifact::text("report.txt", &report)];
    Ok(Outcome {
        artifacts,
        report,
        seeds,
        failure: (!failed.is_empty()).then(|| format!("suites failed: {}", failed.join(", "))),
    })
}
