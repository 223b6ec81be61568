//! One-dimensional deblurring with fixed `λ, δ` under several constraints.

use std::collections::BTreeMap;

use nalgebra::DVector;
use projpost::constraints::ConstraintSet;
use projpost::diagnostics::{write_columns, SummaryTable};
use projpost::forward::{build_blur_operator, build_periodic_diff, make_instance, make_test_signal};
use projpost::solver::sample_projected_batch;
use projpost::{ForwardPair, ProblemInstance};
use rayon::prelude::*;

use crate::artifacts::{derive_seed, Artifact, Outcome};
use crate::config::{Config, DeblurMode};
use crate::error::CliError;

/// Dense materialization limit for the posterior validity check.
const DENSE_THRESHOLD: usize = 4096;

/// Required fraction of extreme components where the oblique box interval
/// is no wider than the clamped one.
pub const OBLIQUE_FRACTION: f64 = 0.6;

/// Accepted range of the realized relative noise level.
pub const NOISE_RANGE: (f64, f64) = (0.02, 0.12);

pub struct ModeResult {
    pub summary: SummaryTable,
    pub samples: Vec<DVector<f64>>,
}

pub struct DeblurRun {
    pub instance: ProblemInstance,
    pub modes: BTreeMap<DeblurMode, ModeResult>,
    pub data_seed: u64,
    pub sample_seed: u64,
}

/// Direction checks comparing the modes on components whose true value is
/// exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DeblurChecks {
    pub extreme_components: usize,
    pub mean_width: BTreeMap<DeblurMode, f64>,
    /// Fraction of extreme components where `box` width ≤ `euclid_box` width.
    pub oblique_fraction: Option<f64>,
    pub relative_noise: f64,
}

impl DeblurChecks {
    pub fn box_narrower(&self) -> Option<bool> {
        Some(self.mean_width.get(&DeblurMode::Box)? < self.mean_width.get(&DeblurMode::Unconstrained)?)
    }

    pub fn oblique_beats_euclid(&self) -> Option<bool> {
        self.oblique_fraction.map(|f| f >= OBLIQUE_FRACTION)
    }

    pub fn noise_in_range(&self) -> bool {
        self.relative_noise >= NOISE_RANGE.0 && self.relative_noise <= NOISE_RANGE.1
    }
}

pub fn extreme_components(x_true: &DVector<f64>) -> Vec<usize> {
    (0..x_true.len()).filter(|&i| x_true[i] == 0.0 || x_true[i] == 1.0).collect()
}

pub fn run(cfg: &Config) -> Result<DeblurRun, CliError> {
    let d = &cfg.deblur;
    let data_seed = derive_seed(cfg.seed, "deblur/data");
    let sample_seed = derive_seed(cfg.seed, "deblur/samples");
    let instance = make_instance(
        build_blur_operator(d.n, d.gamma)?,
        build_periodic_diff(d.n)?,
        make_test_signal(d.n)?,
        d.lambda_true,
        data_seed,
    )?;
    let pair = ForwardPair::new(instance.a.clone(), instance.l.clone(), DENSE_THRESHOLD)?;

    // every mode uses the same draws of the perturbed data, so the modes
    // differ only through their constraint
    let mut sampled: Vec<DeblurMode> = d
        .modes
        .iter()
        .map(|&m| if m == DeblurMode::EuclidBox { DeblurMode::Unconstrained } else { m })
        .collect();
    sampled.sort();
    sampled.dedup();
    let draws: BTreeMap<DeblurMode, Vec<DVector<f64>>> = sampled
        .par_iter()
        .map(|&mode| {
            let set = match mode {
                DeblurMode::Unconstrained => ConstraintSet::whole_space(d.n),
                DeblurMode::Nonnegative => ConstraintSet::nonnegative_orthant(d.n),
                DeblurMode::Box => ConstraintSet::uniform_box(d.n, 0.0, 1.0)?,
                DeblurMode::EuclidBox => unreachable!("derived from unconstrained draws"),
            };
            let samples = sample_projected_batch(&pair, &instance.b, d.lambda, d.delta, &set, d.samples, sample_seed, &cfg.solver)?;
            if let Some(bad) = samples.iter().position(|x| !set.contains(x, 0.0)) {
                return Err(CliError::Numerical(format!("{} sample {bad} is infeasible", mode.name())));
            }
            Ok((mode, samples))
        })
        .collect::<Result<_, CliError>>()?;

    let mut modes = BTreeMap::new();
    for &mode in &d.modes {
        let samples = match mode {
            DeblurMode::EuclidBox => draws[&DeblurMode::Unconstrained].iter().map(|x| x.map(|v| v.clamp(0.0, 1.0))).collect(),
            m => draws[&m].clone(),
        };
        let summary = SummaryTable::new(&samples, d.level, &[], 0)?;
        modes.insert(mode, ModeResult { summary, samples });
    }
    Ok(DeblurRun {
        instance,
        modes,
        data_seed,
        sample_seed,
    })
}

pub fn checks(run: &DeblurRun) -> DeblurChecks {
    let extreme = extreme_components(&run.instance.x_true);
    let mean_width = run
        .modes
        .iter()
        .map(|(&m, r)| (m, extreme.iter().map(|&i| r.summary.ci_width[i]).sum::<f64>() / extreme.len().max(1) as f64))
        .collect();
    let oblique_fraction = match (run.modes.get(&DeblurMode::Box), run.modes.get(&DeblurMode::EuclidBox)) {
        (Some(ob), Some(eu)) if !extreme.is_empty() => {
            let wins = extreme.iter().filter(|&&i| ob.summary.ci_width[i] <= eu.summary.ci_width[i]).count();
            Some(wins as f64 / extreme.len() as f64)
        }
        _ => None,
    };
    DeblurChecks {
        extreme_components: extreme.len(),
        mean_width,
        oblique_fraction,
        relative_noise: run.instance.relative_noise,
    }
}

fn verdict(ok: Option<bool>) -> &'static str {
    match ok {
        Some(true) => "yes",
        Some(false) => "NO",
        None => "n/a",
    }
}

pub fn command(cfg: &Config) -> Result<Outcome, CliError> {
    let run = run(cfg)?;
    let c = checks(&run);
    let inst = &run.instance;
    let n = inst.x_true.len();
    let t: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let ax = inst.a.apply(&inst.x_true);
    let mut artifacts = vec![Artifact::build("data.csv", |w| {
        write_columns(
            w,
            &["t", "x_true", "a_x_true", "b"],
            &[&t, inst.x_true.as_slice(), ax.as_slice(), inst.b.as_slice()],
        )
    })?];

    let modes: Vec<DeblurMode> = run.modes.keys().copied().collect();
    let mut names = vec!["component", "t", "x_true"];
    names.extend(modes.iter().map(|m| m.name()));
    let comp: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut cols: Vec<&[f64]> = vec![&comp, &t, inst.x_true.as_slice()];
    cols.extend(modes.iter().map(|m| run.modes[m].summary.ci_width.as_slice()));
    artifacts.push(Artifact::build("ci_widths.csv", |w| write_columns(w, &names, &cols))?);

    for (mode, r) in &run.modes {
        artifacts.push(Artifact::build(format!("{}/summary.csv", mode.name()), |w| r.summary.write_components(w))?);
        if cfg.deblur.write_samples {
            artifacts.push(Artifact::build(format!("{}/samples.csv", mode.name()), |w| write_samples(w, &r.samples))?);
        }
    }

    let mut report = vec![
        format!(
            "deblur n={} gamma={} lambda={} delta={} samples={}",
            n, cfg.deblur.gamma, cfg.deblur.lambda, cfg.deblur.delta, cfg.deblur.samples
        ),
        format!(
            "relative noise {:.4} (accepted {}..{}): {}",
            c.relative_noise,
            NOISE_RANGE.0,
            NOISE_RANGE.1,
            verdict(Some(c.noise_in_range()))
        ),
        format!("components with true value 0 or 1: {}", c.extreme_components),
    ];
    for (m, w) in &c.mean_width {
        report.push(format!("mean {:.0}% interval width on them, {}: {w:.6}", cfg.deblur.level * 100.0, m.name()));
    }
    report.push(format!("box narrower than unconstrained: {}", verdict(c.box_narrower())));
    report.push(match c.oblique_fraction {
        Some(f) => format!(
            "oblique box no wider than clamped on {:.1}% of them (need {:.0}%): {}",
            100.0 * f,
            100.0 * OBLIQUE_FRACTION,
            verdict(c.oblique_beats_euclid())
        ),
        None => "oblique vs clamped box: n/a".into(),
    });
    artifacts.push(Artifact::text("report.txt", &report));

    Ok(Outcome {
        artifacts,
        report,
        seeds: BTreeMap::from([("deblur/data".into(), run.data_seed), ("deblur/samples".into(), run.sample_seed)]),
        failure: None,
    })
}

/// One sample per row.
pub fn write_samples(w: &mut Vec<u8>, samples: &[DVector<f64>]) -> std::io::Result<()> {
    use std::io::Write;
    let n = samples.first().map_or(0, |x| x.len());
    let header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for x in samples {
        let row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
