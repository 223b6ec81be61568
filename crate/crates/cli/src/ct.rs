//! Parallel-beam CT of the Shepp-Logan phantom with the hierarchical Gibbs
//! sampler.

use std::collections::BTreeMap;

use nalgebra::DVector;
use projpost::constraints::ConstraintSet;
use projpost::diagnostics::{acf, write_columns, write_pgm16, SummaryTable};
use projpost::forward::{build_diff_2d, build_radon_scaled, make_instance, shepp_logan};
use projpost::gibbs::run_pchgs;
use projpost::{Chain, ChainOptions, ForwardPair, HierarchicalModel, ProblemInstance};
use rayon::prelude::*;

use crate::artifacts::{derive_seed, Artifact, Outcome};
use crate::config::{Config, CtMode};
use crate::error::CliError;

const DENSE_THRESHOLD: usize = 4096;

/// The noise-precision ACF must drop below this within the chain.
pub const ACF_THRESHOLD: f64 = 0.1;

pub struct ModeResult {
    pub chain: Chain,
    pub summary: SummaryTable,
    pub seed: u64,
}

pub struct CtRun {
    pub instance: ProblemInstance,
    pub modes: BTreeMap<CtMode, ModeResult>,
    pub data_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeChecks {
    /// Median interval width over pixels whose true value is 0.
    pub background_width: f64,
    /// Every stored sample lies in the constraint set exactly.
    pub feasible: bool,
    /// Every `λ` and `δ` draw is positive and finite.
    pub hyper_positive: bool,
    /// First lag at which the post-burn-in `λ` ACF is below the threshold.
    pub lambda_decorrelation_lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtChecks {
    pub background_pixels: usize,
    pub modes: BTreeMap<CtMode, ModeChecks>,
    pub relative_noise: f64,
}

impl CtChecks {
    pub fn nonnegative_background_narrower(&self) -> Option<bool> {
        Some(self.modes.get(&CtMode::Nonnegative)?.background_width < self.modes.get(&CtMode::Unconstrained)?.background_width)
    }
}

pub fn instance(cfg: &Config, data_seed: u64) -> Result<ProblemInstance, CliError> {
    let c = &cfg.ct;
    Ok(make_instance(
        build_radon_scaled(c.side, c.n_angles, c.n_rays, c.pixel())?,
        build_diff_2d(c.side, c.side)?,
        shepp_logan(c.side)?,
        c.lambda_true,
        data_seed,
    )?)
}

pub fn run(cfg: &Config) -> Result<CtRun, CliError> {
    let c = &cfg.ct;
    let data_seed = derive_seed(cfg.seed, "ct/data");
    let instance = instance(cfg, data_seed)?;
    let pair = ForwardPair::new(instance.a.clone(), instance.l.clone(), DENSE_THRESHOLD)?;
    let n = pair.dim();
    let mut requested = c.modes.clone();
    requested.sort();
    requested.dedup();
    let modes = requested
        .par_iter()
        .map(|&mode| {
            let set = match mode {
                CtMode::Unconstrained => ConstraintSet::whole_space(n),
                CtMode::Nonnegative => ConstraintSet::nonnegative_orthant(n),
            };
            let seed = derive_seed(cfg.seed, &format!("ct/{}", mode.name()));
            let model = HierarchicalModel::new(pair.clone(), instance.b.clone(), set, c.hyper)?;
            let opts = ChainOptions {
                k_max: c.k_max,
                burn_in: c.burn_in,
                thin: c.thin,
                seed,
                chain_id: 0,
            };
            let chain = run_pchgs(&model, None, &opts, &cfg.solver).map_err(|e| CliError::Numerical(format!("{} chain: {e}", mode.name())))?;
            let kept: Vec<DVector<f64>> = chain.kept_x().into_iter().cloned().collect();
            let summary = SummaryTable::new(&kept, c.level, &[("lambda", chain.kept_lambda()), ("delta", chain.kept_delta())], c.max_lag)?;
            Ok((mode, ModeResult { chain, summary, seed }))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(CtRun { instance, modes, data_seed })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    projpost::diagnostics::quantile_sorted(&v, 0.5)
}

pub fn checks(run: &CtRun) -> Result<CtChecks, CliError> {
    let x_true = &run.instance.x_true;
    let background: Vec<usize> = (0..x_true.len()).filter(|&i| x_true[i] == 0.0).collect();
    let mut modes = BTreeMap::new();
    for (&mode, r) in &run.modes {
        let feasible = match mode {
            CtMode::Unconstrained => true,
            CtMode::Nonnegative => r.chain.x_samples.iter().all(|x| x.iter().all(|&v| v >= 0.0)),
        };
        let hyper_positive = r.chain.lambda_samples.iter().chain(&r.chain.delta_samples).all(|&h| h > 0.0 && h.is_finite());
        let kept = r.chain.kept_lambda();
        let rho = acf(kept, kept.len().saturating_sub(1))?;
        modes.insert(
            mode,
            ModeChecks {
                background_width: median(background.iter().map(|&i| r.summary.ci_width[i]).collect()),
                feasible,
                hyper_positive,
                lambda_decorrelation_lag: rho.iter().position(|&p| p < ACF_THRESHOLD),
            },
        );
    }
    Ok(CtChecks {
        background_pixels: background.len(),
        modes,
        relative_noise: run.instance.relative_noise,
    })
}

fn range(v: &[f64]) -> (f64, f64) {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    // adding zero turns -0.0 into 0.0
    (lo + 0.0, hi + 0.0)
}

/// Images are scaled to their own range; signed differences to a range
/// symmetric about zero. Every scaling is listed in `images.csv`.
struct Images {
    side: usize,
    artifacts: Vec<Artifact>,
    rows: Vec<String>,
}

impl Images {
    fn add(&mut self, path: String, values: &[f64], signed: bool) -> Result<(), CliError> {
        let (mut lo, mut hi) = range(values);
        if signed {
            hi = lo.abs().max(hi.abs());
            lo = -hi;
        }
        self.artifacts
            .push(Artifact::build(path.clone(), |w| write_pgm16(w, values, self.side, self.side, lo, hi))?);
        self.rows.push(format!("{path},{lo:?},{hi:?}"));
        Ok(())
    }
}

pub fn command(cfg: &Config) -> Result<Outcome, CliError> {
    let run = run(cfg)?;
    let checks = checks(&run)?;
    let c = &cfg.ct;
    let inst = &run.instance;
    let mut artifacts = vec![Artifact::build("data.csv", |w| write_columns(w, &["b"], &[inst.b.as_slice()]))?];
    let mut images = Images {
        side: c.side,
        artifacts: Vec::new(),
        rows: vec!["file,lo,hi".into()],
    };
    images.add("phantom.pgm".into(), inst.x_true.as_slice(), false)?;
    for (mode, r) in &run.modes {
        let dir = mode.name();
        artifacts.push(Artifact::build(format!("{dir}/hyper_trace.csv"), |w| r.chain.write_hyper_trace(w))?);
        artifacts.push(Artifact::build(format!("{dir}/hyper_acf.csv"), |w| r.summary.write_hyper(w))?);
        artifacts.push(Artifact::build(format!("{dir}/summary.csv"), |w| r.summary.write_components(w))?);
        if c.write_samples {
            artifacts.push(Artifact::build(format!("{dir}/chain.csv"), |w| r.chain.write_delimited(w))?);
        }
        images.add(format!("{dir}/median.pgm"), r.summary.median.as_slice(), false)?;
        images.add(format!("{dir}/ci_width.pgm"), r.summary.ci_width.as_slice(), false)?;
        let err = &r.summary.median - &inst.x_true;
        images.add(format!("{dir}/error.pgm"), err.as_slice(), true)?;
    }
    if let (Some(u), Some(p)) = (run.modes.get(&CtMode::Unconstrained), run.modes.get(&CtMode::Nonnegative)) {
        let diff = &u.summary.ci_width - &p.summary.ci_width;
        images.add("ci_width_difference.pgm".into(), diff.as_slice(), true)?;
    }
    artifacts.extend(images.artifacts);
    artifacts.push(Artifact::text("images.csv", &images.rows));

    let yes = |b: bool| if b { "yes" } else { "NO" };
    let mut report = vec![
        format!(
            "ct side={} angles={} rays={} pixel={} sweeps={} burn_in={}",
            c.side,
            c.n_angles,
            c.n_rays,
            c.pixel(),
            c.k_max,
            c.burn_in
        ),
        format!("relative noise {:.4}", checks.relative_noise),
        format!("background pixels: {}", checks.background_pixels),
    ];
    for (mode, m) in &checks.modes {
        let r = &run.modes[mode];
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        report.push(format!(
            "{}: lambda mean {:.4}, delta mean {:.4}, ess lambda {:.1}, background width {:.6}, feasible {}, hyper positive {}, lambda acf < {ACF_THRESHOLD} at lag {}",
            mode.name(),
            mean(r.chain.kept_lambda()),
            mean(r.chain.kept_delta()),
            r.summary.hyper[0].ess,
            m.background_width,
            yes(m.feasible),
            yes(m.hyper_positive),
            m.lambda_decorrelation_lag.map_or("never".to_string(), |k| k.to_string()),
        ));
    }
    report.push(match checks.nonnegative_background_narrower() {
        Some(b) => format!("nonnegative background narrower than unconstrained: {}", yes(b)),
        None => "nonnegative vs unconstrained background: n/a".into(),
    });
    artifacts.push(Artifact::text("report.txt", &report));

    let infeasible: Vec<&str> = checks
        .modes
        .iter()
        .filter(|(_, m)| !m.feasible || !m.hyper_positive)
        .map(|(k, _)| k.name())
        .collect();
    if !infeasible.is_empty() {
        return Err(CliError::Numerical(format!("infeasible or non-positive draws in {}", infeasible.join(", "))));
    }
    let mut seeds = BTreeMap::from([("ct/data".to_string(), run.data_seed)]);
    for (mode, r) in &run.modes {
        seeds.insert(format!("ct/{}", mode.name()), r.seed);
    }
    Ok(Outcome {
        artifacts,
        report,
        seeds,
        failure: None,
    })
}
