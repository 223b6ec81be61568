//! Experiment configuration. Every section and key is optional; missing
//! values take the defaults below and unknown keys are rejected.

use std::path::{Path, PathBuf};

use projpost::{HyperPrior, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Master seed; every random stream of a run is derived from it.
    pub seed: u64,
    /// Output directory; `runs/<command>` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// FISTA budget of the posterior samplers.
    pub solver: SolverConfig,
    pub deblur: DeblurConfig,
    pub ct: CtConfig,
    pub density: DensityConfig,
    pub verify: VerifyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 2024,
            out: None,
            solver: SolverConfig::gibbs(),
            deblur: DeblurConfig::default(),
            ct: CtConfig::default(),
            density: DensityConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeblurMode {
    Unconstrained,
    Nonnegative,
    /// Oblique projection onto `[0, 1]ⁿ`.
    Box,
    /// Unconstrained draws clamped to `[0, 1]ⁿ`.
    EuclidBox,
}

impl DeblurMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Unconstrained => "unconstrained",
            Self::Nonnegative => "nonnegative",
            Self::Box => "box",
            Self::EuclidBox => "euclid_box",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeblurConfig {
    pub n: usize,
    /// Blur kernel width.
    pub gamma: f64,
    /// Noise precision used to generate the data.
    pub lambda_true: f64,
    /// Fixed noise precision of the posterior.
    pub lambda: f64,
    /// Fixed prior precision of the posterior.
    pub delta: f64,
    pub samples: usize,
    pub modes: Vec<DeblurMode>,
    /// Credible level of the reported intervals.
    pub level: f64,
    /// Also write every sample (`samples.csv` per mode).
    pub write_samples: bool,
}

impl Default for DeblurConfig {
    fn default() -> Self {
        Self {
            n: 128,
            gamma: 0.02,
            lambda_true: 1000.0,
            lambda: 1000.0,
            delta: 150.0,
            samples: 10_000,
            modes: vec![DeblurMode::Unconstrained, DeblurMode::Nonnegative, DeblurMode::Box, DeblurMode::EuclidBox],
            level: 0.95,
            write_samples: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtMode {
    Unconstrained,
    Nonnegative,
}

impl CtMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Unconstrained => "unconstrained",
            Self::Nonnegative => "nonnegative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtConfig {
    pub side: usize,
    pub n_angles: usize,
    pub n_rays: usize,
    /// Pixel length; a fixed field of view of width 100 when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pixel_size: Option<f64>,
    pub lambda_true: f64,
    pub hyper: HyperPrior,
    /// Gibbs sweeps per chain.
    pub k_max: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub modes: Vec<CtMode>,
    pub level: f64,
    pub max_lag: usize,
    /// Also write the stored `x` samples (`chain.csv` per mode).
    pub write_samples: bool,
}

impl Default for CtConfig {
    fn default() -> Self {
        Self {
            side: 32,
            n_angles: 45,
            n_rays: 45,
            pixel_size: None,
            lambda_true: 5.0,
            hyper: HyperPrior::default(),
            k_max: 5000,
            burn_in: 1000,
            thin: 1,
            modes: vec![CtMode::Unconstrained, CtMode::Nonnegative],
            level: 0.95,
            max_lag: 100,
            write_samples: false,
        }
    }
}

impl CtConfig {
    /// 100×100 image, 180 angles, 140 rays, 15000 sweeps.
    pub fn full_scale(&mut self) {
        self.side = 100;
        self.n_angles = 180;
        self.n_rays = 140;
        self.k_max = 15_000;
    }

    pub fn pixel(&self) -> f64 {
        self.pixel_size.unwrap_or_else(|| projpost::forward::ct_pixel_size(self.side))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    pub mean: [f64; 2],
    /// Row-major 2×2 covariance.
    pub covariance: [[f64; 2]; 2],
    pub radius: f64,
    /// Points per boundary table.
    pub table_points: usize,
    /// Interior density grid is `grid × grid`.
    pub grid: usize,
    pub samples: usize,
    /// Histogram bins per boundary piece.
    pub bins: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            mean: [0.0, 0.0],
            covariance: [[1.0, 0.0], [0.0, 1.0]],
            radius: 1.0,
            table_points: 201,
            grid: 41,
            samples: 100_000,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Monte Carlo draws per instance.
    pub samples: usize,
    /// Monte Carlo draws per covariance in the face proportionality suite.
    pub face_samples: usize,
    /// Random parameter draws for the integral identities.
    pub identity_draws: usize,
    /// Random covariances per dimension for face proportionality.
    pub covariances: usize,
    /// Multiplies every tolerance; a check passes when its score is at
    /// most this value. Values below 1 tighten every check.
    pub tolerance_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            face_samples: 20_000,
            identity_draws: 1000,
            covariances: 10,
            tolerance_scale: 1.0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_level(level: f64, what: &str) -> Result<(), CliError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what}.level must lie in (0, 1), got {level}")))
    }
}

fn positive(v: f64, what: &str) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seed > i64::MAX as u64 {
            return Err(invalid(format!("seed must be at most {}", i64::MAX)));
        }
        if self.solver.max_iter == 0 {
            return Err(invalid("solver.max_iter must be at least 1"));
        }
        if !(self.solver.grad_tol >= 0.0) {
            return Err(invalid("solver.grad_tol must be nonnegative"));
        }
        let d = &self.deblur;
        if d.n < 16 {
            return Err(invalid("deblur.n must be at least 16"));
        }
        positive(d.gamma, "deblur.gamma")?;
        positive(d.lambda, "deblur.lambda")?;
        positive(d.delta, "deblur.delta")?;
        if !(d.lambda_true > 0.0) {
            return Err(invalid("deblur.lambda_true must be positive"));
        }
        if d.samples < 2 {
            return Err(invalid("deblur.samples must be at least 2"));
        }
        if d.modes.is_empty() {
            return Err(invalid("deblur.modes must not be empty"));
        }
        check_level(d.level, "deblur")?;

        let c = &self.ct;
        if c.side < 16 || c.n_angles == 0 || c.n_rays == 0 {
            return Err(invalid("ct needs side >= 16 and at least one angle and ray"));
        }
        if let Some(p) = c.pixel_size {
            positive(p, "ct.pixel_size")?;
        }
        if !(c.lambda_true > 0.0) {
            return Err(invalid("ct.lambda_true must be positive"));
        }
        c.hyper.validate().map_err(|e| invalid(format!("ct.hyper: {e}")))?;
        if c.thin == 0 {
            return Err(invalid("ct.thin must be at least 1"));
        }
        if c.k_max < c.burn_in + 2 {
            return Err(invalid("ct.k_max must exceed ct.burn_in by at least 2"));
        }
        if c.modes.is_empty() {
            return Err(invalid("ct.modes must not be empty"));
        }
        check_level(c.level, "ct")?;

        let g = &self.density;
        positive(g.radius, "density.radius")?;
        let [[a, b], [b2, d2]] = g.covariance;
        if (b - b2).abs() > 1e-12 * (a.abs() + d2.abs()) || !(a > 0.0 && a * d2 - b * b > 0.0) {
            return Err(invalid("density.covariance must be symmetric positive definite"));
        }
        if g.mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid("density.mean must be finite"));
        }
        if g.table_points < 2 || g.grid < 2 || g.bins == 0 || g.samples == 0 {
            return Err(invalid("density table sizes, bins and samples must be positive"));
        }

        let v = &self.verify;
        if v.samples < 1000 || v.face_samples < 1000 || v.identity_draws == 0 || v.covariances == 0 {
            return Err(invalid("verify needs samples >= 1000 and positive draw counts"));
        }
        if !(v.tolerance_scale >= 0.0) || !v.tolerance_scale.is_finite() {
            return Err(invalid("verify.tolerance_scale must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = Config::default();
        let text = cfg.to_toml();
        assert_eq!(Config::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = Config::from_toml("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(
            (cfg.deblur.n, cfg.deblur.gamma, cfg.deblur.lambda, cfg.deblur.delta, cfg.deblur.samples),
            (128, 0.02, 1000.0, 150.0, 10_000)
        );
        assert_eq!((cfg.ct.side, cfg.ct.n_angles, cfg.ct.n_rays), (32, 45, 45));
        assert_eq!(cfg.ct.hyper, HyperPrior::new(1.0, 1e-4, 1.0, 1e-4).unwrap());
        assert_eq!(cfg.solver.max_iter, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 3", "[deblur]\nsamples = 10\nwidth = 2", "[solver]\nmaxiter = 3", "[ct.hyper]\nalpha = 1"] {
            assert!(matches!(Config::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[deblur]\nn = 8",
            "[deblur]\nlevel = 1.5",
            "[deblur]\nmodes = []",
            "[deblur]\nmodes = [\"diagonal\"]",
            "[ct]\nthin = 0",
            "[ct]\nk_max = 10\nburn_in = 10",
            "[density]\ncovariance = [[1.0, 2.0], [2.0, 1.0]]",
            "[verify]\ntolerance_scale = -1.0",
            "[solver]\nmax_iter = 0",
        ] {
            assert!(matches!(Config::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn full_scale_ct() {
        let mut ct = CtConfig::default();
        ct.full_scale();
        assert_eq!((ct.side, ct.n_angles, ct.n_rays, ct.k_max), (100, 180, 140, 15_000));
        assert_eq!(ct.pixel(), 1.0);
    }

    mod round_trip {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn arbitrary_configs_round_trip(
                seed in 0..=i64::MAX as u64,
                n in 16usize..512,
                gamma in 1e-4..1.0f64,
                samples in 2usize..100_000,
                level in 0.01..0.99f64,
                side in 16usize..128,
                k_max in 10usize..20_000,
                beta in 1e-8..10.0f64,
                mean in prop::array::uniform2(-5.0..5.0f64),
                scale in 0.0..4.0f64,
                out in prop::option::of("[a-z]{1,8}"),
            ) {
                let mut cfg = Config { seed, out: out.map(PathBuf::from), ..Config::default() };
                cfg.deblur.n = n;
                cfg.deblur.gamma = gamma;
                cfg.deblur.samples = samples;
                cfg.deblur.level = level;
                cfg.deblur.modes = vec![DeblurMode::Box];
                cfg.ct.side = side;
                cfg.ct.k_max = k_max;
                cfg.ct.burn_in = k_max / 3;
                cfg.ct.hyper.beta_delta = beta;
                cfg.ct.pixel_size = Some(gamma * 10.0);
                cfg.density.mean = mean;
                cfg.verify.tolerance_scale = scale;
                let text = cfg.to_toml();
                let back = Config::from_toml(&text).unwrap();
                prop_assert_eq!(&back, &cfg);
                prop_assert_eq!(back.to_toml(), text);
            }
        }
    }
}
