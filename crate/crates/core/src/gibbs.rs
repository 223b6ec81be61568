//! Hierarchical Gibbs sampling of `(x, λ, δ)` for a linear model with a
//! polyhedral cone constraint and conjugate Gamma hyperpriors.
//!
//! Each sweep draws `λ` and `δ` from their Gamma conditionals given the
//! previous `x`, then `x` from the projected posterior given `(λ, δ)` by one
//! randomized constrained least-squares solve warm-started at the previous
//! sample. On a cone the `δ` shape counts only the dimension of the face the
//! current sample lies on. Gamma laws are shape–rate throughout.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{ConstraintSet, SetKind};
use crate::error::{check_dim, Error, Result};
use crate::rng::substream;
use crate::scalar::{c, Real};
use crate::solver::{sample_projected_posterior, ForwardPair, SolverConfig};

/// Default number of initial sweeps discarded from summaries.
pub const DEFAULT_BURN_IN: usize = 1000;

/// Gamma hyperpriors `λ ~ Γ(α_λ, β_λ)`, `δ ~ Γ(α_δ, β_δ)` (shape, rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperPrior {
    pub alpha_lambda: f64,
    pub beta_lambda: f64,
    pub alpha_delta: f64,
    pub beta_delta: f64,
}

impl HyperPrior {
    pub fn new(alpha_lambda: f64, beta_lambda: f64, alpha_delta: f64, beta_delta: f64) -> Result<Self> {
        let h = Self {
            alpha_lambda,
            beta_lambda,
            alpha_delta,
            beta_delta,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_lambda, self.beta_lambda, self.alpha_delta, self.beta_delta];
        if all.iter().all(|&v| v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("hyperprior parameters must be positive and finite: {all:?}")))
        }
    }
}

impl Default for HyperPrior {
    /// Weakly informative prior with shapes 1 and rates 1e-4.
    fn default() -> Self {
        Self {
            alpha_lambda: 1.0,
            beta_lambda: 1e-4,
            alpha_delta: 1.0,
            beta_delta: 1e-4,
        }
    }
}

/// Data, operators, constraint and hyperprior of a hierarchical model.
#[derive(Debug, Clone)]
pub struct HierarchicalModel<T: Real> {
    pub pair: ForwardPair<T>,
    pub b: DVector<T>,
    pub set: ConstraintSet<T>,
    pub hyper: HyperPrior,
}

impl<T: Real> HierarchicalModel<T> {
    /// The set must be the whole space, the nonnegative orthant or a
    /// polyhedral cone.
    pub fn new(pair: ForwardPair<T>, b: DVector<T>, set: ConstraintSet<T>, hyper: HyperPrior) -> Result<Self> {
        check_dim(pair.a.rows(), b.len())?;
        check_dim(pair.dim(), set.dim())?;
        hyper.validate()?;
        match set.kind() {
            SetKind::WholeSpace { .. } | SetKind::NonnegativeOrthant { .. } | SetKind::PolyhedralCone { .. } => {}
            _ => return Err(Error::InvalidSet("hierarchical sampling needs a polyhedral cone".into())),
        }
        Ok(Self { pair, b, set, hyper })
    }

    /// Number of observations.
    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Number of unknowns.
    pub fn n(&self) -> usize {
        self.pair.dim()
    }

    /// `(shape, rate)` of `λ | x`.
    pub fn lambda_conditional(&self, x: &DVector<T>) -> Result<(T, T)> {
        check_dim(self.n(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("x must be finite".into()));
        }
        let r = self.pair.a.apply(x) - &self.b;
        let shape = c::<T>(0.5 * self.m() as f64 + self.hyper.alpha_lambda);
        let rate = c::<T>(0.5) * r.norm_squared() + c::<T>(self.hyper.beta_lambda);
        Ok((shape, rate))
    }

    /// `(shape, rate)` of `δ | x`, with the dimension of the face of `x`.
    pub fn delta_conditional(&self, x: &DVector<T>) -> Result<(T, T)> {
        check_dim(self.n(), x.len())?;
        let face = self.set.face_of(x, self.set.default_tol(x))?;
        let lx = self.pair.l.apply(x);
        let shape = c::<T>(0.5 * face.face_dim as f64 + self.hyper.alpha_delta);
        let rate = c::<T>(0.5) * lx.norm_squared() + c::<T>(self.hyper.beta_delta);
        Ok((shape, rate))
    }
}

/// The same model without the constraint.
pub fn reduce_to_unconstrained<T: Real>(model: &HierarchicalModel<T>) -> HierarchicalModel<T> {
    HierarchicalModel {
        set: ConstraintSet::whole_space(model.n()),
        ..model.clone()
    }
}

fn draw_gamma<T: Real, R: Rng + ?Sized>((shape, rate): (T, T), rng: &mut R) -> Result<T> {
    if !(rate > T::zero()) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma rate must be positive and finite, got {rate}")));
    }
    Ok(T::gamma(shape, rate, rng))
}

pub fn sample_lambda<T: Real, R: Rng + ?Sized>(model: &HierarchicalModel<T>, x: &DVector<T>, rng: &mut R) -> Result<T> {
    draw_gamma(model.lambda_conditional(x)?, rng)
}

pub fn sample_delta<T: Real, R: Rng + ?Sized>(model: &HierarchicalModel<T>, x: &DVector<T>, rng: &mut R) -> Result<T> {
    draw_gamma(model.delta_conditional(x)?, rng)
}

/// Length, burn-in, thinning and random stream of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainOptions {
    pub k_max: usize,
    pub burn_in: usize,
    /// Keep `x` every `thin` sweeps; `λ`, `δ` and face dimensions are kept for all.
    pub thin: usize,
    pub seed: u64,
    /// Substream of `seed` used by this chain.
    pub chain_id: u64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            k_max: 15_000,
            burn_in: DEFAULT_BURN_IN,
            thin: 1,
            seed: 0,
            chain_id: 0,
        }
    }
}

/// Output of [`run_pchgs`]. Entry `k` of the scalar traces belongs to sweep
/// `k + 1`; `x_iterations` holds the sweep numbers of the stored samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T: Real> {
    pub x_samples: Vec<DVector<T>>,
    pub x_iterations: Vec<usize>,
    pub lambda_samples: Vec<T>,
    pub delta_samples: Vec<T>,
    pub face_dims: Vec<usize>,
    pub seed: u64,
    pub burn_in: usize,
}

impl<T: Real> Chain<T> {
    fn empty(options: &ChainOptions) -> Self {
        Self {
            x_samples: Vec::new(),
            x_iterations: Vec::new(),
            lambda_samples: Vec::new(),
            delta_samples: Vec::new(),
            face_dims: Vec::new(),
            seed: options.seed,
            burn_in: options.burn_in,
        }
    }

    /// Number of completed sweeps.
    pub fn len(&self) -> usize {
        self.lambda_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_samples.is_empty()
    }

    /// Stored `x` samples after burn-in.
    pub fn kept_x(&self) -> Vec<&DVector<T>> {
        self.x_samples
            .iter()
            .zip(&self.x_iterations)
            .filter(|(_, &k)| k > self.burn_in)
            .map(|(x, _)| x)
            .collect()
    }

    pub fn kept_lambda(&self) -> &[T] {
        &self.lambda_samples[self.burn_in.min(self.len())..]
    }

    pub fn kept_delta(&self) -> &[T] {
        &self.delta_samples[self.burn_in.min(self.len())..]
    }

    /// Columnar text: `iter,lambda,delta,face_dim,x0,x1,…`, one row per
    /// stored `x` sample. Floats use shortest round-trip formatting.
    pub fn write_delimited<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.x_samples.first().map_or(0, |x| x.len());
        write!(w, "iter,lambda,delta,face_dim")?;
        for i in 0..n {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for (x, &k) in self.x_samples.iter().zip(&self.x_iterations) {
            let j = k - 1;
            write!(
                w,
                "{k},{:?},{:?},{}",
                self.lambda_samples[j].as_f64(),
                self.delta_samples[j].as_f64(),
                self.face_dims[j]
            )?;
            for v in x.iter() {
                write!(w, ",{:?}", v.as_f64())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Hyperparameter traces only: `iter,lambda,delta,face_dim`.
    pub fn write_hyper_trace<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iter,lambda,delta,face_dim")?;
        for j in 0..self.len() {
            writeln!(
                w,
                "{},{:?},{:?},{}",
                j + 1,
                self.lambda_samples[j].as_f64(),
                self.delta_samples[j].as_f64(),
                self.face_dims[j]
            )?;
        }
        Ok(())
    }
}

/// A chain that stopped on an error, with every sweep completed before it.
#[derive(Debug, Error)]
#[error("chain aborted after {} sweeps: {source}", .chain.len())]
pub struct ChainAbort<T: Real> {
    pub chain: Chain<T>,
    pub source: Error,
}

/// Runs `options.k_max` sweeps from `x0` (default `Π(0)`), drawing from
/// substream `options.chain_id` of `options.seed`.
pub fn run_pchgs<T: Real>(
    model: &HierarchicalModel<T>,
    x0: Option<&DVector<T>>,
    options: &ChainOptions,
    cfg: &SolverConfig,
) -> std::result::Result<Chain<T>, Box<ChainAbort<T>>> {
    let mut chain = Chain::empty(options);
    let abort = |chain: Chain<T>, source: Error| Box::new(ChainAbort { chain, source });
    if options.thin == 0 {
        return Err(abort(chain, Error::InvalidParameter("thin must be at least 1".into())));
    }
    let mut x = match x0 {
        Some(x0) => {
            if let Err(e) = check_dim(model.n(), x0.len()) {
                return Err(abort(chain, e));
            }
            if !model.set.contains(x0, model.set.default_tol(x0)) {
                let v = model.set.violation(x0).map(|v| v.as_f64()).unwrap_or(f64::NAN);
                return Err(abort(chain, Error::OutsideSet(v)));
            }
            x0.clone()
        }
        None => match model.set.euclid_project(&DVector::zeros(model.n())) {
            Ok(x) => x,
            Err(e) => return Err(abort(chain, e)),
        },
    };
    let mut rng = substream(options.seed, options.chain_id);
    for k in 1..=options.k_max {
        let step = (|| -> Result<(T, T, DVector<T>, usize)> {
            let lambda = sample_lambda(model, &x, &mut rng)?;
            let delta = sample_delta(model, &x, &mut rng)?;
            let report = sample_projected_posterior(&model.pair, &model.b, lambda, delta, &model.set, &mut rng, cfg, Some(&x))?;
            let next = report.solution;
            let face = model.set.face_of(&next, model.set.default_tol(&next))?;
            Ok((lambda, delta, next, face.face_dim))
        })();
        match step {
            Ok((lambda, delta, next, face_dim)) => {
                x = next;
                chain.lambda_samples.push(lambda);
                chain.delta_samples.push(delta);
                chain.face_dims.push(face_dim);
                if k % options.thin == 0 {
                    chain.x_samples.push(x.clone());
                    chain.x_iterations.push(k);
                }
            }
            Err(e) => return Err(abort(chain, e)),
        }
    }
    Ok(chain)
}
