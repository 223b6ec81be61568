//! Projected FISTA for constrained least squares, the randomized
//! constrained least-squares sampler, and the oblique projector.
//!
//! Every objective handled here is a weighted sum of squared residuals
//! `½ Σⱼ wⱼ ‖Mⱼ x − dⱼ‖²` minimized over a [`ConstraintSet`]. The solver
//! tracks the images `Mⱼ x` of its iterates so that the momentum point, the
//! gradient and the objective all cost one forward and one adjoint
//! application per term and iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, SetKind};
use crate::error::{check_dim, Error, Result};
use crate::gaussian::Gaussian;
use crate::operator::LinearOperator;
use crate::rng::substream;
use crate::scalar::{c, Real};

/// Fraction of the inverse Lipschitz bound used as the fixed stepsize.
pub const STEP_FRACTION: f64 = 0.99;

/// Number of final iterations run without momentum.
pub const PLAIN_TAIL: usize = 5;

/// Iteration budget and stopping rule for [`fista_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop once the gradient-map norm drops to this value; `0` disables
    /// the check and always runs `max_iter` iterations.
    pub grad_tol: f64,
    /// Reset momentum whenever the objective increases.
    pub restart: bool,
    /// Start each sample from the previous one.
    pub warm_start: bool,
}

impl SolverConfig {
    /// Fixed budget of 100 iterations, used inside the Gibbs sampler.
    pub fn gibbs() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 0.0,
            restart: true,
            warm_start: true,
        }
    }

    /// Convergence-controlled solves for standalone projections.
    pub fn standalone() -> Self {
        Self {
            max_iter: 20_000,
            grad_tol: 1e-8,
            restart: true,
            warm_start: true,
        }
    }

    /// Tight tolerance, for cross-checks against closed forms.
    pub fn exact() -> Self {
        Self {
            max_iter: 100_000,
            grad_tol: 1e-12,
            restart: true,
            warm_start: true,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::gibbs()
    }
}

/// Outcome of a solve. `solution` is always the output of a projection and
/// hence a member of the set.
#[derive(Debug, Clone)]
pub struct SolverReport<T: Real> {
    pub solution: DVector<T>,
    pub iterations: usize,
    pub final_gradient_map_norm: T,
    pub objective: T,
    /// Objective after every iteration.
    pub objective_history: Vec<T>,
}

/// One weighted least-squares term `½ w ‖M x − d‖²`.
#[derive(Debug, Clone, Copy)]
pub struct LeastSquaresTerm<'a, T: Real> {
    pub weight: T,
    pub op: &'a LinearOperator<T>,
    pub target: &'a DVector<T>,
}

struct TermState<T> {
    img: Vec<T>,
    img_prev: Vec<T>,
    img_y: Vec<T>,
    adj: Vec<T>,
}

fn objective_of<T: Real>(terms: &[LeastSquaresTerm<'_, T>], states: &[TermState<T>]) -> T {
    let half = c::<T>(0.5);
    terms
        .iter()
        .zip(states)
        .map(|(t, s)| {
            let r: T = s.img.iter().zip(t.target.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
            half * t.weight * r
        })
        .sum()
}

/// Gradient `Σ wⱼ Mⱼᵀ (imgⱼ − dⱼ)` from the supplied images.
fn gradient_into<T: Real>(terms: &[LeastSquaresTerm<'_, T>], states: &mut [TermState<T>], use_y: bool, residual: &mut Vec<T>, grad: &mut [T]) {
    grad.iter_mut().for_each(|g| *g = T::zero());
    for (t, s) in terms.iter().zip(states.iter_mut()) {
        let img = if use_y { &s.img_y } else { &s.img };
        residual.clear();
        residual.extend(img.iter().zip(t.target.iter()).map(|(&a, &b)| a - b));
        t.op.apply_transpose_to(residual, &mut s.adj);
        for (g, &a) in grad.iter_mut().zip(&s.adj) {
            *g += t.weight * a;
        }
    }
}

/// Minimizes `½ Σⱼ wⱼ ‖Mⱼ x − dⱼ‖²` over `set` by FISTA with fixed stepsize
/// `0.99 / Σⱼ wⱼ ‖MⱼᵀMⱼ‖₂`.
///
/// Momentum is reset when the objective increases (if `cfg.restart`), and
/// the last [`PLAIN_TAIL`] iterations are plain projected gradient steps, so
/// the objective is non-increasing over that tail.
pub fn fista_minimize<T: Real>(terms: &[LeastSquaresTerm<'_, T>], set: &ConstraintSet<T>, x0: &DVector<T>, cfg: &SolverConfig) -> Result<SolverReport<T>> {
    let n = set.dim();
    check_dim(n, x0.len())?;
    for t in terms {
        check_dim(n, t.op.cols())?;
        check_dim(t.op.rows(), t.target.len())?;
    }
    if cfg.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    let lipschitz: T = terms.iter().map(|t| t.weight * t.op.opnorm_sq_estimate()).sum();
    let step = c::<T>(STEP_FRACTION) / lipschitz;
    if !(step > T::zero()) || !step.is_finite() {
        return Err(Error::InvalidStepsize(step.as_f64()));
    }
    let grad_tol = c::<T>(cfg.grad_tol);

    let mut x = x0.clone();
    set.euclid_project_in_place(x.as_mut_slice());
    let mut x_prev = x.clone();
    let mut y = DVector::zeros(n);
    let mut grad = vec![T::zero(); n];
    let mut probe = DVector::zeros(n);
    let mut residual = Vec::new();
    let mut states: Vec<TermState<T>> = terms
        .iter()
        .map(|t| {
            let mut img = vec![T::zero(); t.op.rows()];
            t.op.apply_to(x.as_slice(), &mut img);
            TermState {
                img_prev: img.clone(),
                img_y: img.clone(),
                img,
                adj: vec![T::zero(); n],
            }
        })
        .collect();
    let mut f_x = objective_of(terms, &states);
    if !f_x.is_finite() {
        return Err(Error::NonFiniteObjective(0));
    }

    // gradient-map norm ‖x − Π(x − s∇f(x))‖ / s at the current iterate
    let gradient_map = |x: &DVector<T>, states: &mut [TermState<T>], residual: &mut Vec<T>, grad: &mut [T], probe: &mut DVector<T>| {
        gradient_into(terms, states, false, residual, grad);
        for i in 0..n {
            probe[i] = x[i] - step * grad[i];
        }
        set.euclid_project_in_place(probe.as_mut_slice());
        (x - &*probe).norm() / step
    };

    let mut history = Vec::with_capacity(cfg.max_iter);
    let mut t_k = T::one();
    let mut iterations = 0;
    let mut last_gm = None;
    let tail_start = cfg.max_iter.saturating_sub(PLAIN_TAIL);
    for k in 1..=cfg.max_iter {
        iterations = k;
        let t_next = (T::one() + (T::one() + c::<T>(4.0) * t_k * t_k).sqrt()) * c::<T>(0.5);
        let beta = if k > tail_start { T::zero() } else { (t_k - T::one()) / t_next };
        t_k = t_next;

        for i in 0..n {
            y[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        for s in states.iter_mut() {
            for ((iy, &a), &b) in s.img_y.iter_mut().zip(&s.img).zip(&s.img_prev) {
                *iy = a + beta * (a - b);
            }
        }
        gradient_into(terms, &mut states, true, &mut residual, &mut grad);

        std::mem::swap(&mut x_prev, &mut x);
        for i in 0..n {
            x[i] = y[i] - step * grad[i];
        }
        set.euclid_project_in_place(x.as_mut_slice());
        for (t, s) in terms.iter().zip(states.iter_mut()) {
            std::mem::swap(&mut s.img_prev, &mut s.img);
            t.op.apply_to(x.as_slice(), &mut s.img);
        }
        let f_new = objective_of(terms, &states);
        if !f_new.is_finite() {
            return Err(Error::NonFiniteObjective(k));
        }
        if cfg.restart && f_new > f_x {
            t_k = T::one();
        }
        f_x = f_new;
        history.push(f_new);

        if grad_tol > T::zero() {
            let gm = gradient_map(&x, &mut states, &mut residual, &mut grad, &mut probe);
            last_gm = Some(gm);
            if gm <= grad_tol {
                break;
            }
        }
    }
    let final_gm = match last_gm {
        Some(gm) => gm,
        None => gradient_map(&x, &mut states, &mut residual, &mut grad, &mut probe),
    };
    Ok(SolverReport {
        solution: x,
        iterations,
        final_gradient_map_norm: final_gm,
        objective: f_x,
        objective_history: history,
    })
}

/// A forward operator `A` and prior operator `L` whose combination
/// `λAᵀA + δLᵀL` is positive definite for every `λ, δ > 0`.
#[derive(Debug, Clone)]
pub struct ForwardPair<T: Real> {
    pub a: LinearOperator<T>,
    pub l: LinearOperator<T>,
}

impl<T: Real> ForwardPair<T> {
    /// Validates the pair. The positive-definiteness check is a dense
    /// Cholesky of `AᵀA + LᵀL` up to `dense_threshold` unknowns and a
    /// shifted power iteration beyond.
    pub fn new(a: LinearOperator<T>, l: LinearOperator<T>, dense_threshold: usize) -> Result<Self> {
        check_dim(a.cols(), l.cols())?;
        let n = a.cols();
        if n <= dense_threshold {
            let m = a.normal_matrix() + l.normal_matrix();
            let m = (&m + m.transpose()) * c::<T>(0.5);
            let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
            let diag = chol.l().diagonal();
            let (lo, hi) = (diag.min(), diag.max());
            if !(lo > c::<T>(1e-7) * hi) {
                return Err(Error::NotPositiveDefinite);
            }
        } else if smallest_eigen_estimate(&a, &l) <= T::zero() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { a, l })
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }
}

/// Smallest eigenvalue of `AᵀA + LᵀL` by power iteration on the shifted
/// operator `σI − (AᵀA + LᵀL)`.
fn smallest_eigen_estimate<T: Real>(a: &LinearOperator<T>, l: &LinearOperator<T>) -> T {
    let n = a.cols();
    let sigma = a.opnorm_sq_estimate() + l.opnorm_sq_estimate();
    let mut v = DVector::from_fn(n, |i, _| c::<T>(1.0 + ((i * 31 % 17) as f64) / 17.0));
    let mut top = T::zero();
    for _ in 0..500 {
        v /= v.norm();
        let mv = a.apply_transpose(&a.apply(&v)) + l.apply_transpose(&l.apply(&v));
        let w = &v * sigma - mv;
        top = v.dot(&w);
        v = w;
    }
    sigma - top
}

/// The randomized constrained least-squares problem
/// `argmin_{x ∈ C} λ/2 ‖Ax − b̂‖² + δ/2 ‖Lx − ĉ‖²`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem<'a, T: Real> {
    pub pair: &'a ForwardPair<T>,
    pub b_hat: DVector<T>,
    pub c_hat: DVector<T>,
    pub lambda: T,
    pub delta: T,
    pub set: &'a ConstraintSet<T>,
}

impl<'a, T: Real> QuadraticProblem<'a, T> {
    pub fn new(pair: &'a ForwardPair<T>, b_hat: DVector<T>, c_hat: DVector<T>, lambda: T, delta: T, set: &'a ConstraintSet<T>) -> Result<Self> {
        check_dim(pair.a.rows(), b_hat.len())?;
        check_dim(pair.l.rows(), c_hat.len())?;
        check_dim(pair.dim(), set.dim())?;
        if !(lambda > T::zero()) || !(delta > T::zero()) {
            return Err(Error::InvalidParameter("lambda and delta must be positive".into()));
        }
        Ok(Self {
            pair,
            b_hat,
            c_hat,
            lambda,
            delta,
            set,
        })
    }

    pub fn terms(&self) -> [LeastSquaresTerm<'_, T>; 2] {
        [
            LeastSquaresTerm {
                weight: self.lambda,
                op: &self.pair.a,
                target: &self.b_hat,
            },
            LeastSquaresTerm {
                weight: self.delta,
                op: &self.pair.l,
                target: &self.c_hat,
            },
        ]
    }

    pub fn objective(&self, x: &DVector<T>) -> T {
        let ra = self.pair.a.apply(x) - &self.b_hat;
        let rl = self.pair.l.apply(x) - &self.c_hat;
        c::<T>(0.5) * (self.lambda * ra.norm_squared() + self.delta * rl.norm_squared())
    }
}

/// Solves a [`QuadraticProblem`] by projected FISTA from `x0`.
pub fn fista_solve<T: Real>(problem: &QuadraticProblem<'_, T>, x0: &DVector<T>, cfg: &SolverConfig) -> Result<SolverReport<T>> {
    fista_minimize(&problem.terms(), problem.set, x0, cfg)
}

/// One sample of the obliquely projected posterior: perturbs the data
/// `b̂ ~ N(b, λ⁻¹I)`, `ĉ ~ N(0, δ⁻¹I)` and solves the constrained least
/// squares problem. With `cfg.warm_start` the solve starts from `warm`
/// (projected onto the set), otherwise from `Π(0)`.
#[allow(clippy::too_many_arguments)]
pub fn sample_projected_posterior<T: Real, R: Rng + ?Sized>(
    pair: &ForwardPair<T>,
    b: &DVector<T>,
    lambda: T,
    delta: T,
    set: &ConstraintSet<T>,
    rng: &mut R,
    cfg: &SolverConfig,
    warm: Option<&DVector<T>>,
) -> Result<SolverReport<T>> {
    check_dim(pair.a.rows(), b.len())?;
    if !(lambda > T::zero()) || !(delta > T::zero()) {
        return Err(Error::InvalidParameter("lambda and delta must be positive".into()));
    }
    let noise_sd = T::one() / lambda.sqrt();
    let prior_sd = T::one() / delta.sqrt();
    let b_hat = DVector::from_fn(b.len(), |i, _| b[i] + noise_sd * T::standard_normal(rng));
    let c_hat = DVector::from_fn(pair.l.rows(), |_, _| prior_sd * T::standard_normal(rng));
    let problem = QuadraticProblem::new(pair, b_hat, c_hat, lambda, delta, set)?;
    let x0 = match warm {
        Some(w) if cfg.warm_start => set.euclid_project(w)?,
        _ => set.euclid_project(&DVector::zeros(pair.dim()))?,
    };
    fista_solve(&problem, &x0, cfg)
}

/// `n_samples` independent draws of [`sample_projected_posterior`] at fixed
/// `λ, δ`. Draw `i` uses substream `i` of `seed` and starts from `Π(0)`, so
/// the output does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn sample_projected_batch<T: Real>(
    pair: &ForwardPair<T>,
    b: &DVector<T>,
    lambda: T,
    delta: T,
    set: &ConstraintSet<T>,
    n_samples: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Vec<DVector<T>>> {
    let cold = SolverConfig { warm_start: false, ..*cfg };
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            sample_projected_posterior(pair, b, lambda, delta, set, &mut rng, &cold, None).map(|r| r.solution)
        })
        .collect()
}

/// Oblique projection onto a set in the metric of a Gaussian's precision:
/// `argmin_{z ∈ C} ½ ‖x − z‖²_{Σ⁻¹}`.
///
/// Halfspaces, discs and quarter discs are solved in closed or
/// semi-closed form; other sets go through [`fista_minimize`] on
/// `½ ‖Pᵀz − Pᵀx‖²` with `PPᵀ = Σ⁻¹`.
#[derive(Debug, Clone)]
pub struct ObliqueProjector<T: Real> {
    gaussian: Gaussian<T>,
    set: ConstraintSet<T>,
    metric: LinearOperator<T>,
    cfg: SolverConfig,
}

impl<T: Real> ObliqueProjector<T> {
    pub fn new(gaussian: &Gaussian<T>, set: &ConstraintSet<T>, cfg: SolverConfig) -> Result<Self> {
        check_dim(gaussian.dim(), set.dim())?;
        let metric = LinearOperator::dense("precision factor", gaussian.prec_chol().transpose());
        Ok(Self {
            gaussian: gaussian.clone(),
            set: set.clone(),
            metric,
            cfg,
        })
    }

    pub fn gaussian(&self) -> &Gaussian<T> {
        &self.gaussian
    }

    pub fn set(&self) -> &ConstraintSet<T> {
        &self.set
    }

    /// `‖x − z‖²_{Σ⁻¹}`.
    pub fn distance_sq(&self, x: &DVector<T>, z: &DVector<T>) -> T {
        (self.metric.apply(&(x - z))).norm_squared()
    }

    pub fn project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.set.dim(), x.len())?;
        if self.set.is_whole_space() || self.set.contains(x, T::zero()) {
            return Ok(x.clone());
        }
        match self.set.kind() {
            SetKind::Halfspace { normal, offset } => Ok(self.project_halfspace(normal, *offset, x)),
            SetKind::Ball2D { radius, center } => Ok(self.project_disc(center, *radius, x)),
            SetKind::QuarterDisc { radius } => Ok(self.project_quarter_disc(*radius, x)),
            _ => self.project_iterative(x),
        }
    }

    /// Always uses the iterative solver, whatever the set.
    pub fn project_iterative(&self, x: &DVector<T>) -> Result<DVector<T>> {
        let target = self.metric.apply(x);
        let term = LeastSquaresTerm {
            weight: T::one(),
            op: &self.metric,
            target: &target,
        };
        let x0 = self.set.euclid_project(x)?;
        Ok(fista_minimize(&[term], &self.set, &x0, &self.cfg)?.solution)
    }

    /// `z = x − max(0, aᵀx − b) / (aᵀΣa) · Σa`.
    fn project_halfspace(&self, a: &DVector<T>, b: T, x: &DVector<T>) -> DVector<T> {
        let excess = a.dot(x) - b;
        if excess <= T::zero() {
            return x.clone();
        }
        let sa = self.gaussian.apply_covariance(a);
        x - &sa * (excess / a.dot(&sa))
    }

    /// Disc of radius `r` around `center`: `z − center = (Q + νI)⁻¹ Q (x − center)`
    /// with `ν ≥ 0` fixed by `‖z − center‖ = r`, `Q = Σ⁻¹`.
    fn project_disc(&self, center: &DVector<T>, r: T, x: &DVector<T>) -> DVector<T> {
        let d = x - center;
        if d.norm() <= r {
            return x.clone();
        }
        let eig = SymmetricEigen::new(self.gaussian.precision());
        let q = eig.eigenvalues.clone();
        let p = eig.eigenvectors.transpose() * &d;
        let norm_at = |nu: T| -> T {
            q.iter()
                .zip(p.iter())
                .map(|(&qi, &pi)| {
                    let w = qi * pi / (qi + nu);
                    w * w
                })
                .sum::<T>()
                .sqrt()
        };
        // ‖w(ν)‖ decreases from ‖d‖ > r to 0; bracket then bisect with secant steps
        let mut lo = T::zero();
        let mut hi = q.max() * d.norm() / r;
        while norm_at(hi) > r {
            hi *= c::<T>(2.0);
        }
        for _ in 0..200 {
            let mid = (lo + hi) * c::<T>(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_at(mid) > r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let nu = (lo + hi) * c::<T>(0.5);
        let w = DVector::from_fn(q.len(), |i, _| q[i] * p[i] / (q[i] + nu));
        let w = &eig.eigenvectors * w;
        center + &w * (r / w.norm())
    }

    /// Enumerates the KKT candidates of every face (interior, both edges,
    /// the arc, the three corners) and keeps the closest feasible one.
    fn project_quarter_disc(&self, r: T, x: &DVector<T>) -> DVector<T> {
        let q = self.gaussian.precision();
        let zero = T::zero();
        let mut candidates = vec![
            DVector::from_vec(vec![zero, zero]),
            DVector::from_vec(vec![r, zero]),
            DVector::from_vec(vec![zero, r]),
        ];
        let t_bottom = x[0] + q[(0, 1)] * x[1] / q[(0, 0)];
        if t_bottom > zero && t_bottom < r {
            candidates.push(DVector::from_vec(vec![t_bottom, zero]));
        }
        let t_left = x[1] + q[(0, 1)] * x[0] / q[(1, 1)];
        if t_left > zero && t_left < r {
            candidates.push(DVector::from_vec(vec![zero, t_left]));
        }
        let arc = self.project_disc(&DVector::zeros(2), r, x);
        if arc[0] > zero && arc[1] > zero {
            candidates.push(arc);
        }
        candidates
            .into_iter()
            .map(|z| (self.distance_sq(x, &z), z))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(_, z)| z)
            .expect("corners are always candidates")
    }
}

/// Oblique projection of `x` onto `set` in the precision metric of `g`.
pub fn oblique_project<T: Real>(g: &Gaussian<T>, set: &ConstraintSet<T>, x: &DVector<T>, cfg: &SolverConfig) -> Result<DVector<T>> {
    ObliqueProjector::new(g, set, *cfg)?.project(x)
}

/// Dense posterior `N(Q⁻¹ λAᵀb, Q⁻¹)` with `Q = λAᵀA + δLᵀL`.
pub fn dense_posterior<T: Real>(pair: &ForwardPair<T>, b: &DVector<T>, lambda: T, delta: T) -> Result<Gaussian<T>> {
    let q: DMatrix<T> = pair.a.normal_matrix() * lambda + pair.l.normal_matrix() * delta;
    let rhs = pair.a.apply_transpose(b) * lambda;
    let chol = q.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mean = chol.solve(&rhs);
    Gaussian::from_precision(mean, q)
}
