//! Closed convex constraint sets: Euclidean projection, faces and normal cones.
//!
//! Polyhedral sets are described in halfspace form `gᵢᵀx ≤ hᵢ`. The
//! constraint order is fixed per variant and defines the layout of
//! [`FaceId::active`]:
//!
//! | variant | constraints |
//! |---|---|
//! | `WholeSpace` | none |
//! | `Halfspace` | `aᵀx ≤ b` |
//! | `Box` | `−xᵢ ≤ −loᵢ`, `xᵢ ≤ hiᵢ`, interleaved per coordinate |
//! | `NonnegativeOrthant` | `−xᵢ ≤ 0` |
//! | `PolyhedralCone` | `aᵢᵀx ≤ 0` |
//! | `Ball2D` | `‖x − center‖ ≤ radius` |
//! | `QuarterDisc` | `−x₁ ≤ 0`, `−x₂ ≤ 0`, `‖x‖ ≤ radius` |

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{c, Real};

/// Relative singular-value threshold for ranks of active normals.
const RANK_TOL: f64 = 1e-10;

/// The supported set geometries.
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind<T: Real> {
    WholeSpace {
        dim: usize,
    },
    Halfspace {
        normal: DVector<T>,
        offset: T,
    },
    Box {
        lo: DVector<T>,
        hi: DVector<T>,
    },
    NonnegativeOrthant {
        dim: usize,
    },
    PolyhedralCone {
        dim: usize,
        normals: Vec<DVector<T>>,
    },
    Ball2D {
        radius: T,
        center: DVector<T>,
    },
    /// `{x ∈ ℝ² : x ≥ 0, ‖x‖ ≤ radius}`.
    QuarterDisc {
        radius: T,
    },
}

/// A non-empty closed convex set. Build through the validating constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<T: Real> {
    kind: SetKind<T>,
}

/// The smallest face containing a point, identified by its active constraints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceId {
    pub active: Vec<bool>,
    pub face_dim: usize,
}

impl FaceId {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

impl<T: Real> ConstraintSet<T> {
    pub fn whole_space(dim: usize) -> Self {
        Self {
            kind: SetKind::WholeSpace { dim },
        }
    }

    pub fn halfspace(normal: DVector<T>, offset: T) -> Result<Self> {
        if normal.iter().all(|&v| v == T::zero()) || normal.is_empty() {
            return Err(Error::InvalidSet("halfspace normal must be nonzero".into()));
        }
        Ok(Self {
            kind: SetKind::Halfspace { normal, offset },
        })
    }

    pub fn boxed(lo: DVector<T>, hi: DVector<T>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidSet("box requires lo <= hi componentwise".into()));
        }
        Ok(Self { kind: SetKind::Box { lo, hi } })
    }

    /// `[lo, hi]ⁿ`.
    pub fn uniform_box(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::boxed(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    pub fn nonnegative_orthant(dim: usize) -> Self {
        Self {
            kind: SetKind::NonnegativeOrthant { dim },
        }
    }

    /// `{x : aᵢᵀx ≤ 0 for all i}`.
    pub fn polyhedral_cone(dim: usize, normals: Vec<DVector<T>>) -> Result<Self> {
        for a in &normals {
            check_dim(dim, a.len())?;
            if a.iter().all(|&v| v == T::zero()) {
                return Err(Error::InvalidSet("cone normals must be nonzero".into()));
            }
        }
        Ok(Self {
            kind: SetKind::PolyhedralCone { dim, normals },
        })
    }

    pub fn ball2d(radius: T, center: DVector<T>) -> Result<Self> {
        check_dim(2, center.len())?;
        if !(radius > T::zero()) {
            return Err(Error::InvalidSet("ball radius must be positive".into()));
        }
        Ok(Self {
            kind: SetKind::Ball2D { radius, center },
        })
    }

    pub fn quarter_disc(radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidSet("quarter disc radius must be positive".into()));
        }
        Ok(Self {
            kind: SetKind::QuarterDisc { radius },
        })
    }

    pub fn kind(&self) -> &SetKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::WholeSpace { dim } | SetKind::NonnegativeOrthant { dim } | SetKind::PolyhedralCone { dim, .. } => *dim,
            SetKind::Halfspace { normal, .. } => normal.len(),
            SetKind::Box { lo, .. } => lo.len(),
            SetKind::Ball2D { .. } | SetKind::QuarterDisc { .. } => 2,
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self.kind, SetKind::WholeSpace { .. })
    }

    /// Whether the set is an intersection of finitely many halfspaces.
    pub fn is_polyhedral(&self) -> bool {
        !matches!(self.kind, SetKind::Ball2D { .. } | SetKind::QuarterDisc { .. })
    }

    /// Whether the set is a polyhedral cone with apex at the origin.
    pub fn is_cone(&self) -> bool {
        matches!(
            self.kind,
            SetKind::WholeSpace { .. } | SetKind::NonnegativeOrthant { .. } | SetKind::PolyhedralCone { .. }
        )
    }

    /// Whether the set's projection is a componentwise clamp, making faces
    /// of projected points exact.
    pub fn is_clamp_type(&self) -> bool {
        matches!(self.kind, SetKind::WholeSpace { .. } | SetKind::NonnegativeOrthant { .. } | SetKind::Box { .. })
    }

    /// Number of constraints, i.e. the length of [`FaceId::active`].
    pub fn constraint_count(&self) -> usize {
        match &self.kind {
            SetKind::WholeSpace { .. } => 0,
            SetKind::Halfspace { .. } | SetKind::Ball2D { .. } => 1,
            SetKind::Box { lo, .. } => 2 * lo.len(),
            SetKind::NonnegativeOrthant { dim } => *dim,
            SetKind::PolyhedralCone { normals, .. } => normals.len(),
            SetKind::QuarterDisc { .. } => 3,
        }
    }

    /// Halfspace description `(g, h)` with `gᵀx ≤ h`, for polyhedral sets.
    pub fn linear_constraints(&self) -> Option<Vec<(DVector<T>, T)>> {
        let n = self.dim();
        let unit = |i: usize, s: T| {
            let mut e = DVector::zeros(n);
            e[i] = s;
            e
        };
        match &self.kind {
            SetKind::WholeSpace { .. } => Some(Vec::new()),
            SetKind::Halfspace { normal, offset } => Some(vec![(normal.clone(), *offset)]),
            SetKind::Box { lo, hi } => Some((0..n).flat_map(|i| [(unit(i, -T::one()), -lo[i]), (unit(i, T::one()), hi[i])]).collect()),
            SetKind::NonnegativeOrthant { .. } => Some((0..n).map(|i| (unit(i, -T::one()), T::zero())).collect()),
            SetKind::PolyhedralCone { normals, .. } => Some(normals.iter().map(|a| (a.clone(), T::zero())).collect()),
            SetKind::Ball2D { .. } | SetKind::QuarterDisc { .. } => None,
        }
    }

    /// Signed constraint residuals `gᵢᵀx − hᵢ` (`‖x−c‖ − r` for discs).
    pub fn residuals(&self, x: &DVector<T>) -> Result<Vec<T>> {
        check_dim(self.dim(), x.len())?;
        Ok(match &self.kind {
            SetKind::WholeSpace { .. } => Vec::new(),
            SetKind::Halfspace { normal, offset } => vec![normal.dot(x) - *offset],
            SetKind::Box { lo, hi } => (0..x.len()).flat_map(|i| [lo[i] - x[i], x[i] - hi[i]]).collect(),
            SetKind::NonnegativeOrthant { .. } => x.iter().map(|&v| -v).collect(),
            SetKind::PolyhedralCone { normals, .. } => normals.iter().map(|a| a.dot(x)).collect(),
            SetKind::Ball2D { radius, center } => vec![(x - center).norm() - *radius],
            SetKind::QuarterDisc { radius } => vec![-x[0], -x[1], x.norm() - *radius],
        })
    }

    /// Largest constraint violation (zero inside the set).
    pub fn violation(&self, x: &DVector<T>) -> Result<T> {
        Ok(self.residuals(x)?.into_iter().fold(T::zero(), |m, r| m.max(r)))
    }

    pub fn contains(&self, x: &DVector<T>, tol: T) -> bool {
        self.violation(x).map(|v| v <= tol).unwrap_or(false)
    }

    /// Activity tolerance suited to points produced by [`Self::euclid_project`]
    /// or the solver: zero for clamp-type sets, `1e-9·(1 + ‖x‖∞)` otherwise.
    pub fn default_tol(&self, x: &DVector<T>) -> T {
        if self.is_clamp_type() {
            T::zero()
        } else {
            c::<T>(1e-9) * (T::one() + x.amax())
        }
    }

    /// Dimension of the affine hull of the set.
    ///
    /// Polyhedral cones are assumed full-dimensional.
    pub fn affine_dim(&self) -> usize {
        match &self.kind {
            SetKind::Box { lo, hi } => lo.iter().zip(hi.iter()).filter(|(l, h)| l < h).count(),
            _ => self.dim(),
        }
    }

    /// Euclidean projection `argmin_{z ∈ C} ‖z − x‖₂`.
    pub fn euclid_project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim(self.dim(), x.len())?;
        let mut z = x.clone();
        self.euclid_project_in_place(z.as_mut_slice());
        Ok(z)
    }

    /// In-place Euclidean projection; `x.len()` must equal [`Self::dim`].
    pub fn euclid_project_in_place(&self, x: &mut [T]) {
        match &self.kind {
            SetKind::WholeSpace { .. } => {}
            SetKind::Halfspace { normal, offset } => {
                let ax: T = normal.iter().zip(x.iter()).map(|(&a, &v)| a * v).sum();
                let excess = ax - *offset;
                if excess > T::zero() {
                    let scale = excess / normal.norm_squared();
                    for (v, &a) in x.iter_mut().zip(normal.iter()) {
                        *v -= scale * a;
                    }
                }
            }
            SetKind::Box { lo, hi } => {
                for (i, v) in x.iter_mut().enumerate() {
                    *v = v.max(lo[i]).min(hi[i]);
                }
            }
            SetKind::NonnegativeOrthant { .. } => {
                for v in x.iter_mut() {
                    *v = v.max(T::zero());
                }
            }
            SetKind::PolyhedralCone { normals, .. } => {
                let y = DVector::from_column_slice(x);
                let z = project_polyhedral_cone(normals, &y);
                x.copy_from_slice(z.as_slice());
            }
            SetKind::Ball2D { radius, center } => {
                let d0 = x[0] - center[0];
                let d1 = x[1] - center[1];
                let norm = (d0 * d0 + d1 * d1).sqrt();
                if norm > *radius {
                    x[0] = center[0] + *radius * d0 / norm;
                    x[1] = center[1] + *radius * d1 / norm;
                }
            }
            SetKind::QuarterDisc { radius } => {
                // orthant clamp then radial scaling is exact for a ball centred at the apex
                x[0] = x[0].max(T::zero());
                x[1] = x[1].max(T::zero());
                let norm = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if norm > *radius {
                    x[0] = *radius * x[0] / norm;
                    x[1] = *radius * x[1] / norm;
                }
            }
        }
    }

    /// Smallest face containing `x`. Constraints with `|residual| ≤ tol`
    /// are active.
    pub fn face_of(&self, x: &DVector<T>, tol: T) -> Result<FaceId> {
        let residuals = self.residuals(x)?;
        let violation = residuals.iter().fold(T::zero(), |m, &r| m.max(r));
        if violation > tol {
            return Err(Error::OutsideSet(violation.as_f64()));
        }
        let active: Vec<bool> = residuals.iter().map(|r| r.abs() <= tol).collect();
        let face_dim = self.face_dim(&active);
        Ok(FaceId { active, face_dim })
    }

    fn face_dim(&self, active: &[bool]) -> usize {
        let n = self.dim();
        match &self.kind {
            SetKind::WholeSpace { .. } => n,
            SetKind::Halfspace { .. } | SetKind::Ball2D { .. } => n - usize::from(active[0]),
            SetKind::NonnegativeOrthant { .. } => active.iter().filter(|&&a| !a).count(),
            SetKind::Box { .. } => (0..n).filter(|&i| !active[2 * i] && !active[2 * i + 1]).count(),
            SetKind::PolyhedralCone { normals, .. } => {
                let rows: Vec<_> = normals.iter().zip(active).filter(|(_, &a)| a).map(|(g, _)| g.transpose()).collect();
                if rows.is_empty() {
                    n
                } else {
                    n - numerical_rank(&DMatrix::from_rows(&rows))
                }
            }
            SetKind::QuarterDisc { .. } => 2usize.saturating_sub(active.iter().filter(|&&a| a).count()),
        }
    }

    /// Generators of the normal cone on the relative interior of `face`:
    /// outward normals of its active constraints, so that `aᵀ(y − z) ≤ 0`
    /// for every `y` in the set. For the curved sets the boundary normal
    /// depends on the location, which is read from `point`.
    pub fn normal_cone_generators(&self, face: &FaceId, point: &DVector<T>) -> Result<Vec<DVector<T>>> {
        check_dim(self.constraint_count(), face.active.len())?;
        check_dim(self.dim(), point.len())?;
        let active = |i: usize| face.active[i];
        Ok(match &self.kind {
            SetKind::Ball2D { center, .. } => {
                if active(0) {
                    let d = point - center;
                    vec![&d / d.norm()]
                } else {
                    Vec::new()
                }
            }
            SetKind::QuarterDisc { .. } => {
                let mut gens = Vec::new();
                if active(0) {
                    gens.push(DVector::from_vec(vec![-T::one(), T::zero()]));
                }
                if active(1) {
                    gens.push(DVector::from_vec(vec![T::zero(), -T::one()]));
                }
                if active(2) {
                    gens.push(point / point.norm());
                }
                gens
            }
            _ => self
                .linear_constraints()
                .expect("polyhedral")
                .into_iter()
                .enumerate()
                .filter(|&(i, _)| active(i))
                .map(|(_, (g, _))| g)
                .collect(),
        })
    }
}

/// Numerical rank with threshold `RANK_TOL · σ_max`.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max <= T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > c::<T>(RANK_TOL) * max).count()
}

/// Euclidean projection onto `{x : aᵢᵀx ≤ 0}` by Moreau decomposition:
/// `x = y − Gᵀν` with `ν = argmin_{ν ≥ 0} ‖Gᵀν − y‖`.
fn project_polyhedral_cone<T: Real>(normals: &[DVector<T>], y: &DVector<T>) -> DVector<T> {
    if normals.is_empty() {
        return y.clone();
    }
    let e = DMatrix::from_columns(normals);
    let nu = nnls(&e, y);
    y - e * nu
}

/// Lawson–Hanson active-set solver for `min ‖E ν − y‖ s.t. ν ≥ 0`.
pub fn nnls<T: Real>(e: &DMatrix<T>, y: &DVector<T>) -> DVector<T> {
    let (m, k) = e.shape();
    let tol = c::<T>(10.0) * T::epsilon() * e.norm() * c::<T>(m.max(k) as f64);
    let mut nu = DVector::<T>::zeros(k);
    let mut passive = vec![false; k];
    let max_outer = 3 * k + 10;

    let solve_passive = |passive: &[bool]| -> DVector<T> {
        let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
        let mut s = DVector::zeros(k);
        if idx.is_empty() {
            return s;
        }
        let cols: Vec<_> = idx.iter().map(|&j| e.column(j).into_owned()).collect();
        let sub = DMatrix::from_columns(&cols);
        let sol = sub.svd(true, true).solve(y, T::epsilon()).expect("svd computed with both factors");
        for (t, &j) in idx.iter().enumerate() {
            s[j] = sol[t];
        }
        s
    };

    for _ in 0..max_outer {
        let w = e.transpose() * (y - e * &nu);
        let candidate = (0..k)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;
        loop {
            let s = solve_passive(&passive);
            if (0..k).filter(|&i| passive[i]).all(|i| s[i] > tol) {
                nu = s;
                break;
            }
            let mut alpha = T::one();
            for i in (0..k).filter(|&i| passive[i] && s[i] <= tol) {
                let denom = nu[i] - s[i];
                if denom > T::zero() {
                    alpha = alpha.min(nu[i] / denom);
                }
            }
            nu += (&s - &nu) * alpha;
            let mut removed = false;
            for i in 0..k {
                if passive[i] && nu[i] <= tol {
                    passive[i] = false;
                    nu[i] = T::zero();
                    removed = true;
                }
            }
            if !removed {
                // guard against cycling on degenerate steps
                nu = s.map(|v| v.max(T::zero()));
                break;
            }
        }
    }
    nu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::testing::random_vector;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn constructors_validate() {
        assert!(ConstraintSet::halfspace(v(&[0.0, 0.0]), 1.0).is_err());
        assert!(ConstraintSet::boxed(v(&[0.0, 1.0]), v(&[1.0, 0.5])).is_err());
        assert!(ConstraintSet::boxed(v(&[0.5]), v(&[0.5])).is_ok());
        assert!(ConstraintSet::ball2d(0.0, v(&[0.0, 0.0])).is_err());
        assert!(ConstraintSet::ball2d(1.0, v(&[0.0, 0.0, 0.0])).is_err());
        assert!(ConstraintSet::polyhedral_cone(2, vec![v(&[0.0, 0.0])]).is_err());
    }

    #[test]
    fn euclid_projection_examples() {
        let orthant = ConstraintSet::nonnegative_orthant(2);
        assert_eq!(orthant.euclid_project(&v(&[-1.0, 2.0])).unwrap(), v(&[0.0, 2.0]));
        let unit_box = ConstraintSet::uniform_box(2, 0.0, 1.0).unwrap();
        assert_eq!(unit_box.euclid_project(&v(&[1.5, 0.5])).unwrap(), v(&[1.0, 0.5]));
        let half = ConstraintSet::halfspace(v(&[1.0, 0.0]), 0.0).unwrap();
        assert_eq!(half.euclid_project(&v(&[2.0, 3.0])).unwrap(), v(&[0.0, 3.0]));
        assert!(matches!(orthant.euclid_project(&v(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn halfspace_projection_matches_closed_form() {
        let a = v(&[1.0, 2.0, -1.0]);
        let half = ConstraintSet::halfspace(a.clone(), 0.5).unwrap();
        let x = v(&[3.0, 1.0, 0.0]);
        let excess: f64 = a.dot(&x) - 0.5;
        let expected = &x - &a * (excess / a.norm_squared());
        assert!((half.euclid_project(&x).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn face_examples() {
        let orthant = ConstraintSet::nonnegative_orthant(3);
        assert_eq!(orthant.face_of(&v(&[0.0, 0.0, 0.0]), 0.0).unwrap().face_dim, 0);
        assert_eq!(orthant.face_of(&v(&[1.0, 0.0, 2.0]), 0.0).unwrap().face_dim, 2);
        let unit_box = ConstraintSet::uniform_box(2, 0.0, 1.0).unwrap();
        assert_eq!(unit_box.face_of(&v(&[1.0, 0.3]), 0.0).unwrap().face_dim, 1);
        assert!(matches!(orthant.face_of(&v(&[-0.1, 0.0, 0.0]), 0.0), Err(Error::OutsideSet(_))));
        // pinned coordinate: both bounds active, still one lost dimension
        let pinned = ConstraintSet::boxed(v(&[0.0, 0.5]), v(&[1.0, 0.5])).unwrap();
        let face = pinned.face_of(&v(&[0.3, 0.5]), 0.0).unwrap();
        assert_eq!(face.face_dim, 1);
        assert_eq!(pinned.affine_dim(), 1);
        let whole = ConstraintSet::<f64>::whole_space(4);
        assert_eq!(whole.face_of(&v(&[1.0, 2.0, 3.0, 4.0]), 0.0).unwrap().face_dim, 4);
    }

    #[test]
    fn cone_face_dimension_uses_rank() {
        // three normals in the plane x₃ = free, two of them dependent on the apex ray
        let cone = ConstraintSet::polyhedral_cone(3, vec![v(&[-1.0, 0.0, 0.0]), v(&[0.0, -1.0, 0.0]), v(&[-1.0, -1.0, 0.0])]).unwrap();
        let face = cone.face_of(&v(&[0.0, 0.0, 5.0]), 1e-12).unwrap();
        assert_eq!(face.active_count(), 3);
        assert_eq!(face.face_dim, 1);
        let face = cone.face_of(&v(&[0.0, 2.0, 5.0]), 1e-12).unwrap();
        assert_eq!(face.face_dim, 2);
    }

    #[test]
    fn normal_cone_examples() {
        let orthant = ConstraintSet::nonnegative_orthant(2);
        let p = v(&[0.0, 1.0]);
        let face = orthant.face_of(&p, 0.0).unwrap();
        assert_eq!(orthant.normal_cone_generators(&face, &p).unwrap(), vec![v(&[-1.0, 0.0])]);
        let apex = v(&[0.0, 0.0]);
        let face = orthant.face_of(&apex, 0.0).unwrap();
        assert_eq!(orthant.normal_cone_generators(&face, &apex).unwrap(), vec![v(&[-1.0, 0.0]), v(&[0.0, -1.0])]);
        let unit = ConstraintSet::uniform_box(1, 0.0, 1.0).unwrap();
        let top = v(&[1.0]);
        let face = unit.face_of(&top, 0.0).unwrap();
        assert_eq!(unit.normal_cone_generators(&face, &top).unwrap(), vec![v(&[1.0])]);
        let whole = ConstraintSet::<f64>::whole_space(2);
        let face = whole.face_of(&apex, 0.0).unwrap();
        assert!(whole.normal_cone_generators(&face, &apex).unwrap().is_empty());
        let ball = ConstraintSet::ball2d(2.0, v(&[1.0, 0.0])).unwrap();
        let b = v(&[1.0, 2.0]);
        let face = ball.face_of(&b, 1e-12).unwrap();
        assert_eq!(face.face_dim, 1);
        assert_eq!(ball.normal_cone_generators(&face, &b).unwrap(), vec![v(&[0.0, 1.0])]);
    }

    #[test]
    fn quarter_disc_faces() {
        let q = ConstraintSet::quarter_disc(1.0).unwrap();
        assert_eq!(q.face_of(&v(&[0.0, 0.0]), 0.0).unwrap().face_dim, 0);
        assert_eq!(q.face_of(&v(&[1.0, 0.0]), 1e-12).unwrap().face_dim, 0);
        assert_eq!(q.face_of(&v(&[0.5, 0.0]), 1e-12).unwrap().face_dim, 1);
        let p = q.euclid_project(&v(&[3.0, 4.0])).unwrap();
        assert!((p - v(&[0.6, 0.8])).norm() < 1e-15);
        assert_eq!(q.euclid_project(&v(&[5.0, -1.0])).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn orthant_face_counts_positive_entries_after_projection() {
        let mut rng = stream(3);
        let orthant = ConstraintSet::nonnegative_orthant(6);
        for _ in 0..100 {
            let x: DVector<f64> = random_vector(6, &mut rng);
            let p = orthant.euclid_project(&x).unwrap();
            let face = orthant.face_of(&p, 0.0).unwrap();
            assert_eq!(face.face_dim, p.iter().filter(|&&v| v > 0.0).count());
        }
    }

    #[test]
    fn cone_projection_matches_orthant_clamp() {
        let mut rng = stream(4);
        let normals: Vec<_> = (0..3)
            .map(|i| {
                let mut e = DVector::zeros(3);
                e[i] = -1.0;
                e
            })
            .collect();
        let cone = ConstraintSet::polyhedral_cone(3, normals).unwrap();
        let orthant = ConstraintSet::nonnegative_orthant(3);
        for _ in 0..50 {
            let x: DVector<f64> = random_vector(3, &mut rng);
            let a = cone.euclid_project(&x).unwrap();
            let b = orthant.euclid_project(&x).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn sample_sets() -> Vec<ConstraintSet<f64>> {
        vec![
            ConstraintSet::nonnegative_orthant(3),
            ConstraintSet::uniform_box(3, -0.5, 1.0).unwrap(),
            ConstraintSet::halfspace(v(&[1.0, -2.0, 0.5]), 0.3).unwrap(),
            ConstraintSet::polyhedral_cone(3, vec![v(&[1.0, 1.0, 0.0]), v(&[-1.0, 2.0, 0.5]), v(&[0.0, -1.0, 1.0])]).unwrap(),
            ConstraintSet::whole_space(3),
        ]
    }

    /// Points of the set: vertices, extreme rays, or arbitrary projected points.
    fn probe_points(set: &ConstraintSet<f64>, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = stream(seed);
        (0..20)
            .map(|_| set.euclid_project(&(random_vector::<f64, _>(set.dim(), &mut rng) * 3.0)).unwrap())
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_is_idempotent_and_feasible(xs in prop::collection::vec(-5.0f64..5.0, 3), seed in 0u64..1000) {
            let x = v(&xs);
            for set in sample_sets() {
                let p = set.euclid_project(&x).unwrap();
                let pp = set.euclid_project(&p).unwrap();
                let tol = set.default_tol(&p);
                prop_assert!(set.contains(&p, tol.max(1e-12)));
                if set.is_clamp_type() {
                    prop_assert_eq!(&pp, &p);
                } else {
                    prop_assert!((&pp - &p).norm() <= 1e-10 * (1.0 + p.norm()));
                }
                // variational inequality against points of the set
                for y in probe_points(&set, seed) {
                    prop_assert!((&x - &p).dot(&(y - &p)) <= 1e-10 * (1.0 + x.norm()));
                }
                prop_assert!(set.face_of(&p, set.default_tol(&p)).is_ok());
            }
        }

        #[test]
        fn ball_projection_idempotent(x0 in -5.0f64..5.0, x1 in -5.0f64..5.0) {
            let ball = ConstraintSet::ball2d(1.5, v(&[0.3, -0.2])).unwrap();
            let p = ball.euclid_project(&v(&[x0, x1])).unwrap();
            let pp = ball.euclid_project(&p).unwrap();
            prop_assert!((&pp - &p).norm() <= 1e-12);
            prop_assert!(ball.face_of(&p, ball.default_tol(&p)).is_ok());
        }
    }
}
