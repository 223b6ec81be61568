//! Structural properties of obliquely projected Gaussians on polyhedral sets.

use nalgebra::{DMatrix, DVector};
use projpost::constraints::ConstraintSet;
use projpost::projector::{check_face_proportionality, check_inversion_1d, check_mean_in_relint, check_positive_mass, mc_project};
use projpost::testing::{random_spd, random_vector};
use projpost::{stream, Gaussian, SolverConfig};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn cfg() -> SolverConfig {
    SolverConfig::standalone()
}

#[test]
fn every_orthant_face_carries_mass() {
    let mut rng = stream(400);
    for n in [2, 3] {
        let g = Gaussian::new(random_vector::<f64, _>(n, &mut rng) * 0.3, random_spd(n, &mut rng)).unwrap();
        let set = ConstraintSet::nonnegative_orthant(n);
        let s = mc_project(&g, &set, 100_000, 4000 + n as u64, &cfg()).unwrap();
        let masses = s.face_masses();
        assert_eq!(masses.len(), 1 << n, "{masses:?}");
        assert!(masses.values().all(|&m| m > 0.0));
        assert!((masses.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.samples.iter().all(|x| x.iter().all(|&c| c >= 0.0)));
    }
}

#[test]
fn boundary_and_interior_both_positive() {
    let mut rng = stream(401);
    for trial in 0..5u64 {
        let n = 2 + trial as usize % 3;
        let g = Gaussian::new(random_vector(n, &mut rng), random_spd(n, &mut rng)).unwrap();
        let sets = [
            ConstraintSet::nonnegative_orthant(n),
            ConstraintSet::uniform_box(n, -1.0, 1.5).unwrap(),
            ConstraintSet::halfspace(random_vector(n, &mut rng), 0.3).unwrap(),
        ];
        for (k, set) in sets.iter().enumerate() {
            let s = mc_project(&g, set, 20_000, 4100 + 10 * trial + k as u64, &cfg()).unwrap();
            let (bd, int) = check_positive_mass(&s);
            assert!(bd > 0.0 && int > 0.0, "trial {trial} set {k}: {bd} {int}");
        }
    }
}

#[test]
fn projected_means_are_strictly_feasible() {
    let mut rng = stream(402);
    let halfspace = ConstraintSet::halfspace(v(&[1.0, -2.0, 0.5]), -1.0).unwrap();
    let g = Gaussian::new(v(&[3.0, 0.0, 1.0]), random_spd(3, &mut rng)).unwrap();
    assert!(check_mean_in_relint(&mc_project(&g, &halfspace, 10_000, 4200, &cfg()).unwrap()));
    let unit_box = ConstraintSet::uniform_box(4, 0.0, 1.0).unwrap();
    let g = Gaussian::new(random_vector::<f64, _>(4, &mut rng) * 2.0, random_spd(4, &mut rng)).unwrap();
    let s = mc_project(&g, &unit_box, 10_000, 4201, &cfg()).unwrap();
    assert!(check_mean_in_relint(&s));
    assert!(s.mean().iter().all(|&m| m > 0.0 && m < 1.0));
}

#[test]
fn face_proportionality_on_orthant_faces_of_all_dimensions() {
    let mut rng = stream(403);
    for n in [2, 3] {
        for trial in 0..3u64 {
            let g = Gaussian::new(random_vector::<f64, _>(n, &mut rng) * 0.3, random_spd(n, &mut rng)).unwrap();
            let set = ConstraintSet::nonnegative_orthant(n);
            let s = mc_project(&g, &set, 40_000, 4300 + 10 * n as u64 + trial, &cfg()).unwrap();
            let mut checked = 0;
            for (face, mass) in s.face_masses() {
                if mass * (s.len() as f64) < 500.0 {
                    continue;
                }
                let report = check_face_proportionality(&s, &face).unwrap();
                assert!(report.passed, "n={n} trial {trial} face {face:?}: {report:?}");
                checked += 1;
            }
            assert!(checked > n, "only {checked} faces had enough samples");
        }
    }
}

#[test]
fn face_proportionality_on_a_polyhedral_cone() {
    // cone spanned by two non-orthogonal constraints in the plane
    let normals = vec![v(&[-1.0, 0.3]), v(&[0.2, -1.0])];
    let set = ConstraintSet::polyhedral_cone(2, normals).unwrap();
    let g = Gaussian::new(v(&[0.2, -0.1]), DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.7])).unwrap();
    let s = mc_project(&g, &set, 40_000, 4400, &cfg()).unwrap();
    for (face, mass) in s.face_masses() {
        if face.face_dim == 1 && mass * s.len() as f64 >= 500.0 {
            let report = check_face_proportionality(&s, &face).unwrap();
            assert!(report.passed, "{face:?}: {report:?}");
        }
    }
}

#[test]
fn vertex_masses_match_normal_cone_preimages() {
    let cases = [
        (ConstraintSet::halfspace(v(&[1.0]), 0.0).unwrap(), 0.3, 2.0),
        (ConstraintSet::halfspace(v(&[-1.0]), -0.5).unwrap(), 0.2, 0.7),
        (ConstraintSet::uniform_box(1, 0.0, 1.0).unwrap(), 0.2, 0.5),
        (ConstraintSet::nonnegative_orthant(1), -0.4, 1.3),
    ];
    for (k, (set, mu, var)) in cases.into_iter().enumerate() {
        let g = Gaussian::new(v(&[mu]), DMatrix::from_element(1, 1, var)).unwrap();
        let s = mc_project(&g, &set, 100_000, 4500 + k as u64, &cfg()).unwrap();
        for (face, _) in s.face_masses() {
            if face.face_dim == 0 {
                let r = check_inversion_1d(&s, &face).unwrap();
                assert!(r.within(3.0), "case {k} face {face:?}: {r:?}");
            }
        }
    }
}

#[test]
fn face_tests_reject_at_their_nominal_rate() {
    // with many faces some 1% rejections are expected even for exact
    // samples; their count must stay binomial
    use statrs::distribution::{Binomial, DiscreteCDF};
    let mut rng = stream(405);
    let (mut faces, mut rejections) = (0u64, 0u64);
    for n in [2, 3] {
        for k in 0..80u64 {
            let g = Gaussian::new(random_vector::<f64, _>(n, &mut rng) * 0.3, random_spd(n, &mut rng)).unwrap();
            let s = mc_project(&g, &ConstraintSet::nonnegative_orthant(n), 20_000, 4600 + 100 * n as u64 + k, &cfg()).unwrap();
            for face in s.face_masses().into_keys().filter(|f| f.face_dim == 1) {
                let report = check_face_proportionality(&s, &face).unwrap();
                faces += 1;
                rejections += u64::from(!report.passed);
            }
        }
    }
    let null = Binomial::new(0.01, faces).unwrap();
    let p_upper = 1.0 - null.cdf(rejections.saturating_sub(1));
    assert!(p_upper >= 1e-3, "{rejections} of {faces} faces rejected, P(X >= that) = {p_upper:.2e}");
}
