use std::sync::Arc;

use plsmooth::geom::{fro, Affine};
use plsmooth::vertex::{
    certify_radial_subdeterminant, degree, integral_degree, tangent_det, FnSphereMap, LinearSphereMap, SphereMap,
    VertexSmoother,
};
use plsmooth::{Map3, Mat3, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

/// Brute-force integral degree: midpoint rule in spherical angles with
/// finite-difference tangent derivatives.
fn brute_force_degree(mu: &dyn Fn(&Vec3) -> Vec3) -> f64 {
    let (nt, np) = (200, 400);
    let mut sum = 0.0;
    let h = 1e-6;
    for i in 0..nt {
        let th = std::f64::consts::PI * (i as f64 + 0.5) / nt as f64;
        for j in 0..np {
            let ph = std::f64::consts::TAU * (j as f64 + 0.5) / np as f64;
            let p = |t: f64, q: f64| Vec3::new(t.sin() * q.cos(), t.sin() * q.sin(), t.cos());
            let m = mu(&p(th, ph));
            let mt = (mu(&p(th + h, ph)) - mu(&p(th - h, ph))) / (2.0 * h);
            let mp = (mu(&p(th, ph + h)) - mu(&p(th, ph - h))) / (2.0 * h);
            sum += m.dot(&mt.cross(&mp)) * (std::f64::consts::PI / nt as f64) * (std::f64::consts::TAU / np as f64);
        }
    }
    sum / (4.0 * std::f64::consts::PI)
}

#[test]
fn degrees_of_standard_maps() {
    let y = Vec3::new(0.2, -0.5, 0.7);
    let id = degree(&LinearSphereMap(Mat3::identity()), &y, 1).unwrap();
    let anti = degree(&LinearSphereMap(-Mat3::identity()), &y, 1).unwrap();
    let stretch = LinearSphereMap(Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 2.0)));
    let st = degree(&stretch, &y, 1).unwrap();
    assert_eq!((id.degree, anti.degree, st.degree), (1, -1, 1));
    for d in [&id, &anti, &st] {
        assert_eq!(d.newton_count, d.integral.round() as i64);
        assert!((d.integral - d.integral.round()).abs() < 1e-6);
    }
    let oracle = brute_force_degree(&|u| stretch.eval(u));
    assert!((oracle - 1.0).abs() < 1e-3);
}

#[test]
fn degree_is_independent_of_the_regular_value() {
    let q = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let mu = FnSphereMap(move |u: &Vec3| {
        let v = q * u + Vec3::new(0.3 * u.y * u.z, 0.0, 0.2 * u.x);
        let n = v.norm();
        let m = v / n;
        let d = q + Mat3::new(0.0, 0.3 * u.z, 0.3 * u.y, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0);
        (m, (Mat3::identity() - m * m.transpose()) * d / n)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..5 {
        let y = random_unit(&mut rng);
        assert_eq!(degree(&mu, &y, k).unwrap().degree, 1);
    }
}

#[test]
fn degree_three_map() {
    // In spherical angles (θ, φ) ↦ (θ, 3φ): degree 3, three preimages.
    let mu = FnSphereMap(|u: &Vec3| {
        let r = u.x.hypot(u.y);
        let ph = u.y.atan2(u.x);
        let m = Vec3::new(r * (3.0 * ph).cos(), r * (3.0 * ph).sin(), u.z);
        let e_ph = Vec3::new(-ph.sin(), ph.cos(), 0.0);
        let f_ph = Vec3::new(-(3.0 * ph).sin(), (3.0 * ph).cos(), 0.0);
        let e_r = Vec3::new(ph.cos(), ph.sin(), 0.0);
        let f_r = Vec3::new((3.0 * ph).cos(), (3.0 * ph).sin(), 0.0);
        let d = f_ph * e_ph.transpose() * 3.0 + f_r * e_r.transpose() + Vec3::z() * Vec3::z().transpose();
        (m, d)
    });
    let d = degree(&mu, &Vec3::new(0.5, 0.1, 0.3), 2).unwrap();
    assert_eq!(d.degree, 3);
    assert_eq!(d.preimages, 3);
    assert!((integral_degree(&mu, 32) - 3.0).abs() < 1e-3);
}

#[test]
fn radial_subdeterminant_of_linear_maps() {
    let id = Affine::identity();
    let rep = certify_radial_subdeterminant(&id, &Vec3::zeros(), &Vec3::zeros(), 1.0, 100_000, 1).unwrap();
    assert!((rep.delta_floor - 1.0).abs() < 1e-12 && (rep.radial_floor - 1.0).abs() < 1e-12);
    let a = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 2.0));
    let rep =
        certify_radial_subdeterminant(&Affine::linear(a), &Vec3::zeros(), &Vec3::zeros(), 1.0, 20_000, 1).unwrap();
    // Closed form: Δ(u) = det(A)·|u| / |A u| ≥ 1.
    assert!(rep.delta_floor >= 1.0 - 1e-12 && rep.delta_floor <= 1.01);
}

#[test]
fn folded_shell_fails_certification() {
    let fold = FoldMap;
    let r = certify_radial_subdeterminant(&fold, &Vec3::zeros(), &Vec3::zeros(), 1.0, 20_000, 1);
    assert!(r.is_err());
}

/// `(x, y, z) ↦ (x² − 0.3, y, z)`: folds the shell along `x = 0`.
struct FoldMap;

impl Map3 for FoldMap {
    fn eval(&self, x: &Vec3) -> Vec3 {
        Vec3::new(x.x * x.x - 0.3, x.y, x.z)
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(2.0 * x.x, 1.0, 1.0))
    }
}

/// A mildly nonlinear sense-preserving map with `ĝ(0) = 0`.
struct Warp;

impl Map3 for Warp {
    fn eval(&self, x: &Vec3) -> Vec3 {
        let a = Mat3::new(1.2, 0.3, 0.0, -0.1, 0.9, 0.2, 0.0, 0.1, 1.5);
        a * x + Vec3::new(0.1 * x.y * x.z, 0.05 * x.x * x.x, -0.08 * x.x * x.y)
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        let a = Mat3::new(1.2, 0.3, 0.0, -0.1, 0.9, 0.2, 0.0, 0.1, 1.5);
        a + Mat3::new(0.0, 0.1 * x.z, 0.1 * x.y, 0.1 * x.x, 0.0, 0.0, -0.08 * x.y, -0.08 * x.x, 0.0)
    }
}

fn warp_smoother() -> VertexSmoother {
    VertexSmoother::new(Arc::new(Warp), Vec3::zeros(), Vec3::zeros(), 0.5, 11).unwrap()
}

#[test]
fn identity_star_with_unit_factor_is_identity() {
    let v = VertexSmoother::new(Arc::new(Affine::identity()), Vec3::zeros(), Vec3::zeros(), 1.0, 1)
        .unwrap()
        .with_kappa(1.0)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let x = random_unit(&mut rng) * rng.gen_range(0.0..1.5);
        assert!((v.eval(&x) - x).norm() <= 1e-14);
    }
}

#[test]
fn doubled_star_matches_both_ends() {
    let v = VertexSmoother::new(Arc::new(Affine::linear(Mat3::identity() * 2.0)), Vec3::zeros(), Vec3::zeros(), 1.0, 1)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let u = random_unit(&mut rng);
        assert!((v.eval(&(u * (1.0 - 1e-14))) - u * 2.0).norm() < 1e-10);
        assert!((v.eval(&(u * 0.75)) - u * v.rho()).norm() < 1e-12);
    }
}

#[test]
fn vertex_map_equals_outer_map_beyond_radius() {
    let v = warp_smoother();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let x = random_unit(&mut rng) * rng.gen_range(0.5..1.0);
        assert_eq!(v.eval(&x), Warp.eval(&x));
    }
}

#[test]
fn inner_ball_is_a_dilation() {
    let v = warp_smoother();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let x = random_unit(&mut rng) * rng.gen_range(0.0..0.25);
        assert_eq!(v.eval(&x), x * v.kappa());
        assert_eq!(v.jacobian(&x), Mat3::identity() * v.kappa());
    }
}

#[test]
fn interfaces_are_continuous() {
    let v = warp_smoother();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let big_r = v.radius();
    for _ in 0..1000 {
        let u = random_unit(&mut rng);
        for r in [0.5 * big_r, 0.75 * big_r, big_r] {
            let a = v.eval(&(u * (r * (1.0 - 1e-13))));
            let b = v.eval(&(u * (r * (1.0 + 1e-13))));
            assert!((a - b).norm() <= 1e-10, "jump {} at radius {r}", (a - b).norm());
        }
    }
}

#[test]
fn vertex_jacobian_positive_on_polar_grid() {
    let v = warp_smoother();
    let n = 48;
    let mut floor = f64::INFINITY;
    for i in 0..n {
        let r = 2.0 * v.radius() * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let th = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
            for k in 0..n {
                let ph = std::f64::consts::TAU * (k as f64 + 0.5) / n as f64;
                let x = Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()) * r;
                floor = floor.min(v.jacobian(&x).determinant());
            }
        }
    }
    assert!(floor > 0.0, "{floor}");
}

#[test]
fn vertex_derivative_matches_differences() {
    let v = warp_smoother();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-6 * v.radius();
    for _ in 0..2000 {
        let x = random_unit(&mut rng) * rng.gen_range(0.26..0.55);
        let j = v.jacobian(&x);
        let mut fd = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            fd.set_column(k, &((v.eval(&(x + e)) - v.eval(&(x - e))) / (2.0 * h)));
        }
        assert!(fro(&(j - fd)) / fro(&j).max(1.0) <= 1e-5, "at {x:?}");
    }
}

#[test]
fn radial_images_are_monotone() {
    let v = warp_smoother();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let u = random_unit(&mut rng);
        let mut prev = 0.0;
        for i in 1..=100 {
            let r = v.radius() * i as f64 / 100.0;
            let m = v.eval(&(u * r)).norm();
            assert!(m > prev);
            prev = m;
        }
    }
}

#[test]
fn isotopy_stages_have_degree_one() {
    let v = warp_smoother();
    let rep = v.isotopy_report();
    assert_eq!(rep.degrees.len(), 11);
    assert!(rep.degrees.iter().all(|&d| d == 1));
    assert!(rep.min_interpolant > 0.0 && rep.det_floor > 0.0);
}

#[test]
fn antipodal_star_is_rejected() {
    let r = VertexSmoother::new(Arc::new(Affine::linear(-Mat3::identity())), Vec3::zeros(), Vec3::zeros(), 1.0, 1);
    assert!(r.is_err());
}

#[test]
fn stretched_isotopy_interpolant_stays_clear() {
    let mu = LinearSphereMap(Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 2.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut min_q = f64::INFINITY;
    for _ in 0..10_000 {
        let u = random_unit(&mut rng);
        let m = mu.eval(&u);
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            min_q = min_q.min((u * (1.0 - s) + m * s).norm());
        }
        assert!(tangent_det(&mu, &u) > 0.0);
    }
    assert!(min_q > 0.7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn degree_of_orientation_preserving_linear_maps(
        a in -0.4f64..0.4, b in -0.4f64..0.4, c in -0.4f64..0.4, s in 0.5f64..2.0,
    ) {
        let m = Mat3::new(1.0, a, 0.0, b, s, c, 0.0, 0.0, 1.0);
        prop_assume!(m.determinant() > 0.1);
        prop_assert_eq!(degree(&LinearSphereMap(m), &Vec3::new(0.3, 0.3, 0.9), 1).unwrap().degree, 1);
        prop_assert_eq!(degree(&LinearSphereMap(-m), &Vec3::new(0.3, 0.3, 0.9), 1).unwrap().degree, -1);
    }
}
