use plsmooth::fixtures::{fold, two_tets};
use plsmooth::geom::{Affine, Map3, Mat3, Vec3};
use plsmooth::mesh::Verdict;
use plsmooth::verify::{
    fd_check, injectivity_audit, jacobian_grid, jacobian_points, stratified_samples, AuditOptions, Region, Stratum,
    FD_TOLERANCE,
};

fn unit_tet() -> [Vec3; 4] {
    [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
}

fn strata_of(map: &plsmooth::mesh::PLMap) -> Vec<Stratum<'static>> {
    map.complex()
        .cells()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = map.complex().points();
            Stratum::tet(format!("cell {i}"), [p[c[0]], p[c[1]], p[c[2]], p[c[3]]])
        })
        .collect()
}

#[test]
fn identity_has_exact_finite_differences() {
    let id = Affine::identity();
    let rep = fd_check(&id, &Region::Box { lo: Vec3::repeat(-1.0), hi: Vec3::repeat(1.0) }, 500, 1.0, 3);
    assert!(rep.passed);
    assert!(rep.worst < 1e-9, "{}", rep.worst);
    assert_eq!(rep.seed, Some(3));
}

#[test]
fn affine_maps_pass_the_derivative_check() {
    let a = Affine::new(Mat3::new(2.0, 0.3, -0.1, 0.0, 1.5, 0.2, 0.4, 0.0, 0.7), Vec3::new(1.0, -2.0, 0.5));
    let rep = fd_check(&a, &Region::Ball { center: Vec3::zeros(), radius: 2.0 }, 1000, 2.0, 5);
    assert!(rep.passed && rep.worst <= 1e-6, "{}", rep.worst);
    assert!(rep.worst <= FD_TOLERANCE);
}

#[test]
fn a_wrong_derivative_is_caught() {
    struct Liar;
    impl Map3 for Liar {
        fn eval(&self, x: &Vec3) -> Vec3 {
            Vec3::new(x.x * x.x, x.y, x.z)
        }
        fn jacobian(&self, _: &Vec3) -> Mat3 {
            Mat3::identity()
        }
    }
    let rep = fd_check(&Liar, &Region::Tet(unit_tet()), 200, 1.0, 1);
    assert!(!rep.passed);
    assert!(rep.witness.is_some());
}

#[test]
fn reflection_fails_the_jacobian_floor() {
    let r = Affine::linear(Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0)));
    let rep = jacobian_grid(&r, &Region::Tet(unit_tet()), 6, 0.0);
    assert!(!rep.passed);
    assert_eq!(rep.worst, 1.0);
    let ok = jacobian_points(|_| Mat3::identity() * 2.0, &[Vec3::zeros()], 7.9);
    assert!(ok.passed && (ok.worst + 0.1).abs() < 1e-12);
}

#[test]
fn fold_is_rejected_by_validation() {
    let f = fold().unwrap();
    let report = f.validate();
    assert!(matches!(report.verdict, Verdict::SignMixed { .. }), "{:?}", report.verdict);
    assert!(f.validate().into_result().is_err());
}

#[test]
fn fold_audit_reports_a_genuine_collision() {
    let f = fold().unwrap();
    let strata = strata_of(&f);
    let mut opts = AuditOptions::new(1.0, 9);
    opts.samples = 20_000;
    let rep = injectivity_audit(&f, &strata, &opts);
    assert!(!rep.passed);
    let a = Vec3::from(rep.witness.expect("witness"));
    let b = Vec3::from(rep.partner.expect("collision partner"));
    assert!((a - b).norm() > 1e-6);
    assert!((Map3::eval(&f, &a) - Map3::eval(&f, &b)).norm() <= opts.tolerance * opts.scale);
}

#[test]
fn audit_passes_an_injective_map_and_is_deterministic() {
    let m = two_tets(2.0).unwrap();
    let strata = strata_of(&m);
    let mut opts = AuditOptions::new(1.0, 4);
    opts.samples = 10_000;
    let a = injectivity_audit(&m, &strata, &opts);
    let b = injectivity_audit(&m, &strata, &opts);
    assert!(a.passed, "{a:?}");
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.worst.to_bits(), b.worst.to_bits());
}

#[test]
fn stratified_samples_respect_measures_and_minimums() {
    let small = [Vec3::zeros(), Vec3::x() * 0.1, Vec3::y() * 0.1, Vec3::z() * 0.1];
    let strata = vec![Stratum::tet("big", unit_tet()), Stratum::tet("small", small)];
    let s = stratified_samples(&strata, 1001, 50, 2);
    let count = |k| s.iter().filter(|p| p.0 == k).count();
    assert_eq!(count(0), 1000);
    assert_eq!(count(1), 50);
    assert_eq!(s, stratified_samples(&strata, 1001, 50, 2));
    assert_ne!(s, stratified_samples(&strata, 1001, 50, 3));
    assert!(s.iter().filter(|p| p.0 == 1).all(|p| p.1.min() >= 0.0 && p.1.sum() <= 0.1 + 1e-15));
}

#[test]
fn region_grids_stay_inside() {
    let b = Region::Ball { center: Vec3::new(1.0, 0.0, 0.0), radius: 0.5 };
    assert!(b.grid(5).iter().all(|x| (x - Vec3::new(1.0, 0.0, 0.0)).norm() <= 0.5));
    let t = Region::Tet(unit_tet());
    assert!(t.grid(7).iter().all(|x| x.min() > 0.0 && x.sum() < 1.0));
}
