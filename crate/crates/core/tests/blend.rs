use plsmooth::blend::{default_profile, BlendProfile, FaceBlend, FacePlane, RampFactor, RampWidth, WidthField};
use plsmooth::geom::{Affine, Mat3, Vec2, Vec3};
use plsmooth::verify::{fd_check_with, jacobian_points, Region, FD_TOLERANCE};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plane() -> FacePlane {
    FacePlane { origin: Vec3::zeros(), normal: Vec3::x(), tangents: [Vec3::y(), Vec3::z()] }
}

fn stretch(a: f64) -> Affine {
    Affine::linear(Mat3::from_diagonal(&Vec3::new(a, 1.0, 1.0)))
}

/// Ramp along the first tangent whose gradient bound is `sigma` up to rounding.
fn ramp(w: f64, sigma: f64) -> WidthField {
    let length = w / (sigma * (1.0 - 1e-12));
    WidthField::Ramp(RampWidth {
        base: w / 2.0,
        delta: w / 2.0,
        factors: vec![RampFactor { direction: Vec2::x(), start: -length / 2.0, length }],
    })
}

fn strip_points(g: &FaceBlend, n: usize, seed: u64, span: f64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let y = Vec3::new(0.0, rng.gen_range(-span..span), rng.gen_range(-span..span));
        let w = g.width_at(&y);
        let d = w * rng.gen_range(0.0..1.0);
        let x = y + g.normal() * d;
        if g.in_strip(&x) {
            out.push(x);
        }
    }
    out
}

#[test]
fn outside_the_strip_the_blend_is_the_piecewise_map() {
    for a in [0.5, 2.0, 4.0] {
        let g = FaceBlend::new(plane(), Affine::identity(), stretch(a), WidthField::constant(0.1)).unwrap();
        let pts = Region::Box { lo: Vec3::repeat(-1.0), hi: Vec3::repeat(1.0) }.samples(100_000, 1);
        let mut checked = 0;
        for x in pts.iter().filter(|x| !g.in_strip(x)) {
            let f = if x.x <= 0.0 { Affine::identity() } else { stretch(a) };
            assert_eq!(g.blend(x), f.apply(x), "a = {a} at {x:?}");
            assert_eq!(g.blend_jacobian(x), f.matrix);
            checked += 1;
        }
        assert!(checked > 90_000);
    }
}

#[test]
fn jacobian_floor_holds_at_the_certified_gradient() {
    for a in [0.5, 2.0, 4.0] {
        let base = FaceBlend::new(plane(), Affine::identity(), stretch(a), WidthField::constant(0.1)).unwrap();
        let c = *base.certificate();
        let g = base.with_width(ramp(0.1, c.sigma)).unwrap();
        assert!((g.width().gradient_bound() - c.sigma).abs() <= 1e-11 * c.sigma);
        let pts = strip_points(&g, 100_000, 2, 0.5 + 0.1 / c.sigma);
        let rep = jacobian_points(|x| g.blend_jacobian(x), &pts, c.floor);
        assert!(rep.passed, "a = {a}: {rep:?}");
        // ½ [D₁A₁]¹ J₂ with the strip on the larger-stretch side.
        assert!((c.floor - 0.5 * a.min(1.0)).abs() < 1e-15);
    }
}

#[test]
fn analytic_derivative_matches_finite_differences() {
    let base = FaceBlend::new(plane(), Affine::identity(), stretch(2.0), WidthField::constant(0.1)).unwrap();
    let g = base.with_width(ramp(0.1, base.certificate().sigma)).unwrap();
    let pts = strip_points(&g, 10_000, 3, 2.0);
    let rep = fd_check_with(|x| g.blend_with_jacobian(x), &pts, |x| 1e-6 * g.width_at(x), |_| Affine::identity());
    assert!(rep.passed, "{rep:?}");
    assert!(rep.worst <= FD_TOLERANCE);
}

#[test]
fn sheared_pieces_keep_the_floor() {
    let right = Affine::linear(Mat3::new(2.0, 0.0, 0.0, 0.7, 1.0, 0.0, -0.4, 0.0, 1.0));
    let base = FaceBlend::new(plane(), Affine::identity(), right, WidthField::constant(0.05)).unwrap();
    let c = *base.certificate();
    assert!(c.sigma.is_finite() && c.sigma > 0.0);
    assert!(c.sigma <= c.sigma_empirical);
    let g = base.with_width(ramp(0.05, c.sigma)).unwrap();
    let pts = strip_points(&g, 20_000, 4, 1.0);
    assert!(jacobian_points(|x| g.blend_jacobian(x), &pts, c.floor).passed);
}

#[test]
fn too_steep_width_is_refused() {
    let base = FaceBlend::new(plane(), Affine::identity(), stretch(2.0), WidthField::constant(0.1)).unwrap();
    let sigma = base.certificate().sigma;
    assert!(base.with_width(ramp(0.1, 1.5 * sigma)).is_err());
    assert!(FaceBlend::new(plane(), Affine::identity(), stretch(2.0), WidthField::constant(0.0)).is_err());
}

#[test]
fn mismatched_or_reflected_pieces_are_refused() {
    let shifted = Affine::new(Mat3::identity(), Vec3::new(0.0, 0.1, 0.0));
    assert!(FaceBlend::new(plane(), Affine::identity(), shifted, WidthField::constant(0.1)).is_err());
    let flip = Affine::linear(Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0)));
    assert!(FaceBlend::new(plane(), Affine::identity(), flip, WidthField::constant(0.1)).is_err());
}

#[test]
fn width_fields_scale_with_lengths() {
    let w = ramp(0.2, 0.5);
    let s = w.scaled(0.25);
    for y in [Vec2::new(0.1, 0.0), Vec2::new(-0.3, 2.0), Vec2::new(0.0, 0.0)] {
        assert!((s.value(&(y * 0.25)) - 0.25 * w.value(&y)).abs() < 1e-15);
    }
    assert!((s.gradient_bound() - w.gradient_bound()).abs() < 1e-15);
}

proptest! {
    #[test]
    fn eta_is_a_monotone_step(t in -0.5f64..1.5, dt in 0.0f64..0.5) {
        let p = default_profile();
        let (a, b) = (p.eta(t), p.eta(t + dt));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(a <= b);
        prop_assert!(p.eta_prime(t) >= 0.0 && p.eta_prime(t) <= 2.0 + 1e-12);
        prop_assert!((p.eta(t) + p.eta(1.0 - t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn admissible_profiles_are_bounded_by_two(k in 0.05f64..4.0) {
        match BlendProfile::new(k) {
            Ok(p) => prop_assert!(p.sup_eta_prime() <= 2.0 + 1e-12),
            Err(_) => prop_assert!(k != 1.0),
        }
        // η_k′(½) = 2k.
        if k > 1.0 {
            prop_assert!(BlendProfile::new(k).is_err());
        }
    }

    #[test]
    fn blend_is_continuous_across_the_strip_edges(a in 0.3f64..5.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let g = FaceBlend::new(plane(), Affine::identity(), stretch(a), WidthField::constant(0.1)).unwrap();
        for d in [0.0, 0.1] {
            let x = g.normal() * d + Vec3::new(0.0, y, z);
            let lo = g.blend(&(x - g.normal() * 1e-12));
            let hi = g.blend(&(x + g.normal() * 1e-12));
            prop_assert!((lo - hi).norm() < 1e-10);
        }
    }

    #[test]
    fn jacobian_stays_positive_in_random_pairs(
        m in prop::array::uniform3(-0.5f64..0.5),
        a in 0.3f64..4.0,
        seed in any::<u64>(),
    ) {
        // Right piece agrees with the identity on x₁ = 0.
        let right = Affine::linear(Mat3::new(a, 0.0, 0.0, m[0], 1.0, 0.0, m[1] + m[2], 0.0, 1.0));
        let base = FaceBlend::new(plane(), Affine::identity(), right, WidthField::constant(0.05)).unwrap();
        let c = *base.certificate();
        let g = base.with_width(ramp(0.05, c.sigma)).unwrap();
        let pts = strip_points(&g, 500, seed, 0.5 + 0.05 / c.sigma);
        prop_assert!(jacobian_points(|x| g.blend_jacobian(x), &pts, c.floor).passed);
    }
}
