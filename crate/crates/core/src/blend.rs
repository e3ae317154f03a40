//! The smooth step η and the face blend between two affine pieces that agree
//! on a plane.

use crate::error::{Error, Result};
use crate::geom::{Affine, Frame, Map3, Mat3, Vec2, Vec3};
use crate::numeric::{bisect_threshold, grid_max};

/// Smooth step `η_k(t) = 1 / (1 + exp(k (1/t − 1/(1−t))))` on `(0, 1)`,
/// `0` for `t ≤ 0` and `1` for `t ≥ 1`. The default `k = 1` equals
/// `σ̂(t) / (σ̂(t) + σ̂(1−t))` with `σ̂(t) = exp(−1/t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendProfile {
    steepness: f64,
    sup_prime: f64,
    sup_t2_prime: f64,
    sup_t_prime: f64,
}

impl Default for BlendProfile {
    fn default() -> Self {
        Self::new(1.0).expect("default profile is admissible")
    }
}

/// Upper bound on η′ that every admissible profile must respect.
pub const ETA_PRIME_BOUND: f64 = 2.0;

impl BlendProfile {
    /// Builds a profile and rejects it when `sup η′ > 2`.
    pub fn new(steepness: f64) -> Result<Self> {
        if !(steepness.is_finite() && steepness > 0.0) {
            return Err(Error::InvalidInput(format!("profile steepness {steepness} must be positive")));
        }
        let mut p = Self { steepness, sup_prime: 0.0, sup_t2_prime: 0.0, sup_t_prime: 0.0 };
        p.sup_prime = grid_max(|t| p.eta_prime(t), 0.0, 1.0, 20_000).1;
        if p.sup_prime > ETA_PRIME_BOUND * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "profile with steepness {steepness} has sup η′ = {:.6} > 2",
                p.sup_prime
            )));
        }
        p.sup_t2_prime = grid_max(|t| t * t * p.eta_prime(t), 0.0, 1.0, 20_000).1 * (1.0 + 1e-9);
        p.sup_t_prime = grid_max(|t| t * p.eta_prime(t), 0.0, 1.0, 20_000).1 * (1.0 + 1e-9);
        Ok(p)
    }

    pub fn steepness(&self) -> f64 {
        self.steepness
    }

    /// Measured `sup η′`.
    pub fn sup_eta_prime(&self) -> f64 {
        self.sup_prime
    }

    /// `sup t² η′(t)`, padded upward.
    pub fn sup_t2_eta_prime(&self) -> f64 {
        self.sup_t2_prime
    }

    /// `sup t η′(t)`, padded upward.
    pub fn sup_t_eta_prime(&self) -> f64 {
        self.sup_t_prime
    }

    #[inline]
    fn exponent(&self, t: f64) -> f64 {
        self.steepness * (1.0 / t - 1.0 / (1.0 - t))
    }

    #[inline]
    pub fn eta(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            1.0 / (1.0 + self.exponent(t).exp())
        }
    }

    /// `η(1−η)`, computed without cancellation.
    #[inline]
    fn logistic_slope(e: f64) -> f64 {
        let z = (-e.abs()).exp();
        z / ((1.0 + z) * (1.0 + z))
    }

    #[inline]
    pub fn eta_prime(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let e = self.exponent(t);
        if e.abs() > 700.0 {
            return 0.0;
        }
        let q = 1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t));
        Self::logistic_slope(e) * self.steepness * q
    }

    pub fn eta_second(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let e = self.exponent(t);
        if e.abs() > 700.0 {
            return 0.0;
        }
        let k = self.steepness;
        let s = 1.0 - t;
        let q = 1.0 / (t * t) + 1.0 / (s * s);
        let dq = -2.0 / (t * t * t) + 2.0 / (s * s * s);
        let h = Self::logistic_slope(e);
        let eta = self.eta(t);
        k * q * h * (1.0 - 2.0 * eta) * k * q + k * h * dq
    }

    /// Time reparameterization `s(τ) = η(3τ − 1)`: `0` on `[0, ⅓]`, `1` on `[⅔, 1]`.
    #[inline]
    pub fn time(&self, tau: f64) -> f64 {
        self.eta(3.0 * tau - 1.0)
    }

    #[inline]
    pub fn time_prime(&self, tau: f64) -> f64 {
        3.0 * self.eta_prime(3.0 * tau - 1.0)
    }
}

/// Default η.
pub fn eta(t: f64) -> f64 {
    default_profile().eta(t)
}

/// Default η′.
pub fn eta_prime(t: f64) -> f64 {
    default_profile().eta_prime(t)
}

pub fn default_profile() -> &'static BlendProfile {
    static PROFILE: std::sync::OnceLock<BlendProfile> = std::sync::OnceLock::new();
    PROFILE.get_or_init(BlendProfile::default)
}

/// One factor `η((⟨y, direction⟩ − start) / length)` of a ramp.
#[derive(Clone, Debug, PartialEq)]
pub struct RampFactor {
    pub direction: Vec2,
    pub start: f64,
    pub length: f64,
}

/// `base + delta · Π_k η((⟨y, d_k⟩ − a_k) / ℓ_k)` over in-plane coordinates `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct RampWidth {
    pub base: f64,
    pub delta: f64,
    pub factors: Vec<RampFactor>,
}

/// Width of a blending strip as a function of the in-plane coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum WidthField {
    Constant(f64),
    Ramp(RampWidth),
}

impl WidthField {
    pub fn constant(w: f64) -> Self {
        WidthField::Constant(w)
    }

    pub fn value(&self, y: &Vec2) -> f64 {
        match self {
            WidthField::Constant(w) => *w,
            WidthField::Ramp(r) => {
                let p = default_profile();
                let prod: f64 = r.factors.iter().map(|f| p.eta((f.direction.dot(y) - f.start) / f.length)).product();
                r.base + r.delta * prod
            }
        }
    }

    pub fn gradient(&self, y: &Vec2) -> Vec2 {
        match self {
            WidthField::Constant(_) => Vec2::zeros(),
            WidthField::Ramp(r) => {
                let p = default_profile();
                let args: Vec<f64> = r.factors.iter().map(|f| (f.direction.dot(y) - f.start) / f.length).collect();
                let vals: Vec<f64> = args.iter().map(|&s| p.eta(s)).collect();
                let mut g = Vec2::zeros();
                for (k, f) in r.factors.iter().enumerate() {
                    let others: f64 = vals.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v).product();
                    g += f.direction * (p.eta_prime(args[k]) / f.length * others);
                }
                g * r.delta
            }
        }
    }

    /// Certified bound on `|∇w|` from `sup η′ ≤ 2`.
    pub fn gradient_bound(&self) -> f64 {
        match self {
            WidthField::Constant(_) => 0.0,
            WidthField::Ramp(r) => {
                r.delta.abs() * r.factors.iter().map(|f| ETA_PRIME_BOUND * f.direction.norm() / f.length).sum::<f64>()
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            WidthField::Constant(w) => *w,
            WidthField::Ramp(r) => r.base + r.delta.min(0.0),
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            WidthField::Constant(w) => *w,
            WidthField::Ramp(r) => r.base + r.delta.max(0.0),
        }
    }

    /// The field pushed through `y ↦ λ y`, so that widths scale with lengths.
    pub fn scaled(&self, lambda: f64) -> WidthField {
        match self {
            WidthField::Constant(w) => WidthField::Constant(w * lambda),
            WidthField::Ramp(r) => WidthField::Ramp(RampWidth {
                base: r.base * lambda,
                delta: r.delta * lambda,
                factors: r
                    .factors
                    .iter()
                    .map(|f| RampFactor { direction: f.direction, start: f.start * lambda, length: f.length * lambda })
                    .collect(),
            }),
        }
    }

    /// Translates the field's coordinates: returns `w'(y) = w(y + shift)`.
    pub fn shifted(&self, shift: &Vec2) -> WidthField {
        match self {
            WidthField::Constant(w) => WidthField::Constant(*w),
            WidthField::Ramp(r) => WidthField::Ramp(RampWidth {
                base: r.base,
                delta: r.delta,
                factors: r
                    .factors
                    .iter()
                    .map(|f| RampFactor {
                        direction: f.direction,
                        start: f.start - f.direction.dot(shift),
                        length: f.length,
                    })
                    .collect(),
            }),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, WidthField::Constant(_))
    }
}

/// An oriented plane: `normal` points from the left piece into the right one,
/// and `(normal, tangents[0], tangents[1])` is a right-handed orthonormal basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacePlane {
    pub origin: Vec3,
    pub normal: Vec3,
    pub tangents: [Vec3; 2],
}

impl FacePlane {
    pub fn from_frame(frame: &Frame) -> Self {
        Self { origin: frame.origin, normal: frame.axis(0), tangents: [frame.axis(1), frame.axis(2)] }
    }

    pub fn frame(&self) -> Frame {
        Frame::from_axes(self.origin, self.normal, self.tangents[0], self.tangents[1])
    }
}

/// Certified gradient threshold of a face blend.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaCertificate {
    /// Closed-form σ; `+∞` when the two pieces coincide.
    pub sigma: f64,
    /// Guaranteed Jacobian floor `½ · a_A · J₂`.
    pub floor: f64,
    /// Normal stretch of the non-strip piece.
    pub stretch_outer: f64,
    /// Normal stretch of the strip-side piece.
    pub stretch_inner: f64,
    /// Area stretch `J₂` of the face.
    pub area_stretch: f64,
    /// Bisection estimate from dense sampling; diagnostic only.
    pub sigma_empirical: f64,
}

/// The blend `A + η(d / w)(B − A)` across a plane, where `d` is the signed
/// distance into the strip side.
#[derive(Clone, Debug)]
pub struct FaceBlend {
    origin: Vec3,
    /// Unit normal pointing into the strip.
    normal: Vec3,
    /// In-plane basis defining the width coordinates.
    tangents: [Vec3; 2],
    outer: Affine,
    inner: Affine,
    width: WidthField,
    profile: BlendProfile,
    strip_on_right: bool,
    certificate: SigmaCertificate,
}

impl FaceBlend {
    /// Blend between `left` (on `−normal`) and `right` (on `+normal`). The strip
    /// is placed on the side of the piece with the larger normal stretch.
    pub fn new(plane: FacePlane, left: Affine, right: Affine, width: WidthField) -> Result<Self> {
        Self::with_profile(plane, left, right, width, *default_profile())
    }

    pub fn with_profile(
        plane: FacePlane,
        left: Affine,
        right: Affine,
        width: WidthField,
        profile: BlendProfile,
    ) -> Result<Self> {
        let n = plane.normal;
        let [t1, t2] = plane.tangents;
        let basis = Mat3::from_columns(&[n, t1, t2]);
        if (basis.transpose() * basis - Mat3::identity()).amax() > 1e-9 || basis.determinant() < 0.0 {
            return Err(Error::InvalidInput("face plane basis is not right-handed orthonormal".into()));
        }
        if !(width.min_value() > 0.0) {
            return Err(Error::Domain(format!("width field reaches {} ≤ 0", width.min_value())));
        }
        let scale = 1.0 + plane.origin.norm();
        for p in [plane.origin, plane.origin + t1 * scale, plane.origin + t2 * scale] {
            let gap = (left.apply(&p) - right.apply(&p)).norm();
            if gap > 1e-9 * (1.0 + left.apply(&p).norm()) {
                return Err(Error::InvalidInput(format!("pieces disagree on the face plane by {gap:.3e}")));
            }
        }
        let area = (left.matrix * t1).cross(&(left.matrix * t2)).norm();
        if !(area > 1e-14) {
            return Err(Error::InvalidInput("image of the face is degenerate (J₂ = 0)".into()));
        }
        let (dl, dr) = (left.det(), right.det());
        if !(dl > 0.0 && dr > 0.0) {
            return Err(Error::InvalidInput("face pieces must be sense-preserving".into()));
        }
        let strip_on_right = dr >= dl;
        let (normal, outer, inner) = if strip_on_right { (n, left, right) } else { (-n, right, left) };
        let mut blend = FaceBlend {
            origin: plane.origin,
            normal,
            tangents: plane.tangents,
            outer,
            inner,
            width,
            profile,
            strip_on_right,
            certificate: SigmaCertificate {
                sigma: f64::INFINITY,
                floor: 0.0,
                stretch_outer: 0.0,
                stretch_inner: 0.0,
                area_stretch: area,
                sigma_empirical: f64::INFINITY,
            },
        };
        blend.certificate = blend.compute_sigma();
        let grad = blend.width.gradient_bound();
        if grad > blend.certificate.sigma {
            return Err(Error::Parameter(format!(
                "width gradient bound {grad:.3e} exceeds certified σ = {:.3e}",
                blend.certificate.sigma
            )));
        }
        Ok(blend)
    }

    pub fn outer(&self) -> &Affine {
        &self.outer
    }

    pub fn inner(&self) -> &Affine {
        &self.inner
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn tangents(&self) -> [Vec3; 2] {
        self.tangents
    }

    pub fn width(&self) -> &WidthField {
        &self.width
    }

    pub fn profile(&self) -> &BlendProfile {
        &self.profile
    }

    pub fn strip_on_right(&self) -> bool {
        self.strip_on_right
    }

    pub fn certificate(&self) -> &SigmaCertificate {
        &self.certificate
    }

    pub fn is_trivial(&self) -> bool {
        self.outer == self.inner
    }

    /// Same blend with the width field replaced.
    pub fn with_width(&self, width: WidthField) -> Result<Self> {
        if !(width.min_value() > 0.0) {
            return Err(Error::Domain(format!("width field reaches {} ≤ 0", width.min_value())));
        }
        if width.gradient_bound() > self.certificate.sigma {
            return Err(Error::Parameter(format!(
                "width gradient bound {:.3e} exceeds certified σ = {:.3e}",
                width.gradient_bound(),
                self.certificate.sigma
            )));
        }
        Ok(FaceBlend { width, ..self.clone() })
    }

    /// The blend expressed in new coordinates: `x̃ = domain.to_local(x)` and
    /// `ỹ = image.to_local(y)`.
    pub fn transformed(&self, domain: &Frame, image: &Frame) -> FaceBlend {
        let conj = |a: &Affine| {
            let m = image.rot * a.matrix * domain.rot.transpose();
            let c = image.rot * (a.matrix * domain.origin + a.offset - image.origin);
            Affine::new(m, c)
        };
        FaceBlend {
            origin: domain.to_local(&self.origin),
            normal: domain.rot * self.normal,
            tangents: [domain.rot * self.tangents[0], domain.rot * self.tangents[1]],
            outer: conj(&self.outer),
            inner: conj(&self.inner),
            width: self.width.clone(),
            profile: self.profile,
            strip_on_right: self.strip_on_right,
            certificate: self.certificate,
        }
    }

    /// Signed distance into the strip side.
    #[inline]
    pub fn depth(&self, x: &Vec3) -> f64 {
        (x - self.origin).dot(&self.normal)
    }

    #[inline]
    pub fn plane_coords(&self, x: &Vec3) -> Vec2 {
        let r = x - self.origin;
        Vec2::new(r.dot(&self.tangents[0]), r.dot(&self.tangents[1]))
    }

    /// Local width at the foot point of `x`.
    pub fn width_at(&self, x: &Vec3) -> f64 {
        self.width.value(&self.plane_coords(x))
    }

    /// `true` when `0 < d < w`.
    pub fn in_strip(&self, x: &Vec3) -> bool {
        let d = self.depth(x);
        d > 0.0 && d < self.width_at(x)
    }

    /// The piece of `f` on the side of `x`.
    pub fn piece_at(&self, x: &Vec3) -> &Affine {
        if self.depth(x) <= 0.0 {
            &self.outer
        } else {
            &self.inner
        }
    }

    pub fn blend(&self, x: &Vec3) -> Vec3 {
        let d = self.depth(x);
        if d <= 0.0 {
            return self.outer.apply(x);
        }
        let w = self.width_at(x);
        if d >= w {
            return self.inner.apply(x);
        }
        let e = self.profile.eta(d / w);
        let a = self.outer.apply(x);
        let b = self.inner.apply(x);
        a + (b - a) * e
    }

    pub fn blend_jacobian(&self, x: &Vec3) -> Mat3 {
        self.blend_with_jacobian(x).1
    }

    pub fn blend_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        let d = self.depth(x);
        if d <= 0.0 {
            return (self.outer.apply(x), self.outer.matrix);
        }
        let y = self.plane_coords(x);
        let w = self.width.value(&y);
        if d >= w {
            return (self.inner.apply(x), self.inner.matrix);
        }
        let t = d / w;
        let e = self.profile.eta(t);
        let de = self.profile.eta_prime(t);
        let a = self.outer.apply(x);
        let b = self.inner.apply(x);
        let gw = self.width.gradient(&y);
        let grad_t = self.normal / w - (self.tangents[0] * gw.x + self.tangents[1] * gw.y) * (d / (w * w));
        let m = self.outer.matrix + (self.inner.matrix - self.outer.matrix) * e + (b - a) * (grad_t * de).transpose();
        (a + (b - a) * e, m)
    }

    fn compute_sigma(&self) -> SigmaCertificate {
        let area = self.certificate.area_stretch;
        let a_out = self.outer.det() / area;
        let a_in = self.inner.det() / area;
        let floor = 0.5 * a_out * area;
        let v = (self.inner.matrix - self.outer.matrix) * self.normal;
        let vn = v.norm();
        let base = SigmaCertificate {
            sigma: f64::INFINITY,
            floor,
            stretch_outer: a_out,
            stretch_inner: a_in,
            area_stretch: area,
            sigma_empirical: f64::INFINITY,
        };
        if vn <= 1e-15 * (1.0 + self.outer.matrix.norm()) {
            return base;
        }
        let k = self.profile.sup_t2_eta_prime();
        let s = self.profile.sup_t_eta_prime();
        let mmax = self.outer.matrix.norm().max(self.inner.matrix.norm());
        let bound = mmax + s * vn;
        let sigma = 2.0 * floor / (k * vn * bound * bound);
        let sigma_empirical = self.empirical_sigma(floor, &v, sigma);
        SigmaCertificate { sigma, sigma_empirical, ..base }
    }

    /// Minimum over strip depth and gradient direction of the Jacobian with
    /// `|∇w| = sigma`.
    fn worst_jacobian(&self, v: &Vec3, sigma: f64) -> f64 {
        let dm = self.inner.matrix - self.outer.matrix;
        let mut worst = f64::INFINITY;
        let nt = 400;
        let na = 48;
        for i in 1..nt {
            let t = i as f64 / nt as f64;
            let e = self.profile.eta(t);
            let de = self.profile.eta_prime(t);
            let g0 = self.outer.matrix + dm * e + (v * self.normal.transpose()) * (de * t);
            let coef = de * t * t * sigma;
            for j in 0..na {
                let phi = std::f64::consts::TAU * j as f64 / na as f64;
                let a = self.tangents[0] * phi.cos() + self.tangents[1] * phi.sin();
                let det = (g0 - (v * a.transpose()) * coef).determinant();
                worst = worst.min(det);
            }
        }
        worst
    }

    fn empirical_sigma(&self, floor: f64, v: &Vec3, certified: f64) -> f64 {
        let ok = |s: f64| self.worst_jacobian(v, s) >= floor;
        let mut hi = certified.max(1e-12) * 2.0;
        let mut n = 0;
        while ok(hi) && n < 40 {
            hi *= 2.0;
            n += 1;
        }
        if n == 40 {
            return f64::INFINITY;
        }
        bisect_threshold(ok, 0.0, hi, 40)
    }
}

impl Map3 for FaceBlend {
    fn eval(&self, x: &Vec3) -> Vec3 {
        self.blend(x)
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.blend_jacobian(x)
    }

    fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        self.blend_with_jacobian(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_plane() -> FacePlane {
        FacePlane { origin: Vec3::zeros(), normal: Vec3::x(), tangents: [Vec3::y(), Vec3::z()] }
    }

    fn stretch_blend(w: f64) -> FaceBlend {
        let b = Affine::linear(Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0)));
        FaceBlend::new(unit_plane(), Affine::identity(), b, WidthField::constant(w)).unwrap()
    }

    #[test]
    fn eta_endpoints_and_midpoint() {
        assert_eq!(eta(-1.0), 0.0);
        assert_eq!(eta(2.0), 1.0);
        assert_eq!(eta(0.5), 0.5);
        assert_eq!(eta(0.0), 0.0);
        assert_eq!(eta(1.0), 1.0);
    }

    #[test]
    fn eta_prime_matches_difference_quotient() {
        for i in 1..100 {
            let t = i as f64 / 100.0;
            let h = 1e-6;
            let fd = (eta(t + h) - eta(t - h)) / (2.0 * h);
            assert!((fd - eta_prime(t)).abs() < 1e-7, "t={t}");
            let p = default_profile();
            let fd2 = (p.eta_prime(t + h) - p.eta_prime(t - h)) / (2.0 * h);
            assert!((fd2 - p.eta_second(t)).abs() < 1e-5 * (1.0 + fd2.abs()), "t={t}");
        }
    }

    #[test]
    fn default_profile_peaks_at_two() {
        let p = default_profile();
        assert!((p.sup_eta_prime() - 2.0).abs() < 1e-12);
        assert!((p.eta_prime(0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn steep_profile_is_rejected() {
        assert!(BlendProfile::new(1.2).is_err());
        assert!(BlendProfile::new(0.8).is_ok());
        assert!(BlendProfile::new(0.0).is_err());
    }

    #[test]
    fn time_profile_is_flat_near_ends() {
        let p = default_profile();
        assert_eq!(p.time(0.2), 0.0);
        assert_eq!(p.time(0.8), 1.0);
        assert_eq!(p.time_prime(0.1), 0.0);
    }

    #[test]
    fn blend_midstrip_value() {
        let g = stretch_blend(1.0);
        let y = g.blend(&Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(y, Vec3::new(0.75, 0.0, 0.0));
        let j = g.blend_jacobian(&Vec3::new(0.5, 0.0, 0.0));
        assert!((j[(0, 0)] - (1.0 + eta(0.5) + eta_prime(0.5) * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn identity_blend() {
        let g =
            FaceBlend::new(unit_plane(), Affine::identity(), Affine::identity(), WidthField::constant(0.3)).unwrap();
        let x = Vec3::new(0.3, 0.1, -0.2);
        assert_eq!(g.blend(&x), x);
        assert_eq!(g.blend_jacobian(&x), Mat3::identity());
        assert!(g.certificate().sigma.is_infinite());
    }

    #[test]
    fn outside_strip_is_exact() {
        let g = stretch_blend(1.0);
        assert_eq!(g.blend(&Vec3::new(-0.1, 5.0, 5.0)), Vec3::new(-0.1, 5.0, 5.0));
        assert_eq!(g.blend(&Vec3::new(1.5, 5.0, 5.0)), Vec3::new(3.0, 5.0, 5.0));
    }

    #[test]
    fn floor_for_unit_stretch_pair() {
        let c = *stretch_blend(1.0).certificate();
        assert!((c.floor - 0.5).abs() < 1e-15);
        assert!(c.sigma > 0.0 && c.sigma.is_finite());
        assert!(c.sigma_empirical >= c.sigma);
    }

    #[test]
    fn strip_follows_larger_stretch() {
        let b = Affine::linear(Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0)));
        let g = FaceBlend::new(unit_plane(), b, Affine::identity(), WidthField::constant(1.0)).unwrap();
        assert!(!g.strip_on_right());
        assert!(g.in_strip(&Vec3::new(-0.5, 0.0, 0.0)));
        assert!(!g.in_strip(&Vec3::new(0.5, 0.0, 0.0)));
    }

    #[test]
    fn degenerate_face_image_is_rejected() {
        let m = Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0);
        let r = FaceBlend::new(unit_plane(), Affine::linear(m), Affine::linear(m), WidthField::constant(1.0));
        assert!(r.is_err());
    }

    #[test]
    fn ramp_gradient_matches_difference_quotient() {
        let w = WidthField::Ramp(RampWidth {
            base: 0.2,
            delta: 0.1,
            factors: vec![
                RampFactor { direction: Vec2::new(1.0, 0.0), start: -0.5, length: 1.0 },
                RampFactor { direction: Vec2::new(0.6, 0.8), start: -0.2, length: 0.7 },
            ],
        });
        let y = Vec2::new(0.1, 0.05);
        let h = 1e-6;
        let fx = (w.value(&(y + Vec2::new(h, 0.0))) - w.value(&(y - Vec2::new(h, 0.0)))) / (2.0 * h);
        let fy = (w.value(&(y + Vec2::new(0.0, h))) - w.value(&(y - Vec2::new(0.0, h)))) / (2.0 * h);
        let g = w.gradient(&y);
        assert!((g.x - fx).abs() < 1e-8 && (g.y - fy).abs() < 1e-8);
        assert!(g.norm() <= w.gradient_bound());
    }

    #[test]
    fn transformed_blend_is_conjugate() {
        let g = stretch_blend(0.4);
        let (a, b) = crate::geom::complete_basis(&Vec3::new(0.3, -0.5, 0.8).normalize());
        let dom = Frame::from_axes(Vec3::new(0.2, 0.1, -0.3), a.cross(&b), a, b);
        let (c, d) = crate::geom::complete_basis(&Vec3::new(-0.6, 0.0, 0.8));
        let img = Frame::from_axes(Vec3::new(1.0, 2.0, 3.0), c.cross(&d), c, d);
        let h = g.transformed(&dom, &img);
        for x in [Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.35, -0.2, 0.1), Vec3::new(-0.2, 0.0, 0.0)] {
            let lhs = h.blend(&dom.to_local(&x));
            let rhs = img.to_local(&g.blend(&x));
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }
}
