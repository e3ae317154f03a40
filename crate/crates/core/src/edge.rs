//! Smoothing around an edge: the wedge of face blends around the axis, and
//! its extension into a cylinder through four annuli (flatten, squeeze,
//! untwist, and a linear core).

use nalgebra::{Matrix2x3, RowVector3, Vector2};

use crate::blend::{default_profile, BlendProfile, FaceBlend, FacePlane, RampFactor, RampWidth, WidthField};
use crate::error::{Error, Result};
use crate::geom::{Affine, Map3, Mat3, Vec2, Vec3};
use crate::mesh::LocalFan;
use crate::numeric::{golden_max, grid_min};

const TWIST_SAMPLES: usize = 1024;

/// Angular bound `min(gap, π/8) / 8` that strips must stay within.
pub fn strip_angle_bound(min_gap: f64) -> f64 {
    min_gap.min(std::f64::consts::FRAC_PI_8) / 8.0
}

/// Largest constant width compatible with radius `r`: strips stay inside the
/// angular bound for every `t ≥ r/4`.
pub fn max_width_for_radius(min_gap: f64, r: f64) -> f64 {
    0.25 * r * strip_angle_bound(min_gap).tan()
}

/// Frame-local face blend of ray `k`: left piece is sector `k−1`, right piece
/// is sector `k`.
pub fn ray_blend(fan: &LocalFan, k: usize, width: WidthField) -> Result<FaceBlend> {
    let m = fan.angles.len();
    let a = fan.angles[k];
    let plane = FacePlane {
        origin: Vec3::zeros(),
        normal: Vec3::new(-a.sin(), a.cos(), 0.0),
        tangents: [Vec3::z(), Vec3::new(a.cos(), a.sin(), 0.0)],
    };
    FaceBlend::new(plane, Affine::linear(fan.pieces[(k + m - 1) % m]), Affine::linear(fan.pieces[k]), width)
}

/// Unwrapped twist `δ(θ) = arg P₀(θ) − θ` on a uniform grid, used to pick the
/// continuous branch of the lift.
#[derive(Clone, Debug)]
struct TwistTable {
    values: Vec<f64>,
}

impl TwistTable {
    fn angle(j: usize) -> f64 {
        -std::f64::consts::PI + std::f64::consts::TAU * j as f64 / TWIST_SAMPLES as f64
    }

    fn reference(&self, theta: f64) -> f64 {
        let u = (theta + std::f64::consts::PI) / std::f64::consts::TAU * TWIST_SAMPLES as f64;
        let u = u.rem_euclid(TWIST_SAMPLES as f64);
        let j = (u.floor() as usize).min(TWIST_SAMPLES - 1);
        let f = u - j as f64;
        let a = self.values[j];
        let b = self.values[(j + 1) % TWIST_SAMPLES];
        a + f * (b - a)
    }

    fn branch(&self, theta: f64, raw: f64) -> f64 {
        let r = self.reference(theta);
        raw + std::f64::consts::TAU * ((r - raw) / std::f64::consts::TAU).round()
    }
}

/// Radius of the cylinder as a function of the axial coordinate.
#[derive(Clone, Debug, PartialEq)]
pub enum RadiusProfile {
    Constant(f64),
    /// `r(c) = base + slope · c`.
    Linear {
        base: f64,
        slope: f64,
    },
    /// `r(c) = from + (to − from) · η((c − start) / length)`.
    Smooth {
        from: f64,
        to: f64,
        start: f64,
        length: f64,
    },
}

impl RadiusProfile {
    pub fn radius(&self, c: f64) -> (f64, f64) {
        match *self {
            RadiusProfile::Constant(r) => (r, 0.0),
            RadiusProfile::Linear { base, slope } => (base + slope * c, slope),
            RadiusProfile::Smooth { from, to, start, length } => {
                let p = default_profile();
                let s = (c - start) / length;
                (from + (to - from) * p.eta(s), (to - from) * p.eta_prime(s) / length)
            }
        }
    }

    /// Bound on `|r′|`.
    pub fn slope_bound(&self) -> f64 {
        match *self {
            RadiusProfile::Constant(_) => 0.0,
            RadiusProfile::Linear { slope, .. } => slope.abs(),
            RadiusProfile::Smooth { from, to, length, .. } => 2.0 * (to - from).abs() / length,
        }
    }
}

/// Frame-local smoothing around an edge along the `x₃`-axis.
#[derive(Clone, Debug)]
pub struct EdgeSmoother {
    fan: LocalFan,
    faces: Vec<FaceBlend>,
    bisectors: Vec<f64>,
    radius: f64,
    rho: f64,
    axial: (f64, f64),
    profile: BlendProfile,
    twist: TwistTable,
    twist_slope: (f64, f64),
    trivial: bool,
}

impl EdgeSmoother {
    /// Builds the smoother for a fan with one width field per ray. `axial`
    /// is the range of `x₃` over which the construction is certified.
    pub fn new(fan: LocalFan, widths: Vec<WidthField>, radius: f64, axial: (f64, f64)) -> Result<Self> {
        fan.check()?;
        let m = fan.angles.len();
        if widths.len() != m {
            return Err(Error::InvalidInput(format!("{} widths for {m} rays", widths.len())));
        }
        let faces = (0..m).map(|k| ray_blend(&fan, k, widths[k].clone())).collect::<Result<Vec<_>>>()?;
        Self::from_blends(fan, faces, radius, axial)
    }

    /// Builds the smoother from prepared frame-local ray blends.
    pub fn from_blends(fan: LocalFan, faces: Vec<FaceBlend>, radius: f64, axial: (f64, f64)) -> Result<Self> {
        fan.check()?;
        let m = fan.angles.len();
        if !(radius > 0.0) {
            return Err(Error::Parameter(format!("edge radius {radius} must be positive")));
        }
        let gap = fan.min_gap();
        if gap >= std::f64::consts::PI {
            return Err(Error::Unsupported("fan with an angular gap of at least π".into()));
        }
        let wmax = max_width_for_radius(gap, radius);
        for (k, f) in faces.iter().enumerate() {
            if f.width().max_value() >= wmax {
                return Err(Error::Parameter(format!(
                    "strip of ray {k} (width {:.3e}) overlaps neighbouring strips; need < {wmax:.3e} for r = {radius:.3e}",
                    f.width().max_value()
                )));
            }
        }
        let bisectors = (0..m)
            .map(|k| {
                let next = if k + 1 < m { fan.angles[k + 1] } else { fan.angles[0] + std::f64::consts::TAU };
                0.5 * (fan.angles[k] + next)
            })
            .collect();
        let trivial = fan.pieces.iter().all(|p| (p - fan.pieces[0]).amax() <= 1e-12 * (1.0 + p.amax()));
        let mut s = EdgeSmoother {
            fan,
            faces,
            bisectors,
            radius,
            rho: 0.0,
            axial,
            profile: *default_profile(),
            twist: TwistTable { values: vec![0.0; TWIST_SAMPLES] },
            twist_slope: (1.0, 1.0),
            trivial,
        };
        if !trivial {
            s.rho = 0.9 * s.min_planar_image(radius, 17, 9);
            if !(s.rho > 1e-12 * radius) {
                return Err(Error::Construction(format!("squeeze radius search failed (ρ = {:.3e})", s.rho)));
            }
            s.build_twist()?;
        }
        Ok(s)
    }

    pub fn fan(&self) -> &LocalFan {
        &self.fan
    }

    pub fn faces(&self) -> &[FaceBlend] {
        &self.faces
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn stretch(&self) -> f64 {
        self.fan.stretch
    }

    pub fn axial_range(&self) -> (f64, f64) {
        self.axial
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// Range of `∂_θ H` of the untwisting lift.
    pub fn lift_slope_range(&self) -> (f64, f64) {
        self.twist_slope
    }

    /// `max |H(θ) − θ|` of the untwisting lift on its reference slice.
    pub fn max_twist(&self) -> f64 {
        self.twist.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `min |π₃ g̃|` over the annulus `r/2 ≤ t ≤ r` and the axial range.
    fn min_planar_image(&self, r: f64, nt: usize, nc: usize) -> f64 {
        let cs = self.axial_samples(nc);
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        for &c in &cs {
            for i in 0..nt {
                let t = r * (0.5 + 0.5 * i as f64 / (nt - 1) as f64);
                let f = |th: f64| -> f64 {
                    let g = self.wedge(&Vec3::new(t * th.cos(), t * th.sin(), c)).0;
                    g.x.hypot(g.y)
                };
                let (th, v) = grid_min(f, -std::f64::consts::PI, std::f64::consts::PI, TWIST_SAMPLES);
                if v < best.0 {
                    best = (v, t, th, c);
                }
            }
        }
        let (_, t0, th0, c0) = best;
        let dt = r * 0.5 / (nt - 1) as f64;
        let refine_t = |t: f64| {
            let g = self.wedge(&Vec3::new(t * th0.cos(), t * th0.sin(), c0)).0;
            -g.x.hypot(g.y)
        };
        let (_, v) = golden_max(&refine_t, (t0 - dt).max(0.5 * r), (t0 + dt).min(r), 1e-12 * r);
        best.0.min(-v)
    }

    fn axial_samples(&self, n: usize) -> Vec<f64> {
        let const_w = self.faces.iter().all(|f| f.width().is_constant());
        if const_w || self.axial.1 <= self.axial.0 {
            vec![0.5 * (self.axial.0 + self.axial.1)]
        } else {
            (0..n).map(|i| self.axial.0 + (self.axial.1 - self.axial.0) * i as f64 / (n - 1) as f64).collect()
        }
    }

    fn build_twist(&mut self) -> Result<()> {
        let c = 0.5 * (self.axial.0 + self.axial.1);
        let r = self.radius;
        let mut values = Vec::with_capacity(TWIST_SAMPLES);
        let mut slope = (f64::INFINITY, f64::NEG_INFINITY);
        let mut prev: Option<f64> = None;
        for j in 0..TWIST_SAMPLES {
            let th = TwistTable::angle(j);
            let (p0, dp_th, _) = self.ring_image(th, c, r);
            let raw = p0.y.atan2(p0.x) - th;
            let d = match prev {
                None => raw,
                Some(p) => raw + std::f64::consts::TAU * ((p - raw) / std::f64::consts::TAU).round(),
            };
            values.push(d);
            prev = Some(d);
            let h_th = cross2(&p0, &dp_th) / p0.norm_squared();
            slope = (slope.0.min(h_th), slope.1.max(h_th));
        }
        let wrap = values[0] - values[TWIST_SAMPLES - 1];
        let wrap = wrap - std::f64::consts::TAU * (wrap / std::f64::consts::TAU).round();
        let closed = values[TWIST_SAMPLES - 1] + wrap;
        if (closed - values[0]).abs() > 1e-9 || (values[TWIST_SAMPLES - 1] - values[0]).abs() > std::f64::consts::PI {
            return Err(Error::Construction("circle map at radius 3r/5 does not have degree one".into()));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let shift = std::f64::consts::TAU * (mean / std::f64::consts::TAU).round();
        for v in &mut values {
            *v -= shift;
        }
        if !(slope.0 > 0.0) {
            return Err(Error::Construction(format!("untwisting lift is not monotone (min slope {:.3e})", slope.0)));
        }
        for &c2 in &self.axial_samples(9) {
            for j in (0..TWIST_SAMPLES).step_by(8) {
                let th = TwistTable::angle(j);
                let (p0, dp_th, _) = self.ring_image(th, c2, r);
                let h_th = cross2(&p0, &dp_th) / p0.norm_squared();
                if !(h_th > 0.0) {
                    return Err(Error::Construction(format!("untwisting lift not monotone at x₃ = {c2:.3e}")));
                }
                slope = (slope.0.min(h_th), slope.1.max(h_th));
            }
        }
        self.twist = TwistTable { values };
        self.twist_slope = slope;
        Ok(())
    }

    /// Planar image on the circle of radius `⅗r`: `(P₀, ∂_θ P₀, ∂_c P₀)`.
    fn ring_image(&self, th: f64, c: f64, r: f64) -> (Vec2, Vec2, Vec2) {
        let t = 0.6 * r;
        let (g, j) = self.wedge(&Vec3::new(t * th.cos(), t * th.sin(), c));
        let e_th = Vec3::new(-th.sin(), th.cos(), 0.0) * t;
        let d_th = j * e_th;
        let d_c = j.column(2);
        (Vec2::new(g.x, g.y), Vec2::new(d_th.x, d_th.y), Vec2::new(d_c[0], d_c[1]))
    }

    /// Index of the ray whose bisector sector contains angle `th`.
    fn ray_of(&self, th: f64) -> usize {
        let m = self.bisectors.len();
        let mut th = th;
        if th < self.bisectors[m - 1] - std::f64::consts::TAU {
            th += std::f64::consts::TAU;
        }
        for k in 0..m {
            let lo = if k == 0 { self.bisectors[m - 1] - std::f64::consts::TAU } else { self.bisectors[k - 1] };
            if th >= lo && th < self.bisectors[k] {
                return k;
            }
        }
        0
    }

    /// The wedge map `g̃`: the blend of the nearest ray.
    pub fn wedge(&self, x: &Vec3) -> (Vec3, Mat3) {
        let k = self.ray_of(x.y.atan2(x.x));
        self.faces[k].blend_with_jacobian(x)
    }

    /// The piecewise linear fan map itself.
    pub fn fan_map(&self, x: &Vec3) -> Vec3 {
        self.fan.eval(x)
    }

    /// Smoothed map with radius `r` and squeeze radius `rho` in every slice.
    fn slice(&self, x: &Vec3, r: f64, rho: f64) -> (Vec3, Mat3) {
        let t = x.x.hypot(x.y);
        if self.trivial || t >= r {
            return self.wedge(x);
        }
        let lam = self.fan.stretch;
        let c = x.z;
        let k = rho / r;
        if t < 0.4 * r {
            let g = Vec3::new(k * x.x, k * x.y, lam * c);
            return (g, Mat3::from_diagonal(&Vec3::new(k, k, lam)));
        }
        let th = x.y.atan2(x.x);
        let (cs, sn) = (th.cos(), th.sin());
        let e_t = RowVector3::new(cs, sn, 0.0);
        let e_th = RowVector3::new(-sn, cs, 0.0);
        let e_3 = RowVector3::new(0.0, 0.0, 1.0);
        let p = &self.profile;
        if t >= 0.8 * r {
            let (gw, jw) = self.wedge(x);
            let s1 = 5.0 * t / r - 4.0;
            let e = p.eta(s1);
            let de = p.eta_prime(s1);
            let g = Vec3::new(gw.x, gw.y, (1.0 - e) * lam * c + e * gw.z);
            let mut j = jw;
            let row = e_3 * ((1.0 - e) * lam) + jw.row(2) * e + e_t * (de * 5.0 / r * (gw.z - lam * c));
            j.set_row(2, &row);
            return (g, j);
        }
        let mut j = Mat3::zeros();
        j[(2, 2)] = lam;
        if t >= 0.6 * r {
            let (gw, jw) = self.wedge(x);
            let pp = Vec2::new(gw.x, gw.y);
            let dp: Matrix2x3<f64> = jw.fixed_rows::<2>(0).into_owned();
            let (p0, dp0_th, dp0_c) = self.ring_image(th, c, r);
            let n0 = p0.norm();
            let h = p0 / n0;
            let proj = nalgebra::Matrix2::identity() - h * h.transpose();
            let dh_th = proj * dp0_th / n0;
            let dh_c = proj * dp0_c / n0;
            let dh: Matrix2x3<f64> = dh_th * (e_th / t) + dh_c * e_3;
            let s2 = 5.0 * t / r - 3.0;
            let e = p.eta(s2);
            let de = p.eta_prime(s2);
            let rad = t * k;
            let q = pp * e + h * ((1.0 - e) * rad);
            let dq: Matrix2x3<f64> =
                dp * e + (pp - h * rad) * (e_t * (de * 5.0 / r)) + (h * e_t * k + dh * rad) * (1.0 - e);
            j.fixed_rows_mut::<2>(0).copy_from(&dq);
            return (Vec3::new(q.x, q.y, lam * c), j);
        }
        let tau = 5.0 * t / r - 2.0;
        let s = p.time(tau);
        let ds = p.time_prime(tau);
        let (d, d_th, d_c) = self.twist_at(th, c, r);
        let phi = th + s * d;
        let dphi = e_t * (ds * 5.0 / r * d) + e_th * ((1.0 + s * d_th) / t) + e_3 * (s * d_c);
        let rad = t * k;
        let u = Vector2::new(phi.cos(), phi.sin());
        let up = Vector2::new(-phi.sin(), phi.cos());
        let dq: Matrix2x3<f64> = u * e_t * k + up * dphi * rad;
        j.fixed_rows_mut::<2>(0).copy_from(&dq);
        (Vec3::new(rad * u.x, rad * u.y, lam * c), j)
    }

    /// Twist `δ = H − θ` on the branch of the reference table, with `∂_θ δ`
    /// and `∂_c δ`.
    fn twist_at(&self, th: f64, c: f64, r: f64) -> (f64, f64, f64) {
        let (p0, dp_th, dp_c) = self.ring_image(th, c, r);
        let n2 = p0.norm_squared();
        let raw = p0.y.atan2(p0.x) - th;
        let d = self.twist.branch(th, raw);
        (d, cross2(&p0, &dp_th) / n2 - 1.0, cross2(&p0, &dp_c) / n2)
    }

    /// The smoothed map and its derivative.
    pub fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        self.slice(x, self.radius, self.rho)
    }

    /// Samples the determinant on a cylindrical grid covering `t ≤ extent·r`;
    /// returns the minimum and its location.
    pub fn jacobian_floor(&self, n: usize, extent: f64) -> (f64, Vec3) {
        let (c0, c1) = self.axial;
        let cs: Vec<f64> =
            if c1 > c0 { (0..n).map(|i| c0 + (c1 - c0) * (i as f64 + 0.5) / n as f64).collect() } else { vec![c0] };
        let mut best = (f64::INFINITY, Vec3::zeros());
        for &c in &cs {
            for i in 0..n {
                let t = extent * self.radius * (i as f64 + 0.5) / n as f64;
                for jth in 0..n {
                    let th = -std::f64::consts::PI + std::f64::consts::TAU * (jth as f64 + 0.5) / n as f64;
                    let x = Vec3::new(t * th.cos(), t * th.sin(), c);
                    let d = self.slice(&x, self.radius, self.rho).1.determinant();
                    if d < best.0 {
                        best = (d, x);
                    }
                }
            }
        }
        best
    }

    /// The same construction with `(r, w, ρ)` scaled by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<EdgeSmoother> {
        let faces = self.faces.iter().map(|f| f.with_width(f.width().scaled(lambda))).collect::<Result<Vec<_>>>()?;
        EdgeSmoother::from_blends(
            self.fan.clone(),
            faces,
            self.radius * lambda,
            (self.axial.0 * lambda, self.axial.1 * lambda),
        )
    }
}

impl Map3 for EdgeSmoother {
    fn eval(&self, x: &Vec3) -> Vec3 {
        self.eval_with_jacobian(x).0
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.eval_with_jacobian(x).1
    }

    fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        EdgeSmoother::eval_with_jacobian(self, x)
    }
}

#[inline]
fn cross2(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Lift of a circle map: `θ ↦ (H(θ), H′(θ))` with `H(θ+2π) = H(θ) + 2π`.
pub trait CircleLift: Send + Sync {
    fn lift(&self, theta: f64) -> (f64, f64);
}

/// Lift given by a closure returning `(H, H′)`.
pub struct ClosedFormLift<F>(pub F);

impl<F: Fn(f64) -> (f64, f64) + Send + Sync> CircleLift for ClosedFormLift<F> {
    fn lift(&self, theta: f64) -> (f64, f64) {
        (self.0)(theta)
    }
}

/// Lift given by samples on a uniform grid of `[0, 2π)`, interpolated by a
/// periodic cubic Hermite spline.
#[derive(Clone, Debug)]
pub struct SampledLift {
    twist: Vec<f64>,
    slopes: Vec<f64>,
}

impl SampledLift {
    /// `values[j] = H(2πj/n)`.
    pub fn new(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 4 {
            return Err(Error::InvalidInput("a sampled lift needs at least four samples".into()));
        }
        let h = std::f64::consts::TAU / n as f64;
        let twist: Vec<f64> = values.iter().enumerate().map(|(j, v)| v - h * j as f64).collect();
        let slopes = (0..n).map(|j| (twist[(j + 1) % n] - twist[(j + n - 1) % n]) / (2.0 * h)).collect();
        Ok(SampledLift { twist, slopes })
    }
}

impl CircleLift for SampledLift {
    fn lift(&self, theta: f64) -> (f64, f64) {
        let n = self.twist.len();
        let h = std::f64::consts::TAU / n as f64;
        let u = theta.rem_euclid(std::f64::consts::TAU) / h;
        let j = (u.floor() as usize).min(n - 1);
        let s = u - j as f64;
        let (p0, p1) = (self.twist[j], self.twist[(j + 1) % n]);
        let (m0, m1) = (self.slopes[j] * h, self.slopes[(j + 1) % n] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v =
            (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1;
        let dv = ((6.0 * s2 - 6.0 * s) * p0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * p1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        (theta + v, 1.0 + dv)
    }
}

/// Isotopy `α(θ, t) = (1 − s(t)) θ + s(t) H(θ)` from the identity to a circle
/// diffeomorphism.
pub struct CircleIsotopy {
    lift: Box<dyn CircleLift>,
    profile: BlendProfile,
    slope_range: (f64, f64),
    twist_sup: f64,
}

impl CircleIsotopy {
    pub fn new(lift: Box<dyn CircleLift>) -> Result<Self> {
        let n = 4096;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut twist = 0.0f64;
        for j in 0..n {
            let th = std::f64::consts::TAU * j as f64 / n as f64;
            let (h, dh) = lift.lift(th);
            lo = lo.min(dh);
            hi = hi.max(dh);
            twist = twist.max((h - th).abs());
        }
        if !(lo > 0.0) {
            return Err(Error::InvalidInput(format!("lift is not strictly increasing (min H′ = {lo:.3e})")));
        }
        let period = lift.lift(std::f64::consts::TAU).0 - lift.lift(0.0).0;
        if (period - std::f64::consts::TAU).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("lift is not of degree one (H(2π) − H(0) = {period:.6})")));
        }
        Ok(CircleIsotopy { lift, profile: *default_profile(), slope_range: (lo, hi), twist_sup: twist })
    }

    pub fn from_fn<F: Fn(f64) -> (f64, f64) + Send + Sync + 'static>(f: F) -> Result<Self> {
        Self::new(Box::new(ClosedFormLift(f)))
    }

    pub fn alpha(&self, theta: f64, t: f64) -> f64 {
        let s = self.profile.time(t);
        let (h, _) = self.lift.lift(theta);
        theta + s * (h - theta)
    }

    pub fn alpha_theta(&self, theta: f64, t: f64) -> f64 {
        let s = self.profile.time(t);
        let (_, dh) = self.lift.lift(theta);
        (1.0 - s) + s * dh
    }

    pub fn alpha_t(&self, theta: f64, t: f64) -> f64 {
        let (h, _) = self.lift.lift(theta);
        self.profile.time_prime(t) * (h - theta)
    }

    /// Sampled `(inf H′, sup H′)`; `∂_θ α` lies between `min(1, inf)` and `max(1, sup)`.
    pub fn slope_range(&self) -> (f64, f64) {
        self.slope_range
    }

    /// Bound on `|∂_t α|`: `sup s′ · sup |H − θ|`.
    pub fn time_derivative_bound(&self) -> f64 {
        3.0 * self.profile.sup_eta_prime() * self.twist_sup
    }
}

/// An edge smoother whose cylinder radius varies along the axis.
pub struct VariableRadiusSmoother {
    base: EdgeSmoother,
    profile: RadiusProfile,
    rho_ratio: f64,
}

/// Outcome of certifying a variable-radius smoother.
#[derive(Clone, Debug, serde::Serialize)]
pub struct VariableRadiusReport {
    pub slope_bound: f64,
    pub floor: f64,
    pub reference_floor: f64,
    pub samples: usize,
    pub witness: [f64; 3],
    pub passed: bool,
}

impl VariableRadiusSmoother {
    /// `base` must be certified at the smallest radius the profile reaches on
    /// the base smoother's axial range.
    pub fn new(base: EdgeSmoother, profile: RadiusProfile) -> Result<Self> {
        let (c0, c1) = base.axial;
        let radii: Vec<f64> = (0..33).map(|i| profile.radius(c0 + (c1 - c0) * i as f64 / 32.0).0).collect();
        let rmin = radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let rmax = radii.iter().cloned().fold(0.0, f64::max);
        if !(rmin > 0.0) {
            return Err(Error::Parameter("radius profile reaches zero on the axial range".into()));
        }
        let wmax = max_width_for_radius(base.fan.min_gap(), rmin);
        if base.faces.iter().any(|f| f.width().max_value() >= wmax) {
            return Err(Error::Parameter(format!("widths too large for the smallest radius {rmin:.3e}")));
        }
        if base.trivial {
            return Ok(VariableRadiusSmoother { base, profile, rho_ratio: 0.0 });
        }
        let mut ratio = f64::INFINITY;
        for i in 0..5 {
            let r = rmin + (rmax - rmin) * i as f64 / 4.0;
            ratio = ratio.min(0.9 * base.min_planar_image(r, 9, 5) / r);
        }
        Ok(VariableRadiusSmoother { base, profile, rho_ratio: ratio })
    }

    pub fn base(&self) -> &EdgeSmoother {
        &self.base
    }

    pub fn rho_ratio(&self) -> f64 {
        self.rho_ratio
    }

    pub fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (r, dr) = self.profile.radius(x.z);
        let rho = if matches!(self.profile, RadiusProfile::Constant(_)) { self.base.rho } else { self.rho_ratio * r };
        let (g, mut j) = self.base.slice(x, r, rho);
        if dr != 0.0 && x.x.hypot(x.y) < r * 1.000001 {
            let h = 1e-6 * r;
            let gp = self.base.slice(x, r + h, self.rho_ratio * (r + h)).0;
            let gm = self.base.slice(x, r - h, self.rho_ratio * (r - h)).0;
            let dg_dr = (gp - gm) / (2.0 * h);
            let col = j.column(2) + dg_dr * dr;
            j.set_column(2, &col);
        }
        (g, j)
    }

    /// Samples the Jacobian over the variable cylinder and compares it with
    /// half the constant-radius floor.
    pub fn certify(&self, n: usize) -> VariableRadiusReport {
        let reference = self.base.jacobian_floor(n.min(48), 1.0).0;
        let (c0, c1) = self.base.axial;
        let mut best = (f64::INFINITY, Vec3::zeros());
        let mut count = 0;
        for ic in 0..n {
            let c = c0 + (c1 - c0) * (ic as f64 + 0.5) / n as f64;
            let (r, _) = self.profile.radius(c);
            for i in 0..n {
                let t = r * (i as f64 + 0.5) / n as f64;
                for jt in 0..n {
                    let th = -std::f64::consts::PI + std::f64::consts::TAU * (jt as f64 + 0.5) / n as f64;
                    let x = Vec3::new(t * th.cos(), t * th.sin(), c);
                    let d = self.eval_with_jacobian(&x).1.determinant();
                    count += 1;
                    if d < best.0 {
                        best = (d, x);
                    }
                }
            }
        }
        VariableRadiusReport {
            slope_bound: self.profile.slope_bound(),
            floor: best.0,
            reference_floor: reference,
            samples: count,
            witness: [best.1.x, best.1.y, best.1.z],
            passed: best.0 >= 0.5 * reference,
        }
    }
}

impl Map3 for VariableRadiusSmoother {
    fn eval(&self, x: &Vec3) -> Vec3 {
        self.eval_with_jacobian(x).0
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.eval_with_jacobian(x).1
    }

    fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        VariableRadiusSmoother::eval_with_jacobian(self, x)
    }
}

/// Result of the σ̃ halving sweep.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SigmaTildeReport {
    pub sigma_tilde: f64,
    pub halvings: usize,
    pub floor: f64,
    pub reference_floor: f64,
}

/// Halves a gradient bound, starting from the smallest face σ, until ramped
/// widths with that gradient keep the sampled Jacobian floor above half the
/// constant-width floor.
pub fn certify_sigma_tilde(fan: &LocalFan, width: f64, radius: f64, grid: usize) -> Result<SigmaTildeReport> {
    let m = fan.angles.len();
    let constant = EdgeSmoother::new(fan.clone(), vec![WidthField::constant(width); m], radius, (0.0, 0.0))?;
    let reference = constant.jacobian_floor(grid, 1.25).0;
    let mut sigma = constant.faces().iter().map(|f| f.certificate().sigma).fold(f64::INFINITY, f64::min).min(1.0);
    for halvings in 0..40 {
        let length = width / sigma;
        let ramp = WidthField::Ramp(RampWidth {
            base: 0.5 * width,
            delta: 0.5 * width,
            factors: vec![RampFactor { direction: Vec2::new(1.0, 0.0), start: 0.0, length }],
        });
        let attempt = EdgeSmoother::new(fan.clone(), vec![ramp; m], radius, (-0.25 * length, 1.25 * length));
        if let Ok(s) = attempt {
            let floor = s.jacobian_floor(grid, 1.25).0;
            if floor >= 0.5 * reference {
                return Ok(SigmaTildeReport { sigma_tilde: sigma, halvings, floor, reference_floor: reference });
            }
        }
        sigma *= 0.5;
    }
    Err(Error::Certification("σ̃ sweep did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Four sectors at right angles; pieces stretch `x₁` by 2 on `x₁ > 0`.
    pub(crate) fn orthogonal_fan() -> LocalFan {
        let pi = std::f64::consts::PI;
        let a = Mat3::identity();
        let b = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
        LocalFan { angles: vec![-pi, -0.5 * pi, 0.0, 0.5 * pi], pieces: vec![a, b, b, a], stretch: 1.0 }
    }

    fn smoother(r: f64) -> EdgeSmoother {
        let fan = orthogonal_fan();
        let w = 0.5 * max_width_for_radius(fan.min_gap(), r);
        EdgeSmoother::new(fan, vec![WidthField::constant(w); 4], r, (0.0, 0.0)).unwrap()
    }

    #[test]
    fn trivial_fan_is_the_map() {
        let rot = Mat3::new(0.0, -1.5, 0.0, 1.5, 0.0, 0.0, 0.0, 0.0, 1.0);
        let pi = std::f64::consts::PI;
        let fan = LocalFan { angles: vec![-pi, -pi / 3.0, pi / 3.0], pieces: vec![rot; 3], stretch: 1.0 };
        let s = EdgeSmoother::new(fan, vec![WidthField::constant(0.001); 3], 1.0, (0.0, 0.0)).unwrap();
        let x = Vec3::new(0.1, 0.2, 0.3);
        assert_eq!(s.eval_with_jacobian(&x).0, rot * x);
        assert!(s.is_trivial());
    }

    #[test]
    fn continuity_at_cylinder_boundary() {
        let s = smoother(1.0);
        for j in 0..1000 {
            let th = std::f64::consts::TAU * j as f64 / 1000.0;
            let x = Vec3::new(th.cos(), th.sin(), 0.3);
            let inner = s.slice(&(x * (1.0 - 1e-12)), 1.0, s.rho()).0;
            assert!((inner - s.wedge(&x).0).norm() < 1e-10);
        }
    }

    #[test]
    fn wide_strips_are_rejected() {
        let fan = orthogonal_fan();
        let w = 1.01 * max_width_for_radius(fan.min_gap(), 1.0);
        assert!(matches!(
            EdgeSmoother::new(fan, vec![WidthField::constant(w); 4], 1.0, (0.0, 0.0)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn rotation_isotopy() {
        let iso = CircleIsotopy::from_fn(|t| (t + 0.7, 1.0)).unwrap();
        for i in 0..10 {
            let t = i as f64 / 9.0;
            let s = default_profile().time(t);
            assert!((iso.alpha(0.4, t) - (0.4 + s * 0.7)).abs() < 1e-15);
        }
    }

    #[test]
    fn nonmonotone_lift_is_rejected() {
        assert!(CircleIsotopy::from_fn(|t| (t + 1.5 * t.sin(), 1.0 + 1.5 * t.cos())).is_err());
    }

    #[test]
    fn sampled_lift_reproduces_smooth_lift() {
        let n = 256;
        let vals: Vec<f64> = (0..n)
            .map(|j| {
                let t = std::f64::consts::TAU * j as f64 / n as f64;
                t + 0.3 * t.sin()
            })
            .collect();
        let l = SampledLift::new(&vals).unwrap();
        for t in [0.1, 1.0, 2.5, 6.0] {
            let (h, dh) = l.lift(t);
            assert!((h - (t + 0.3 * t.sin())).abs() < 1e-6);
            assert!((dh - (1.0 + 0.3 * t.cos())).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_profile_reproduces_base() {
        let s = smoother(1.0);
        let v = VariableRadiusSmoother::new(s.clone(), RadiusProfile::Constant(1.0)).unwrap();
        for x in [Vec3::new(0.3, 0.1, 0.0), Vec3::new(-0.5, 0.6, 0.2), Vec3::new(0.05, -0.7, -1.0)] {
            assert_eq!(v.eval_with_jacobian(&x), s.eval_with_jacobian(&x));
        }
    }
}
