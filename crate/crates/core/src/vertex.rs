//! Smoothing around a vertex: the sphere map of the outer construction, its
//! degree, radial flattening onto a small sphere, and an isotopy that reduces
//! the inner ball to a dilation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blend::{default_profile, BlendProfile};
use crate::error::{Error, Result};
use crate::geom::{complete_basis, to_array, Map3, Mat3, Vec3};
use crate::quadrature::sphere_grid;

/// A map of the unit sphere to itself with its derivative.
pub trait SphereMap: Send + Sync {
    /// `μ(u)` and a matrix whose action on tangent vectors at `u` is `dμ_u`.
    fn eval_with_derivative(&self, u: &Vec3) -> (Vec3, Mat3);

    fn eval(&self, u: &Vec3) -> Vec3 {
        self.eval_with_derivative(u).0
    }
}

/// Signed area factor of `dμ_u`, oriented by the outward normals at `u` and `μ(u)`.
pub fn tangent_det(mu: &dyn SphereMap, u: &Vec3) -> f64 {
    let (m, d) = mu.eval_with_derivative(u);
    let (a, b) = complete_basis(u);
    m.dot(&(d * a).cross(&(d * b)))
}

/// `u ↦ normalize(M u)`.
#[derive(Clone, Debug)]
pub struct LinearSphereMap(pub Mat3);

impl SphereMap for LinearSphereMap {
    fn eval_with_derivative(&self, u: &Vec3) -> (Vec3, Mat3) {
        let v = self.0 * u;
        let n = v.norm();
        let m = v / n;
        (m, (Mat3::identity() - m * m.transpose()) * self.0 / n)
    }
}

/// `u ↦ normalize(map(center + radius·u) − image_center)`.
#[derive(Clone)]
pub struct NormalizedMap {
    pub map: Arc<dyn Map3>,
    pub center: Vec3,
    pub radius: f64,
    pub image_center: Vec3,
}

impl SphereMap for NormalizedMap {
    fn eval_with_derivative(&self, u: &Vec3) -> (Vec3, Mat3) {
        let (g, j) = self.map.eval_with_jacobian(&(self.center + u * self.radius));
        let v = g - self.image_center;
        let n = v.norm();
        let m = v / n;
        (m, (Mat3::identity() - m * m.transpose()) * j * (self.radius / n))
    }
}

/// Sphere map given by a closure returning `(μ(u), dμ_u)`.
pub struct FnSphereMap<F>(pub F);

impl<F: Fn(&Vec3) -> (Vec3, Mat3) + Send + Sync> SphereMap for FnSphereMap<F> {
    fn eval_with_derivative(&self, u: &Vec3) -> (Vec3, Mat3) {
        (self.0)(u)
    }
}

/// Vertices of the icosahedron subdivided `level` times, on the unit sphere.
pub fn icosphere(level: usize) -> Vec<Vec3> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            next.extend([[f[0], ab, ca], [f[1], bc, ab], [f[2], ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts
}

/// Result of a degree computation.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DegreeReport {
    pub degree: i64,
    /// Signed preimage count.
    pub newton_count: i64,
    pub preimages: usize,
    /// `∫ det dμ / 4π` on the full and half-order grids.
    pub integral: f64,
    pub integral_half: f64,
    pub regular_value: [f64; 3],
    pub retries: usize,
}

/// Solves `μ(u) = y` from `seed` by tangent-plane Newton with retraction.
fn sphere_newton(mu: &dyn SphereMap, y: &Vec3, seed: &Vec3) -> Option<Vec3> {
    let mut u = *seed;
    for _ in 0..30 {
        let (m, d) = mu.eval_with_derivative(&u);
        let r = y - m;
        if r.norm() < 1e-12 {
            return Some(u);
        }
        let (a, b) = complete_basis(&u);
        let (c, e) = complete_basis(&m);
        let rt = r - m * r.dot(&m);
        let (da, db) = (d * a, d * b);
        let j = nalgebra::Matrix2::new(c.dot(&da), c.dot(&db), e.dot(&da), e.dot(&db));
        let rhs = nalgebra::Vector2::new(c.dot(&rt), e.dot(&rt));
        let step = j.try_inverse()? * rhs;
        let mut v = a * step.x + b * step.y;
        if v.norm() > 0.5 {
            v *= 0.5 / v.norm();
        }
        u = (u + v).normalize();
    }
    let r = (y - mu.eval(&u)).norm();
    (r < 1e-10).then_some(u)
}

/// `∫ det dμ / 4π` on a Gauss × uniform product grid.
pub fn integral_degree(mu: &dyn SphereMap, nz: usize) -> f64 {
    sphere_grid(nz, 2 * nz).iter().map(|(u, w)| w * tangent_det(mu, u)).sum::<f64>() / (4.0 * std::f64::consts::PI)
}

fn newton_degree(mu: &dyn SphereMap, y: &Vec3, seeds: &[Vec3]) -> Option<(i64, usize)> {
    let mut found: Vec<Vec3> = Vec::new();
    for s in seeds {
        if let Some(u) = sphere_newton(mu, y, s) {
            if !found.iter().any(|f| (f - u).norm() < 1e-7) {
                found.push(u);
            }
        }
    }
    let mut count = 0;
    for u in &found {
        let d = tangent_det(mu, u);
        if d.abs() < 1e-8 {
            return None;
        }
        count += d.signum() as i64;
    }
    Some((count, found.len()))
}

/// Degree of `μ` by signed preimage counting, cross-checked against the
/// integral degree. A near-critical `y` is replaced by a random nearby value.
pub fn degree(mu: &dyn SphereMap, y: &Vec3, seed: u64) -> Result<DegreeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (level, nz) in [(3, 32), (4, 64)] {
        let seeds = icosphere(level);
        let integral = integral_degree(mu, nz);
        let integral_half = integral_degree(mu, nz / 2);
        let rounded = integral.round();
        let sound = (integral - rounded).abs() <= 0.1 && (integral_half - rounded).abs() <= 0.1;
        let mut y = y.normalize();
        for retries in 0..6 {
            if let Some((count, n)) = newton_degree(mu, &y, &seeds) {
                if sound && count == rounded as i64 {
                    return Ok(DegreeReport {
                        degree: count,
                        newton_count: count,
                        preimages: n,
                        integral,
                        integral_half,
                        regular_value: to_array(&y),
                        retries,
                    });
                }
                break;
            }
            let jitter = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            y = (y + jitter * 1e-3).normalize();
        }
    }
    Err(Error::Numerical("preimage count and integral degree disagree after refinement".into()))
}

/// Certified bounds of the outer map on the flattening shell.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RadialReport {
    /// Minimum tangential subdeterminant of `Dĝ` in the moving frames.
    pub delta_floor: f64,
    /// Minimum of `⟨D_{x/|x|} ĝ, ĝ/|ĝ|⟩`.
    pub radial_floor: f64,
    /// Minimum of `|ĝ(x) − ĝ(V)| / |x − V|`.
    pub min_ratio: f64,
    pub samples: usize,
    pub witness: [f64; 3],
    pub seed: u64,
}

/// Samples `Δ` and radial monotonicity of `ĝ` on the shell `¾R ≤ |x − V| ≤ R`.
pub fn certify_radial_subdeterminant(
    hat_g: &dyn Map3,
    center: &Vec3,
    image_center: &Vec3,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<RadialReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = RadialReport {
        delta_floor: f64::INFINITY,
        radial_floor: f64::INFINITY,
        min_ratio: f64::INFINITY,
        samples,
        witness: [0.0; 3],
        seed,
    };
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let u = loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break v / n;
            }
        };
        let r = radius * rng.gen_range(0.75..=1.0);
        let x = center + u * r;
        let (g, j) = hat_g.eval_with_jacobian(&x);
        let v = g - image_center;
        let nv = v.norm();
        let m = v / nv;
        let (a, b) = complete_basis(&u);
        let (c, e) = complete_basis(&m);
        let (ja, jb) = (j * a, j * b);
        let delta = c.dot(&ja) * e.dot(&jb) - c.dot(&jb) * e.dot(&ja);
        let radial = m.dot(&(j * u));
        rep.delta_floor = rep.delta_floor.min(delta);
        rep.radial_floor = rep.radial_floor.min(radial);
        rep.min_ratio = rep.min_ratio.min(nv / r);
        let score = delta.min(radial);
        if score < worst {
            worst = score;
            rep.witness = to_array(&x);
        }
    }
    if rep.delta_floor < 1e-6 || rep.radial_floor < 1e-6 {
        return Err(Error::Certification(format!(
            "vertex shell: Δ floor {:.3e}, radial floor {:.3e} at {:?}",
            rep.delta_floor, rep.radial_floor, rep.witness
        )));
    }
    Ok(rep)
}

/// Family of sphere maps `Ψ(·, s)` from the identity (`s = 0`) to a target
/// (`s = 1`).
pub trait SphereIsotopy: Send + Sync {
    /// `Ψ(u, s)`, its tangential derivative in `u`, and `∂_s Ψ`.
    fn eval(&self, u: &Vec3, s: f64) -> (Vec3, Mat3, Vec3);
}

/// `Ψ(u, s) = normalize((1 − s) u + s μ(u))`.
#[derive(Clone)]
pub struct LinearIsotopy {
    pub target: Arc<dyn SphereMap>,
}

impl SphereIsotopy for LinearIsotopy {
    fn eval(&self, u: &Vec3, s: f64) -> (Vec3, Mat3, Vec3) {
        let (m, dm) = self.target.eval_with_derivative(u);
        let q = u * (1.0 - s) + m * s;
        let n = q.norm();
        let psi = q / n;
        let proj = (Mat3::identity() - psi * psi.transpose()) / n;
        (psi, proj * (Mat3::identity() * (1.0 - s) + dm * s), proj * (m - u))
    }
}

/// A single stage of an isotopy viewed as a sphere map.
struct Stage<'a> {
    iso: &'a dyn SphereIsotopy,
    s: f64,
}

impl SphereMap for Stage<'_> {
    fn eval_with_derivative(&self, u: &Vec3) -> (Vec3, Mat3) {
        let (p, d, _) = self.iso.eval(u, self.s);
        (p, d)
    }
}

/// Outcome of certifying an isotopy at sampled times.
#[derive(Clone, Debug, serde::Serialize)]
pub struct IsotopyReport {
    pub stages: usize,
    pub min_interpolant: f64,
    pub det_floor: f64,
    pub degrees: Vec<i64>,
}

/// Checks each stage `Ψ(·, k/n)`: positive tangential Jacobian on an
/// icosphere and degree one. For the linear isotopy, also checks that the
/// interpolant stays away from zero.
pub fn certify_isotopy(
    iso: &dyn SphereIsotopy,
    target: &dyn SphereMap,
    stages: usize,
    seed: u64,
) -> Result<IsotopyReport> {
    let pts = icosphere(4);
    let mut min_q = f64::INFINITY;
    for u in &pts {
        let m = target.eval(u);
        for k in 0..=stages {
            let s = k as f64 / stages as f64;
            min_q = min_q.min((u * (1.0 - s) + m * s).norm());
        }
    }
    let mut det_floor = f64::INFINITY;
    let mut degrees = Vec::with_capacity(stages + 1);
    for k in 0..=stages {
        let stage = Stage { iso, s: k as f64 / stages as f64 };
        for u in &pts {
            det_floor = det_floor.min(tangent_det(&stage, u));
        }
        let d = degree(&stage, &Vec3::new(0.267, 0.535, 0.802), seed + k as u64)?;
        degrees.push(d.degree);
    }
    let rep = IsotopyReport { stages: stages + 1, min_interpolant: min_q, det_floor, degrees };
    if !(det_floor > 0.0) || rep.degrees.iter().any(|&d| d != 1) {
        return Err(Error::NoIsotopyFound(format!(
            "isotopy stage fails: Jacobian floor {det_floor:.3e}, degrees {:?}",
            rep.degrees
        )));
    }
    Ok(rep)
}

/// The vertex construction around `center`.
pub struct VertexSmoother {
    center: Vec3,
    image_center: Vec3,
    radius: f64,
    kappa: f64,
    hat_g: Arc<dyn Map3>,
    isotopy: Arc<dyn SphereIsotopy>,
    profile: BlendProfile,
    radial: RadialReport,
    degree: DegreeReport,
    isotopy_report: IsotopyReport,
}

impl VertexSmoother {
    /// Builds the vertex map with the default linear isotopy.
    pub fn new(hat_g: Arc<dyn Map3>, center: Vec3, image_center: Vec3, radius: f64, seed: u64) -> Result<Self> {
        Self::with_isotopy(hat_g, center, image_center, radius, seed, None)
    }

    /// `isotopy` replaces the default provider when given.
    pub fn with_isotopy(
        hat_g: Arc<dyn Map3>,
        center: Vec3,
        image_center: Vec3,
        radius: f64,
        seed: u64,
        isotopy: Option<Arc<dyn SphereIsotopy>>,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Parameter(format!("vertex radius {radius} must be positive")));
        }
        let radial = certify_radial_subdeterminant(&*hat_g, &center, &image_center, radius, 100_000, seed)?;
        let kappa = 0.45 * radial.min_ratio;
        let mu0: Arc<dyn SphereMap> =
            Arc::new(NormalizedMap { map: hat_g.clone(), center, radius: 0.75 * radius, image_center });
        let degree = degree(&*mu0, &Vec3::new(0.6, -0.48, 0.64), seed)?;
        if degree.degree != 1 {
            return Err(Error::NoIsotopyFound(format!("sphere map at ¾R has degree {}", degree.degree)));
        }
        let isotopy = isotopy.unwrap_or_else(|| Arc::new(LinearIsotopy { target: mu0.clone() }));
        let isotopy_report = certify_isotopy(&*isotopy, &*mu0, 10, seed)?;
        Ok(VertexSmoother {
            center,
            image_center,
            radius,
            kappa,
            hat_g,
            isotopy,
            profile: *default_profile(),
            radial,
            degree,
            isotopy_report,
        })
    }

    /// Replaces the inner dilation factor. Radial monotonicity of the
    /// flattening needs `κ|x − V| ≤ |ĝ(x) − V′|` on the shell.
    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= self.radial.min_ratio * (1.0 + 1e-12)) {
            return Err(Error::Parameter(format!("κ = {kappa:.3e} outside (0, {:.3e}]", self.radial.min_ratio)));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn image_center(&self) -> Vec3 {
        self.image_center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Inner dilation factor: `g(x) = V' + κ (x − V)` on `B(V, R/2)`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Radius of the sphere `g(∂B(V, ¾R))`.
    pub fn rho(&self) -> f64 {
        0.75 * self.radius * self.kappa
    }

    pub fn radial_report(&self) -> &RadialReport {
        &self.radial
    }

    pub fn degree_report(&self) -> &DegreeReport {
        &self.degree
    }

    pub fn isotopy_report(&self) -> &IsotopyReport {
        &self.isotopy_report
    }

    pub fn hat_g(&self) -> &Arc<dyn Map3> {
        &self.hat_g
    }

    /// Smallest tangential Jacobian of the isotopy stages `s = k/stages` over
    /// the given unit directions, with its direction.
    pub fn isotopy_floor_at(&self, dirs: &[Vec3], stages: usize) -> (f64, Vec3) {
        let mut best = (f64::INFINITY, Vec3::z());
        for k in 0..=stages {
            let stage = Stage { iso: &*self.isotopy, s: k as f64 / stages.max(1) as f64 };
            for u in dirs {
                let d = tangent_det(&stage, u);
                if d < best.0 {
                    best = (d, *u);
                }
            }
        }
        best
    }

    /// Radius on which the flattening shell samples the direction of `ĝ`.
    fn sample_radius(&self, r: f64) -> (f64, f64) {
        let big_r = self.radius;
        let sig = (4.0 * r - 3.0 * big_r) / big_r;
        let e = self.profile.eta(sig);
        let de = self.profile.eta_prime(sig) * 4.0 / big_r;
        (0.75 * big_r + (r - 0.75 * big_r) * e, e + (r - 0.75 * big_r) * de)
    }

    /// The smoothed map near the vertex, equal to `ĝ` outside `B(V, R)`.
    pub fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        let d = x - self.center;
        let r = d.norm();
        let big_r = self.radius;
        if r >= big_r {
            return self.hat_g.eval_with_jacobian(x);
        }
        let k = self.kappa;
        if r <= 0.5 * big_r {
            return (self.image_center + d * k, Mat3::identity() * k);
        }
        let u = d / r;
        if r < 0.75 * big_r {
            let tang = (Mat3::identity() - u * u.transpose()) / r;
            let sig = (4.0 * r - 2.0 * big_r) / big_r;
            let s = self.profile.eta(sig);
            let ds = self.profile.eta_prime(sig) * 4.0 / big_r;
            let (psi, dpsi, dpsi_s) = self.isotopy.eval(&u, s);
            let j = psi * u.transpose() * k + (dpsi * tang + dpsi_s * u.transpose() * ds) * (k * r);
            return (self.image_center + psi * (k * r), j);
        }
        let (a, da) = self.sample_radius(r);
        let z = self.center + u * a;
        let (gz, jz) = self.hat_g.eval_with_jacobian(&z);
        let dz = u * u.transpose() * da + (Mat3::identity() - u * u.transpose()) * (a / r);
        let big_g = gz - self.image_center;
        let dg = jz * dz;
        let ng = big_g.norm();
        let n = big_g / ng;
        let dn = (Mat3::identity() - n * n.transpose()) * dg / ng;
        let (gx, jx) = self.hat_g.eval_with_jacobian(x);
        let vx = gx - self.image_center;
        let nx = vx.norm();
        let sig = (4.0 * r - 3.0 * big_r) / big_r;
        let e = self.profile.eta(sig);
        let de = self.profile.eta_prime(sig) * 4.0 / big_r;
        let m = e * nx + (1.0 - e) * k * r;
        let grad_m = u.transpose() * (de * (nx - k * r) + (1.0 - e) * k) + (vx.transpose() * jx) * (e / nx);
        (self.image_center + n * m, n * grad_m + dn * m)
    }
}

impl Map3 for VertexSmoother {
    fn eval(&self, x: &Vec3) -> Vec3 {
        self.eval_with_jacobian(x).0
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.eval_with_jacobian(x).1
    }

    fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        VertexSmoother::eval_with_jacobian(self, x)
    }
}
