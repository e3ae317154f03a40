//! Certification checks shared by the construction modules: analytic versus
//! finite-difference derivatives, Jacobian floors on grids, and a global
//! injectivity audit with reproducible witnesses.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geom::{fro, tet_volume, to_array, Affine, Map3, Mat3, Vec3};
use crate::numeric::par_map;

/// Outcome of one check. `passed` holds exactly when `worst ≤ tolerance`.
#[derive(Clone, Debug, Serialize)]
pub struct CertificationReport {
    pub check: String,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub witness: Option<[f64; 3]>,
    /// Second point of a collision witness.
    pub partner: Option<[f64; 3]>,
    pub seed: Option<u64>,
}

impl CertificationReport {
    fn new(check: &str, samples: usize, worst: f64, tolerance: f64, at: Option<Vec3>, seed: Option<u64>) -> Self {
        let passed = worst <= tolerance;
        CertificationReport {
            check: check.to_string(),
            samples,
            worst,
            tolerance,
            passed,
            witness: if passed { None } else { at.map(|x| to_array(&x)) },
            partner: None,
            seed,
        }
    }
}

/// Sampling region.
#[derive(Clone, Debug)]
pub enum Region {
    Box { lo: Vec3, hi: Vec3 },
    Ball { center: Vec3, radius: f64 },
    Tet([Vec3; 4]),
    Points(Vec<Vec3>),
}

impl Region {
    /// A uniformly distributed point.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        match self {
            Region::Box { lo, hi } => {
                Vec3::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y), rng.gen_range(lo.z..=hi.z))
            }
            Region::Ball { center, radius } => loop {
                let v = Vec3::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
                if v.norm_squared() <= 1.0 {
                    return center + v * *radius;
                }
            },
            Region::Tet(t) => sample_tet(t, rng),
            Region::Points(p) => p[rng.gen_range(0..p.len())],
        }
    }

    /// `n` seeded samples; a point list is returned as is.
    pub fn samples(&self, n: usize, seed: u64) -> Vec<Vec3> {
        if let Region::Points(p) = self {
            return p.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }

    /// Deterministic grid with `n` nodes per axis: tensor for boxes, polar for
    /// balls, barycentric for tetrahedra.
    pub fn grid(&self, n: usize) -> Vec<Vec3> {
        let n = n.max(1);
        let mid = |i: usize| (i as f64 + 0.5) / n as f64;
        let mut out = Vec::new();
        match self {
            Region::Box { lo, hi } => {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let d = hi - lo;
                            out.push(lo + Vec3::new(d.x * mid(i), d.y * mid(j), d.z * mid(k)));
                        }
                    }
                }
            }
            Region::Ball { center, radius } => {
                for i in 0..n {
                    let r = radius * mid(i);
                    for j in 0..n {
                        let ct = 1.0 - 2.0 * mid(j);
                        let st = (1.0 - ct * ct).sqrt();
                        for k in 0..n {
                            let ph = std::f64::consts::TAU * mid(k);
                            out.push(center + Vec3::new(st * ph.cos(), st * ph.sin(), ct) * r);
                        }
                    }
                }
            }
            Region::Tet(t) => {
                for i in 0..n {
                    for j in 0..n - i {
                        for k in 0..n - i - j {
                            let (a, b, c) = (
                                (i as f64 + 0.25) / n as f64,
                                (j as f64 + 0.25) / n as f64,
                                (k as f64 + 0.25) / n as f64,
                            );
                            out.push(t[0] + (t[1] - t[0]) * a + (t[2] - t[0]) * b + (t[3] - t[0]) * c);
                        }
                    }
                }
            }
            Region::Points(p) => out = p.clone(),
        }
        out
    }
}

/// Uniform sample of a tetrahedron.
pub fn sample_tet(t: &[Vec3; 4], rng: &mut ChaCha8Rng) -> Vec3 {
    let (mut s, mut u, mut v): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    if s + u > 1.0 {
        s = 1.0 - s;
        u = 1.0 - u;
    }
    if u + v > 1.0 {
        let tmp = v;
        v = 1.0 - s - u;
        u = 1.0 - tmp;
    } else if s + u + v > 1.0 {
        let tmp = v;
        v = s + u + v - 1.0;
        s = 1.0 - u - tmp;
    }
    t[0] + (t[1] - t[0]) * s + (t[2] - t[0]) * u + (t[3] - t[0]) * v
}

/// Central-difference Jacobian with step `h`.
pub fn fd_jacobian<F: Fn(&Vec3) -> Vec3>(f: F, x: &Vec3, h: f64) -> Mat3 {
    let mut j = Mat3::zeros();
    for a in 0..3 {
        let mut e = Vec3::zeros();
        e[a] = h;
        j.set_column(a, &((f(&(x + e)) - f(&(x - e))) / (2.0 * h)));
    }
    j
}

/// Relative Frobenius error of `fd` against `analytic`.
pub fn relative_error(analytic: &Mat3, fd: &Mat3) -> f64 {
    let n = fro(analytic);
    fro(&(fd - analytic)) / if n > 0.0 { n } else { 1.0 }
}

/// Relative derivative tolerance.
pub const FD_TOLERANCE: f64 = 1e-5;

/// Compares the analytic derivative of `eval` with central differences of
/// `x ↦ g(x) − R(x)`, where `R = reference(x₀)` is an affine map that absorbs
/// the bulk of `g` near `x₀` so that the quotient loses fewer digits.
pub fn fd_check_with<E, S, R>(eval: E, points: &[Vec3], step: S, reference: R) -> CertificationReport
where
    E: Fn(&Vec3) -> (Vec3, Mat3) + Sync + Send,
    S: Fn(&Vec3) -> f64 + Sync + Send,
    R: Fn(&Vec3) -> Affine + Sync + Send,
{
    let errs = par_map(points, |x| {
        let (_, j) = eval(x);
        let r = reference(x);
        let fd = fd_jacobian(|y| eval(y).0 - r.apply(y), x, step(x)) + r.matrix;
        relative_error(&j, &fd)
    });
    let (worst, at) = worst_of(&errs, points);
    CertificationReport::new("finite-difference derivative", points.len(), worst, FD_TOLERANCE, at, None)
}

/// Finite-difference check of a map at `n` seeded samples of `region`, with
/// step `1e-6 · scale`.
pub fn fd_check<M: Map3 + ?Sized>(map: &M, region: &Region, n: usize, scale: f64, seed: u64) -> CertificationReport {
    let pts = region.samples(n, seed);
    let mut rep = fd_check_with(|x| map.eval_with_jacobian(x), &pts, |_| 1e-6 * scale, |_| zero_affine());
    rep.seed = Some(seed);
    rep
}

fn zero_affine() -> Affine {
    Affine::new(Mat3::zeros(), Vec3::zeros())
}

fn worst_of(vals: &[f64], pts: &[Vec3]) -> (f64, Option<Vec3>) {
    let mut best = (f64::NEG_INFINITY, None);
    for (v, x) in vals.iter().zip(pts) {
        let v = if v.is_nan() { f64::INFINITY } else { *v };
        if v > best.0 {
            best = (v, Some(*x));
        }
    }
    if pts.is_empty() {
        best.0 = 0.0;
    }
    best
}

/// `det Dg ≥ floor` at every node of `region.grid(grid)`.
pub fn jacobian_grid<M: Map3 + ?Sized>(map: &M, region: &Region, grid: usize, floor: f64) -> CertificationReport {
    jacobian_points(|x| map.jacobian(x), &region.grid(grid), floor)
}

/// `det J ≥ floor` at each of `points`; the violation is `floor − min det`.
pub fn jacobian_points<J: Fn(&Vec3) -> Mat3 + Sync + Send>(jac: J, points: &[Vec3], floor: f64) -> CertificationReport {
    let dets = par_map(points, |x| floor - jac(x).determinant());
    let (worst, at) = worst_of(&dets, points);
    CertificationReport::new("Jacobian floor", points.len(), worst, 0.0, at, None)
}

/// A stratum of the injectivity audit.
pub struct Stratum<'a> {
    pub label: String,
    pub measure: f64,
    pub sampler: Box<dyn Fn(&mut ChaCha8Rng) -> Vec3 + Sync + Send + 'a>,
}

impl<'a> Stratum<'a> {
    pub fn tet(label: impl Into<String>, t: [Vec3; 4]) -> Self {
        Stratum {
            label: label.into(),
            measure: tet_volume(&t).abs(),
            sampler: Box::new(move |rng| sample_tet(&t, rng)),
        }
    }
}

/// Settings of [`injectivity_audit`].
#[derive(Clone, Debug)]
pub struct AuditOptions {
    pub samples: usize,
    pub min_per_stratum: usize,
    /// Collision tolerance relative to `scale`.
    pub tolerance: f64,
    pub scale: f64,
    pub seed: u64,
    /// Cap on candidate pairs refined by Newton.
    pub max_candidates: usize,
}

impl AuditOptions {
    pub fn new(scale: f64, seed: u64) -> Self {
        AuditOptions { samples: 100_000, min_per_stratum: 500, tolerance: 1e-9, scale, seed, max_candidates: 2000 }
    }
}

/// Stratified draw: counts proportional to measure, at least the minimum each.
pub fn stratified_samples(strata: &[Stratum<'_>], total: usize, min_each: usize, seed: u64) -> Vec<(usize, Vec3)> {
    let sum: f64 = strata.iter().map(|s| s.measure).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (i, s) in strata.iter().enumerate() {
        let share = if sum > 0.0 { (total as f64 * s.measure / sum).round() as usize } else { 0 };
        for _ in 0..share.max(min_each) {
            out.push((i, (s.sampler)(&mut rng)));
        }
    }
    out
}

/// Global injectivity audit: the Jacobian must be positive at every sample,
/// and no two samples with well separated preimages may share an image.
/// Near-collisions are refined by Newton's method towards the partner image
/// before a collision is declared; a reported witness pair re-evaluates to
/// images within `tolerance · scale`.
pub fn injectivity_audit<M: Map3 + ?Sized>(
    map: &M,
    strata: &[Stratum<'_>],
    opts: &AuditOptions,
) -> CertificationReport {
    let pts = stratified_samples(strata, opts.samples, opts.min_per_stratum, opts.seed);
    let xs: Vec<Vec3> = pts.iter().map(|p| p.1).collect();
    let evals = par_map(&xs, |x| map.eval_with_jacobian(x));
    let n = xs.len();

    let mut min_det = (f64::INFINITY, Vec3::zeros());
    let mut max_inv = 0.0f64;
    for (x, (_, j)) in xs.iter().zip(&evals) {
        let d = j.determinant();
        if d < min_det.0 {
            min_det = (d, *x);
        }
        if let Some(inv) = j.try_inverse() {
            max_inv = max_inv.max(fro(&inv));
        }
    }

    let tol = opts.tolerance * opts.scale;
    let sep = 1e-6 * opts.scale;
    let ys: Vec<Vec3> = evals.iter().map(|e| e.0).collect();
    let (lo, hi) = ys
        .iter()
        .fold((Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)), |(l, h), y| (l.inf(y), h.sup(y)));
    let cell = ((hi - lo).max().max(opts.scale * 1e-12)) / (n as f64).cbrt().max(1.0);
    let key = |y: &Vec3| -> [i64; 3] {
        let k = (y - lo) / cell;
        [k.x.floor() as i64, k.y.floor() as i64, k.z.floor() as i64]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, y) in ys.iter().enumerate() {
        grid.entry(key(y)).or_default().push(i);
    }
    let lip = 4.0 * max_inv.max(1e-300);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, y) in ys.iter().enumerate() {
        let k = key(y);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &j in list {
                            if j <= i {
                                continue;
                            }
                            let dy_ = (ys[j] - y).norm();
                            let dx_ = (xs[j] - xs[i]).norm();
                            if dx_ > sep && dx_ > lip * dy_ {
                                candidates.push((dy_ / dx_, i, j));
                            }
                        }
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    candidates.truncate(opts.max_candidates);
    let found = par_map(&candidates, |&(_, i, j)| {
        let target = ys[i];
        newton_towards(map, xs[j], &target, tol).and_then(|z| {
            let gap = (map.eval(&z) - target).norm();
            ((z - xs[i]).norm() > sep && gap <= tol).then_some((xs[i], z, gap))
        })
    });
    if let Some((a, b, gap)) = found.into_iter().flatten().next() {
        let mut rep = CertificationReport::new("injectivity", n, f64::INFINITY, 0.0, Some(a), Some(opts.seed));
        rep.worst = (a - b).norm();
        rep.tolerance = tol;
        rep.partner = Some(to_array(&b));
        let _ = gap;
        return rep;
    }
    let mut rep = CertificationReport::new("injectivity", n, -min_det.0, 0.0, Some(min_det.1), Some(opts.seed));
    if min_det.0 > 0.0 {
        rep.worst = 0.0;
        rep.passed = true;
        rep.witness = None;
    }
    rep
}

/// Damped Newton for `g(x) = y` from `x0`.
pub fn newton_towards<M: Map3 + ?Sized>(map: &M, x0: Vec3, y: &Vec3, tol: f64) -> Option<Vec3> {
    let mut x = x0;
    let (mut gx, mut j) = map.eval_with_jacobian(&x);
    let mut res = (gx - y).norm();
    for _ in 0..60 {
        if res <= tol {
            return Some(x);
        }
        let step = j.try_inverse()? * (gx - y);
        let mut t = 1.0;
        loop {
            let xn = x - step * t;
            let (gn, jn) = map.eval_with_jacobian(&xn);
            let rn = (gn - y).norm();
            if rn < res {
                x = xn;
                gx = gn;
                j = jn;
                res = rn;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return None;
            }
        }
    }
    (res <= tol).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tet_samples_stay_inside() {
        let t = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = sample_tet(&t, &mut rng);
            assert!(x.min() >= 0.0 && x.sum() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn tet_samples_are_uniform() {
        let t = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 200_000;
        let mean = (0..n).map(|_| sample_tet(&t, &mut rng)).sum::<Vec3>() / n as f64;
        assert!((mean - Vec3::repeat(0.25)).amax() < 5e-3);
    }
}
