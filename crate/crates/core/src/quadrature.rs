//! Quadrature rules: Gauss–Legendre, a symmetric degree-5 tetrahedron rule,
//! product rules on the sphere, and an adaptive integrator on the unit cube.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::Vec3;

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut out = vec![(0.0, 0.0); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

/// `P_n(x)` and `P_n′(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let h = 0.5 * (b - a);
    gauss_legendre(n).into_iter().map(|(x, w)| (a + h * (x + 1.0), h * w)).collect()
}

#[allow(clippy::excessive_precision)]
const TET_A1: f64 = 0.310_885_919_263_300_609_8;
#[allow(clippy::excessive_precision)]
const TET_W1: f64 = 0.018_781_320_953_002_641_8;
#[allow(clippy::excessive_precision)]
const TET_A2: f64 = 0.092_735_250_310_891_226_402;
#[allow(clippy::excessive_precision)]
const TET_W2: f64 = 0.012_248_840_519_393_658_257;
#[allow(clippy::excessive_precision)]
const TET_A3: f64 = 0.045_503_704_125_649_649_492;
#[allow(clippy::excessive_precision)]
const TET_W3: f64 = 0.007_091_003_462_846_911_073;

/// Fourteen-point symmetric rule exact for polynomials of degree 5:
/// barycentric nodes and weights as fractions of the volume.
pub fn tet_rule() -> Vec<([f64; 4], f64)> {
    let mut out = Vec::with_capacity(14);
    for (a, w) in [(TET_A1, TET_W1), (TET_A2, TET_W2)] {
        for k in 0..4 {
            let mut b = [a; 4];
            b[k] = 1.0 - 3.0 * a;
            out.push((b, 6.0 * w));
        }
    }
    let b = 0.5 - TET_A3;
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        let mut l = [b; 4];
        l[i] = TET_A3;
        l[j] = TET_A3;
        out.push((l, 6.0 * TET_W3));
    }
    out
}

/// Integral of `f` over a tetrahedron with the degree-5 rule.
pub fn integrate_tet<F: Fn(&Vec3) -> f64>(tet: &[Vec3; 4], f: F) -> f64 {
    let vol = crate::geom::tet_volume(tet).abs();
    tet_rule()
        .iter()
        .map(|(b, w)| {
            let x = tet[0] * b[0] + tet[1] * b[1] + tet[2] * b[2] + tet[3] * b[3];
            w * f(&x)
        })
        .sum::<f64>()
        * vol
}

/// Product rule on the unit sphere: Gauss in `z`, uniform in azimuth.
/// Weights sum to `4π`.
pub fn sphere_grid(nz: usize, nphi: usize) -> Vec<(Vec3, f64)> {
    let mut out = Vec::with_capacity(nz * nphi);
    let dphi = std::f64::consts::TAU / nphi as f64;
    for (z, wz) in gauss_legendre(nz) {
        let s = (1.0 - z * z).max(0.0).sqrt();
        for j in 0..nphi {
            let phi = dphi * (j as f64 + 0.5);
            out.push((Vec3::new(s * phi.cos(), s * phi.sin(), z), wz * dphi));
        }
    }
    out
}

/// Settings for [`adaptive_cube`].
#[derive(Clone, Debug)]
pub struct AdaptiveOptions {
    /// Initial cells per axis.
    pub initial: [usize; 3],
    /// Gauss nodes per axis within a cell.
    pub order: usize,
    /// Target for the summed two-level error relative to the total.
    pub tolerance: f64,
    /// Cap on subdivision depth below the initial cells.
    pub max_depth: usize,
    /// Cap on the number of cell splits.
    pub max_splits: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions { initial: [4, 4, 4], order: 3, tolerance: 1e-3, max_depth: 8, max_splits: 2000 }
    }
}

/// A quadrature node: its weight (including the parameterization Jacobian)
/// and the data the integrand produced there.
#[derive(Clone, Debug)]
pub struct QuadNode<T> {
    pub weight: f64,
    pub data: T,
}

/// Final nodes and convergence information.
#[derive(Clone, Debug)]
pub struct AdaptiveOutcome<T> {
    pub nodes: Vec<QuadNode<T>>,
    pub estimate: f64,
    pub error: f64,
    pub splits: usize,
    pub max_depth_reached: usize,
    pub converged: bool,
}

struct Cell<T> {
    depth: usize,
    children: Vec<(Vec3, Vec3, Vec<QuadNode<T>>, f64)>,
    coarse: f64,
    fine: f64,
}

impl<T> Cell<T> {
    fn error(&self) -> f64 {
        (self.coarse - self.fine).abs()
    }
}

struct Ranked<T>(Cell<T>);

impl<T> PartialEq for Ranked<T> {
    fn eq(&self, other: &Self) -> bool {
        self.0.error() == other.0.error()
    }
}
impl<T> Eq for Ranked<T> {}
impl<T> PartialOrd for Ranked<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Ranked<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.0.error(), other.0.error());
        a.partial_cmp(&b).unwrap_or(Ordering::Equal).then(other.0.depth.cmp(&self.0.depth))
    }
}

/// Globally adaptive integration over `[0, 1]³`. `eval(p)` returns the
/// Jacobian of the parameterization at `p` and the node data; `key` maps the
/// data to the scalar integrand that drives refinement. Each cell is
/// estimated by a tensor Gauss rule and by the same rule on its eight
/// children; the cell with the largest disagreement is split next.
pub fn adaptive_cube<T, E, K>(eval: E, key: K, opts: &AdaptiveOptions) -> AdaptiveOutcome<T>
where
    E: Fn(&Vec3) -> (f64, T),
    K: Fn(&T) -> f64,
{
    let rule = gauss_on(0.0, 1.0, opts.order);
    let box_nodes = |lo: Vec3, size: Vec3| -> (Vec<QuadNode<T>>, f64) {
        let mut nodes = Vec::with_capacity(rule.len().pow(3));
        let mut sum = 0.0;
        let vol = size.x * size.y * size.z;
        for &(a, wa) in &rule {
            for &(b, wb) in &rule {
                for &(c, wc) in &rule {
                    let p = lo + Vec3::new(a * size.x, b * size.y, c * size.z);
                    let (jac, data) = eval(&p);
                    let weight = wa * wb * wc * vol * jac;
                    sum += weight * key(&data);
                    nodes.push(QuadNode { weight, data });
                }
            }
        }
        (nodes, sum)
    };
    let make_cell = |lo: Vec3, size: Vec3, depth: usize, coarse: f64| -> Cell<T> {
        let half = size * 0.5;
        let mut children = Vec::with_capacity(8);
        let mut fine = 0.0;
        for k in 0..8 {
            let off = Vec3::new(
                if k & 1 != 0 { half.x } else { 0.0 },
                if k & 2 != 0 { half.y } else { 0.0 },
                if k & 4 != 0 { half.z } else { 0.0 },
            );
            let (nodes, s) = box_nodes(lo + off, half);
            fine += s;
            children.push((lo + off, half, nodes, s));
        }
        Cell { depth, children, coarse, fine }
    };

    let [nx, ny, nz] = opts.initial;
    let size = Vec3::new(1.0 / nx as f64, 1.0 / ny as f64, 1.0 / nz as f64);
    let mut heap = BinaryHeap::new();
    let (mut est_sum, mut err_sum) = (0.0, 0.0);
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let lo = Vec3::new(i as f64 * size.x, j as f64 * size.y, k as f64 * size.z);
                let (_, coarse) = box_nodes(lo, size);
                let cell = make_cell(lo, size, 0, coarse);
                est_sum += cell.fine;
                err_sum += cell.error();
                heap.push(Ranked(cell));
            }
        }
    }
    let mut done: Vec<Cell<T>> = Vec::new();
    let mut splits = 0;
    let mut max_depth = 0;
    while let Some(Ranked(top)) = heap.pop() {
        if err_sum <= opts.tolerance * est_sum.abs() || top.error() == 0.0 || splits >= opts.max_splits {
            heap.push(Ranked(top));
            break;
        }
        if top.depth >= opts.max_depth {
            done.push(top);
            continue;
        }
        splits += 1;
        max_depth = max_depth.max(top.depth + 1);
        est_sum -= top.fine;
        err_sum -= top.error();
        for (lo, size, _, coarse) in top.children {
            let cell = make_cell(lo, size, top.depth + 1, coarse);
            est_sum += cell.fine;
            err_sum += cell.error();
            heap.push(Ranked(cell));
        }
    }
    let cells: Vec<Cell<T>> = heap.into_iter().map(|r| r.0).chain(done).collect();
    let estimate = cells.iter().map(|c| c.fine).sum::<f64>();
    let error = cells.iter().map(|c| c.error()).sum::<f64>();
    let mut nodes = Vec::new();
    for c in cells {
        for (_, _, ns, _) in c.children {
            nodes.extend(ns);
        }
    }
    AdaptiveOutcome {
        nodes,
        estimate,
        error,
        splits,
        max_depth_reached: max_depth,
        converged: error <= opts.tolerance * estimate.abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        for n in 1..12 {
            let rule = gauss_legendre(n);
            for k in 0..2 * n {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn sphere_grid_area() {
        let g = sphere_grid(32, 64);
        let a: f64 = g.iter().map(|p| p.1).sum();
        assert!((a - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn adaptive_integrates_a_step() {
        let opts = AdaptiveOptions { max_splits: 4000, ..Default::default() };
        let out = adaptive_cube(|p| (1.0, if p.x < 0.3 { 1.0 } else { 0.0 }), |v| *v, &opts);
        assert!((out.estimate - 0.3).abs() < 1e-3);
    }
}
