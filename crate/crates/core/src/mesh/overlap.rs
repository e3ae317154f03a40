//! Exact-in-structure intersection tests between closed tetrahedra.

use crate::geom::{barycentric, Mat3, Vec3};

/// Intersection of segment `p→q` with a closed tetrahedron given by its
/// barycentric inverse; returns the parameter interval.
fn clip_segment(tet: &[Vec3; 4], inv: &Mat3, p: &Vec3, q: &Vec3, tol: f64) -> Option<(f64, f64)> {
    let bary = |x: &Vec3| {
        let l = inv * (x - tet[0]);
        [1.0 - l.x - l.y - l.z, l.x, l.y, l.z]
    };
    let lp = bary(p);
    let lq = bary(q);
    let (mut s0, mut s1) = (0.0f64, 1.0f64);
    for k in 0..4 {
        let a = lp[k] + tol;
        let d = lq[k] - lp[k];
        if d.abs() < 1e-300 {
            if a < 0.0 {
                return None;
            }
            continue;
        }
        let s = -a / d;
        if d > 0.0 {
            s0 = s0.max(s);
        } else {
            s1 = s1.min(s);
        }
        if s0 > s1 {
            return None;
        }
    }
    Some((s0, s1))
}

/// Candidate vertices of `a ∩ b`: the clipped endpoints of every edge of each
/// tetrahedron against the other. Their convex hull is the intersection.
pub fn intersection_points(a: &[Vec3; 4], b: &[Vec3; 4], tol: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for (x, y) in [(a, b), (b, a)] {
        let e = Mat3::from_columns(&[y[1] - y[0], y[2] - y[0], y[3] - y[0]]);
        let Some(inv) = e.try_inverse() else { continue };
        for i in 0..4 {
            for j in (i + 1)..4 {
                if let Some((s0, s1)) = clip_segment(y, &inv, &x[i], &x[j], tol) {
                    let d = x[j] - x[i];
                    out.push(x[i] + d * s0);
                    out.push(x[i] + d * s1);
                }
            }
        }
    }
    out
}

/// Checks that `a ∩ b ⊆ conv(shared vertices)`. `shared_a[k]` marks vertex `k`
/// of `a` as a vertex shared with `b`. Returns a witness point of the excess
/// intersection: the mean of all intersection vertices outside the shared face.
pub fn excess_intersection(a: &[Vec3; 4], b: &[Vec3; 4], shared_a: [bool; 4], tol: f64) -> Option<Vec3> {
    let pts = intersection_points(a, b, tol);
    if pts.is_empty() {
        return None;
    }
    let member_tol = (tol * 1e3).max(1e-7);
    let bad: Vec<Vec3> = pts
        .iter()
        .filter(|x| match barycentric(a, x) {
            Some(l) => (0..4).any(|k| !shared_a[k] && l[k] > member_tol),
            None => true,
        })
        .cloned()
        .collect();
    if bad.is_empty() {
        return None;
    }
    let all_mean = pts.iter().fold(Vec3::zeros(), |s, p| s + p) / pts.len() as f64;
    let inside_both = |x: &Vec3| {
        let ok = |t: &[Vec3; 4]| barycentric(t, x).is_some_and(|l| l.iter().all(|&v| v >= -member_tol));
        ok(a) && ok(b)
    };
    if inside_both(&all_mean) {
        Some(all_mean)
    } else {
        Some(bad.iter().fold(Vec3::zeros(), |s, p| s + p) / bad.len() as f64)
    }
}

/// Axis-aligned bounding box of a tetrahedron.
pub fn bbox(t: &[Vec3; 4]) -> (Vec3, Vec3) {
    let mut lo = t[0];
    let mut hi = t[0];
    for p in &t[1..] {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Pairs of boxes overlapping within `pad`, found by sweeping along x.
pub fn overlapping_pairs(boxes: &[(Vec3, Vec3)], pad: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| boxes[i].0.x.total_cmp(&boxes[j].0.x));
    let mut out = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if boxes[j].0.x > boxes[i].1.x + pad {
                break;
            }
            let (a, b) = (&boxes[i], &boxes[j]);
            if (0..3).all(|k| a.0[k] <= b.1[k] + pad && b.0[k] <= a.1[k] + pad) {
                out.push((i.min(j), i.max(j)));
            }
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> [Vec3; 4] {
        [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
    }

    #[test]
    fn face_neighbours_are_clean() {
        let a = unit();
        let b = [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(1.0, 1.0, 1.0)];
        assert!(excess_intersection(&a, &b, [false, true, true, true], 1e-10).is_none());
    }

    #[test]
    fn disjoint_tets_are_clean() {
        let a = unit();
        let b = a.map(|p| p + Vec3::new(3.0, 0.0, 0.0));
        assert!(excess_intersection(&a, &b, [false; 4], 1e-10).is_none());
    }

    #[test]
    fn vertex_on_edge_midpoint_is_caught() {
        let a = unit();
        let m = Vec3::new(0.5, 0.0, 0.0);
        let b = [m, m + Vec3::new(0.0, -1.0, 0.0), m + Vec3::new(0.3, -0.5, -1.0), m + Vec3::new(-0.3, -0.5, -1.0)];
        let w = excess_intersection(&a, &b, [false; 4], 1e-10).unwrap();
        assert!((w - m).norm() < 1e-9);
    }

    #[test]
    fn overlapping_interiors_give_interior_witness() {
        let a = unit();
        let b = a.map(|p| p * 0.8 + Vec3::repeat(0.05));
        let w = excess_intersection(&a, &b, [false; 4], 1e-10).unwrap();
        let la = barycentric(&a, &w).unwrap();
        assert!(la.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn sweep_finds_overlaps() {
        let boxes = vec![
            (Vec3::zeros(), Vec3::repeat(1.0)),
            (Vec3::repeat(2.0), Vec3::repeat(3.0)),
            (Vec3::repeat(0.5), Vec3::repeat(2.5)),
        ];
        assert_eq!(overlapping_pairs(&boxes, 0.0), vec![(0, 2), (1, 2)]);
    }
}
