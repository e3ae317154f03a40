//! Small linear-algebra vocabulary shared by every module.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// A map from ℝ³ to ℝ³ with an analytic first derivative.
pub trait Map3: Send + Sync {
    fn eval(&self, x: &Vec3) -> Vec3;

    fn jacobian(&self, x: &Vec3) -> Mat3;

    fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        (self.eval(x), self.jacobian(x))
    }
}

/// `x ↦ matrix · x + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub matrix: Mat3,
    pub offset: Vec3,
}

impl Affine {
    pub fn new(matrix: Mat3, offset: Vec3) -> Self {
        Self { matrix, offset }
    }

    pub fn identity() -> Self {
        Self::linear(Mat3::identity())
    }

    pub fn linear(matrix: Mat3) -> Self {
        Self { matrix, offset: Vec3::zeros() }
    }

    #[inline]
    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.matrix * x + self.offset
    }

    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn inverse(&self) -> Option<Affine> {
        let inv = self.matrix.try_inverse()?;
        Some(Affine { matrix: inv, offset: -(inv * self.offset) })
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine { matrix: self.matrix * other.matrix, offset: self.matrix * other.offset + self.offset }
    }

    /// Max entrywise distance between the two maps, offsets scaled by `scale`.
    pub fn distance(&self, other: &Affine, scale: f64) -> f64 {
        let dm = (self.matrix - other.matrix).amax();
        let dc = (self.offset - other.offset).amax() / scale.max(f64::MIN_POSITIVE);
        dm.max(dc)
    }

    /// Affine map sending the four points `from` to `to`, if `from` spans ℝ³.
    pub fn from_vertex_images(from: &[Vec3; 4], to: &[Vec3; 4]) -> Option<Affine> {
        let e = Mat3::from_columns(&[from[1] - from[0], from[2] - from[0], from[3] - from[0]]);
        let i = Mat3::from_columns(&[to[1] - to[0], to[2] - to[0], to[3] - to[0]]);
        let m = i * e.try_inverse()?;
        Some(Affine { matrix: m, offset: to[0] - m * from[0] })
    }
}

impl Map3 for Affine {
    fn eval(&self, x: &Vec3) -> Vec3 {
        self.apply(x)
    }

    fn jacobian(&self, _x: &Vec3) -> Mat3 {
        self.matrix
    }
}

/// Serialized form of an affine piece: row-major matrix plus offset.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AffineDoc {
    pub matrix: [[f64; 3]; 3],
    pub offset: [f64; 3],
}

impl From<&Affine> for AffineDoc {
    fn from(a: &Affine) -> Self {
        let m = &a.matrix;
        AffineDoc {
            matrix: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            offset: [a.offset.x, a.offset.y, a.offset.z],
        }
    }
}

impl From<&AffineDoc> for Affine {
    fn from(d: &AffineDoc) -> Self {
        let r = &d.matrix;
        Affine {
            matrix: Mat3::new(r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]),
            offset: Vec3::new(d.offset[0], d.offset[1], d.offset[2]),
        }
    }
}

/// Rigid motion `local = rot · (x − origin)`; rows of `rot` are the local axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub origin: Vec3,
    pub rot: Mat3,
}

impl Frame {
    pub fn identity() -> Self {
        Self { origin: Vec3::zeros(), rot: Mat3::identity() }
    }

    /// Frame with the given orthonormal axes as rows.
    pub fn from_axes(origin: Vec3, e1: Vec3, e2: Vec3, e3: Vec3) -> Self {
        Self { origin, rot: Mat3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]) }
    }

    #[inline]
    pub fn to_local(&self, x: &Vec3) -> Vec3 {
        self.rot * (x - self.origin)
    }

    #[inline]
    pub fn to_world(&self, y: &Vec3) -> Vec3 {
        self.rot.transpose() * y + self.origin
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        self.rot.row(i).transpose()
    }

    /// The frame as an affine map world → local.
    pub fn as_affine(&self) -> Affine {
        Affine { matrix: self.rot, offset: -(self.rot * self.origin) }
    }
}

/// Unit vectors `(a, b)` with `(n, a, b)` a right-handed orthonormal basis.
pub fn complete_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.6 {
        Vec3::x()
    } else if n.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let a = (helper - n * n.dot(&helper)).normalize();
    let b = n.cross(&a);
    (a, b)
}

/// Barycentric coordinates of `x` with respect to a tetrahedron.
pub fn barycentric(tet: &[Vec3; 4], x: &Vec3) -> Option<[f64; 4]> {
    let e = Mat3::from_columns(&[tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0]]);
    let l = e.try_inverse()? * (x - tet[0]);
    Some([1.0 - l.x - l.y - l.z, l.x, l.y, l.z])
}

pub fn tet_volume(tet: &[Vec3; 4]) -> f64 {
    (tet[1] - tet[0]).cross(&(tet[2] - tet[0])).dot(&(tet[3] - tet[0])).abs() / 6.0
}

pub fn point_segment_distance(x: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (x - (a + ab * t)).norm()
}

/// Closest point on a triangle (Ericson's region test).
pub fn closest_point_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    (p - closest_point_triangle(p, a, b, c)).norm()
}

/// Minimum distance between segments `[p1,q1]` and `[p2,q2]`.
pub fn segment_segment_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Distance from a segment to a triangle.
pub fn segment_triangle_distance(p: &Vec3, q: &Vec3, tri: &[Vec3; 3]) -> f64 {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let dp = (p - tri[0]).dot(&n);
    let dq = (q - tri[0]).dot(&n);
    if dp * dq < 0.0 {
        let x = p + (q - p) * (dp / (dp - dq));
        if point_triangle_distance(&x, &tri[0], &tri[1], &tri[2]) <= 1e-14 * n.norm().sqrt() {
            return 0.0;
        }
    }
    let mut best = point_triangle_distance(p, &tri[0], &tri[1], &tri[2])
        .min(point_triangle_distance(q, &tri[0], &tri[1], &tri[2]));
    for k in 0..3 {
        best = best.min(segment_segment_distance(p, q, &tri[k], &tri[(k + 1) % 3]));
    }
    best
}

/// Frobenius norm.
#[inline]
pub fn fro(m: &Mat3) -> f64 {
    m.norm()
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r >= std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}
