//! Canonical local pictures around faces, edges and vertices.

use crate::blend::FacePlane;
use crate::error::{Error, Result};
use crate::geom::{point_triangle_distance, Affine, Frame, Mat3, Vec3};

use super::plmap::PLMap;

/// Relative tolerance under which two pieces count as equal.
pub const PIECE_EQ_TOL: f64 = 1e-12;

/// An interior face with its two incident cells.
#[derive(Clone, Debug)]
pub struct FacePair {
    pub face: usize,
    pub vertices: [usize; 3],
    pub left: usize,
    pub right: usize,
    pub left_piece: Affine,
    pub right_piece: Affine,
    /// Carries the face plane to `{x₁ = 0}` with the left cell on `x₁ ≤ 0`.
    pub frame: Frame,
    /// Lies on a declared domain boundary.
    pub boundary: bool,
    /// Both pieces coincide.
    pub trivial: bool,
}

impl FacePair {
    pub fn plane(&self) -> FacePlane {
        FacePlane::from_frame(&self.frame)
    }
}

/// Angles and frame-local linear pieces of an edge fan.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFan {
    /// Ray angles, sorted in `[−π, π)`.
    pub angles: Vec<f64>,
    /// `pieces[k]` acts on the sector from ray `k` to ray `k+1` (cyclically).
    pub pieces: Vec<Mat3>,
    /// `|D₃ f|`.
    pub stretch: f64,
}

impl LocalFan {
    /// Index of the sector containing angle `theta`.
    pub fn sector_of(&self, theta: f64) -> usize {
        let m = self.angles.len();
        match self.angles.iter().rposition(|&a| a <= theta) {
            Some(k) => k,
            None => m - 1,
        }
    }

    /// The piecewise linear map of the fan.
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        self.pieces[self.sector_of(x.y.atan2(x.x))] * x
    }

    /// Smallest angular gap between consecutive rays, modulo 2π.
    pub fn min_gap(&self) -> f64 {
        let m = self.angles.len();
        (0..m)
            .map(|k| {
                let next = if k + 1 < m { self.angles[k + 1] } else { self.angles[0] + std::f64::consts::TAU };
                next - self.angles[k]
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks continuity across rays and the `D₃ = (0,0,λ)` normalization.
    pub fn check(&self) -> Result<()> {
        let m = self.angles.len();
        if m < 2 || self.pieces.len() != m {
            return Err(Error::InvalidInput("a fan needs at least two rays and one piece per sector".into()));
        }
        if self.angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("fan angles must be strictly increasing".into()));
        }
        let pi = std::f64::consts::PI;
        if self.angles[0] < -pi || self.angles[m - 1] >= pi {
            return Err(Error::InvalidInput("fan angles must lie in [−π, π)".into()));
        }
        for (k, p) in self.pieces.iter().enumerate() {
            if (p * Vec3::z() - Vec3::new(0.0, 0.0, self.stretch)).amax() > 1e-12 * (1.0 + self.stretch) {
                return Err(Error::InvalidInput(format!("sector {k} does not map e₃ to (0,0,λ)")));
            }
            if p.determinant() <= 0.0 {
                return Err(Error::InvalidInput(format!("sector {k} is not sense-preserving")));
            }
        }
        for k in 0..m {
            let prev = (k + m - 1) % m;
            let a = self.angles[k];
            let ray = Vec3::new(a.cos(), a.sin(), 0.0);
            let gap = (self.pieces[prev] * ray - self.pieces[k] * ray).norm();
            if gap > 1e-9 * (1.0 + self.pieces[k].norm()) {
                return Err(Error::InvalidInput(format!("fan pieces disagree on ray {k} by {gap:.3e}")));
            }
        }
        Ok(())
    }
}

/// The fan of cells around an edge.
#[derive(Clone, Debug)]
pub struct EdgeFan {
    pub edge: usize,
    pub vertices: [usize; 2],
    /// Domain frame: origin at the first vertex, `e₃` along the edge.
    pub frame: Frame,
    /// Image frame: origin at `f(first vertex)`, `e₃` along `D₃ f`.
    pub image_frame: Frame,
    pub length: f64,
    /// Face id of each ray.
    pub faces: Vec<usize>,
    /// Cell id of each sector.
    pub cells: Vec<usize>,
    /// World pieces of each sector.
    pub pieces: Vec<Affine>,
    pub local: LocalFan,
    pub boundary: bool,
    pub trivial: bool,
}

impl EdgeFan {
    /// The fan map evaluated through the frames, in world coordinates.
    pub fn eval_world(&self, x: &Vec3) -> Vec3 {
        self.image_frame.to_world(&self.local.eval(&self.frame.to_local(x)))
    }
}

/// The star of cells around a vertex.
#[derive(Clone, Debug)]
pub struct VertexStar {
    pub vertex: usize,
    pub position: Vec3,
    pub cells: Vec<usize>,
    pub faces: Vec<usize>,
    pub edges: Vec<usize>,
    /// Half the distance from the vertex to its link.
    pub radius: f64,
    pub boundary: bool,
    pub trivial: bool,
}

fn pieces_equal(a: &Affine, b: &Affine, scale: f64) -> bool {
    a.distance(b, scale) <= PIECE_EQ_TOL * (1.0 + a.matrix.amax())
}

/// All faces shared by two cells.
pub fn face_pairs(map: &PLMap) -> Vec<FacePair> {
    let k = map.complex();
    let scale = map.scale();
    let mut out = Vec::new();
    for (f, verts) in k.faces().iter().enumerate() {
        let cs = k.face_cells(f);
        if cs.len() != 2 {
            continue;
        }
        let p = verts.map(|i| k.point(i));
        let mut n = (p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
        let (mut left, mut right) = (cs[0], cs[1]);
        if (k.point(k.opposite_vertex(left, f)) - p[0]).dot(&n) > 0.0 {
            n = -n;
        }
        if (k.point(k.opposite_vertex(right, f)) - p[0]).dot(&n) < 0.0 {
            std::mem::swap(&mut left, &mut right);
        }
        let e2 = (p[1] - p[0]).normalize();
        let e3 = n.cross(&e2);
        let declared = k.is_boundary_face(f);
        out.push(FacePair {
            face: f,
            vertices: *verts,
            left,
            right,
            left_piece: *map.piece(left),
            right_piece: *map.piece(right),
            frame: Frame::from_axes(p[0], n, e2, e3),
            boundary: declared,
            trivial: pieces_equal(map.piece(left), map.piece(right), scale),
        });
    }
    out
}

/// Fan of a single edge.
pub fn edge_fan(map: &PLMap, e: usize) -> Result<EdgeFan> {
    let k = map.complex();
    let [a, b] = k.edges()[e];
    let pa = k.point(a);
    let axis = k.point(b) - pa;
    let length = axis.norm();
    let e3 = axis / length;
    let cells = k.edge_cells(e).to_vec();
    let mut faces: Vec<usize> = Vec::new();
    for &c in &cells {
        for f in k.cell_faces(c) {
            let fv = k.faces()[f];
            if fv.contains(&a) && fv.contains(&b) && !faces.contains(&f) {
                faces.push(f);
            }
        }
    }
    faces.sort_unstable();
    let third = |f: usize| -> usize { *k.faces()[f].iter().find(|&&v| v != a && v != b).expect("triangle") };
    let v0 = k.point(third(faces[0])) - pa;
    let e1 = (v0 - e3 * v0.dot(&e3)).normalize();
    let e2 = e3.cross(&e1);
    let frame = Frame::from_axes(pa, e1, e2, e3);
    let mut rays: Vec<(f64, usize)> = faces
        .iter()
        .map(|&f| {
            let v = frame.to_local(&k.point(third(f)));
            let mut th = v.y.atan2(v.x);
            if th >= std::f64::consts::PI {
                th -= std::f64::consts::TAU;
            }
            (th, f)
        })
        .collect();
    rays.sort_by(|x, y| x.0.total_cmp(&y.0));
    let m = rays.len();
    let mut sector_cells = Vec::with_capacity(m);
    let mut complete = true;
    for i in 0..m {
        let (f, g) = (rays[i].1, rays[(i + 1) % m].1);
        let common = cells.iter().find(|&&c| {
            let cf = k.cell_faces(c);
            cf.contains(&f) && cf.contains(&g)
        });
        match common {
            Some(&c) => sector_cells.push(c),
            None => {
                complete = false;
                sector_cells.push(usize::MAX);
            }
        }
    }
    let boundary = k.is_boundary_edge(e) || !complete;
    let ref_cell = cells[0];
    let m0 = map.piece(ref_cell).matrix;
    let d3 = m0 * e3;
    let stretch = d3.norm();
    let q3 = d3 / stretch;
    let d1 = m0 * e1;
    let q1 = (d1 - q3 * d1.dot(&q3)).normalize();
    let q2 = q3.cross(&q1);
    let image_frame = Frame::from_axes(map.vertex_image(a), q1, q2, q3);
    let pieces: Vec<Affine> =
        sector_cells.iter().map(|&c| if c == usize::MAX { Affine::identity() } else { *map.piece(c) }).collect();
    let local_pieces: Vec<Mat3> = pieces.iter().map(|p| image_frame.rot * p.matrix * frame.rot.transpose()).collect();
    let scale = map.scale();
    let trivial = complete && pieces.iter().all(|p| pieces_equal(p, &pieces[0], scale));
    Ok(EdgeFan {
        edge: e,
        vertices: [a, b],
        frame,
        image_frame,
        length,
        faces: rays.iter().map(|r| r.1).collect(),
        cells: sector_cells,
        pieces,
        local: LocalFan { angles: rays.iter().map(|r| r.0).collect(), pieces: local_pieces, stretch },
        boundary,
        trivial,
    })
}

/// Fans of every edge.
pub fn edge_fans(map: &PLMap) -> Result<Vec<EdgeFan>> {
    (0..map.complex().edges().len()).map(|e| edge_fan(map, e)).collect()
}

/// Star of a single vertex.
pub fn vertex_star(map: &PLMap, v: usize) -> VertexStar {
    let k = map.complex();
    let cells = k.vertex_cells(v).to_vec();
    let x = k.point(v);
    let mut faces = Vec::new();
    let mut edges = Vec::new();
    let mut link = f64::INFINITY;
    for &c in &cells {
        for f in k.cell_faces(c) {
            if k.faces()[f].contains(&v) {
                if !faces.contains(&f) {
                    faces.push(f);
                }
            } else {
                let p = k.face_points(f);
                link = link.min(point_triangle_distance(&x, &p[0], &p[1], &p[2]));
            }
        }
        for e in k.cell_edges(c) {
            if k.edges()[e].contains(&v) && !edges.contains(&e) {
                edges.push(e);
            }
        }
    }
    faces.sort_unstable();
    edges.sort_unstable();
    let scale = map.scale();
    let trivial = cells.iter().all(|&c| pieces_equal(map.piece(c), map.piece(cells[0]), scale));
    VertexStar {
        vertex: v,
        position: x,
        cells,
        faces,
        edges,
        radius: 0.5 * link,
        boundary: k.is_boundary_vertex(v),
        trivial,
    }
}

pub fn vertex_stars(map: &PLMap) -> Vec<VertexStar> {
    map.complex().vertices().iter().map(|&v| vertex_star(map, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::complex::{kuhn_cube, SimplicialComplex};

    fn two_tets() -> PLMap {
        let pts = vec![Vec3::zeros(), Vec3::y(), Vec3::z(), Vec3::new(-1.0, 0.0, 0.0), Vec3::x()];
        let k = SimplicialComplex::new(pts, vec![[3, 0, 1, 2], [4, 0, 1, 2]], vec![]).unwrap();
        let b = Affine::linear(Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0)));
        PLMap::new(k, vec![Affine::identity(), b]).unwrap()
    }

    #[test]
    fn two_tet_face_has_identity_frame() {
        let pairs = face_pairs(&two_tets());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].frame, Frame::identity());
        assert_eq!((pairs[0].left, pairs[0].right), (0, 1));
        assert!(!pairs[0].trivial);
    }

    #[test]
    fn kuhn_diagonal_has_six_sectors() {
        let (p, c) = kuhn_cube(1.0);
        let k = SimplicialComplex::new(p, c, vec![]).unwrap();
        let f = PLMap::identity(k);
        let e = f.complex().edge_id(0, 7).unwrap();
        let fan = edge_fan(&f, e).unwrap();
        assert_eq!(fan.local.angles.len(), 6);
        assert!(!fan.boundary);
        assert!(fan.trivial);
        assert!((fan.local.min_gap() - std::f64::consts::PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn octahedron_star_radius() {
        let (p, c) = crate::mesh::complex::octahedral_star(1.0);
        let k = SimplicialComplex::new(p, c, vec![]).unwrap();
        let s = vertex_star(&PLMap::identity(k), 0);
        assert_eq!(s.cells.len(), 8);
        assert_eq!(s.edges.len(), 6);
        assert_eq!(s.faces.len(), 12);
        assert!((s.radius - 0.5 / 3f64.sqrt()).abs() < 1e-14);
        assert!(!s.boundary);
    }
}
