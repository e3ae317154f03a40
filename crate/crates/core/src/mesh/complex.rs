use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{to_array, Mat3, Vec3};

use super::locate::CellLocator;
use super::overlap::{bbox, excess_intersection, overlapping_pairs};

/// Barycentric slack used when deciding point membership in a closed cell.
pub const LOCATE_TOL: f64 = 1e-10;

/// Relative threshold on `|det(edge matrix)| / L³`.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// A finite 3-dimensional simplicial complex given by its tetrahedra; faces,
/// edges and vertices are derived.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    points: Vec<Vec3>,
    cells: Vec<[usize; 4]>,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    vertices: Vec<usize>,
    face_cells: Vec<Vec<usize>>,
    edge_cells: Vec<Vec<usize>>,
    vertex_cells: Vec<Vec<usize>>,
    cell_faces: Vec<[usize; 4]>,
    cell_edges: Vec<[usize; 6]>,
    face_lookup: HashMap<[usize; 3], usize>,
    edge_lookup: HashMap<[usize; 2], usize>,
    declared_boundary: Vec<[usize; 3]>,
    boundary_face: Vec<bool>,
    boundary_edge: Vec<bool>,
    boundary_vertex: Vec<bool>,
    scale: f64,
    locator: CellLocator,
}

fn sorted3(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut f = [a, b, c];
    f.sort_unstable();
    f
}

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Local vertex pairs of a tetrahedron's six edges.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

impl SimplicialComplex {
    /// Builds and validates a complex: index ranges, nondegeneracy, and the
    /// common-subsimplex intersection property.
    pub fn new(points: Vec<Vec3>, cells: Vec<[usize; 4]>, declared_boundary: Vec<[usize; 3]>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidInput("complex has no cells".into()));
        }
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                if v >= points.len() {
                    return Err(Error::InvalidInput(format!("cell {c} references missing point {v}")));
                }
            }
            let mut s = *cell;
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("cell {c} repeats a vertex")));
            }
        }
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        for (c, cell) in cells.iter().enumerate() {
            let p = cell.map(|i| points[i]);
            let e = Mat3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
            let l = TET_EDGES.iter().map(|&(i, j)| (p[i] - p[j]).norm()).fold(0.0, f64::max);
            let det = e.determinant();
            if det.abs() < DEGENERACY_TOL * l * l * l {
                let sv = e.singular_values();
                let condition = sv.max() / sv.min().max(f64::MIN_POSITIVE);
                return Err(Error::DegenerateCell { cell: c, condition });
            }
        }

        let mut faces = Vec::new();
        let mut face_lookup = HashMap::new();
        let mut face_cells: Vec<Vec<usize>> = Vec::new();
        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut edge_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut vertex_cells = vec![Vec::new(); points.len()];
        for (c, v) in cells.iter().enumerate() {
            let mut cf = [0; 4];
            for (k, slot) in cf.iter_mut().enumerate() {
                let others: Vec<usize> = (0..4).filter(|&j| j != k).map(|j| v[j]).collect();
                let key = sorted3(others[0], others[1], others[2]);
                let id = *face_lookup.entry(key).or_insert_with(|| {
                    faces.push(key);
                    face_cells.push(Vec::new());
                    faces.len() - 1
                });
                face_cells[id].push(c);
                *slot = id;
            }
            let mut ce = [0; 6];
            for (k, &(i, j)) in TET_EDGES.iter().enumerate() {
                let key = sorted2(v[i], v[j]);
                let id = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                edge_cells[id].push(c);
                ce[k] = id;
            }
            for &p in v {
                vertex_cells[p].push(c);
            }
            cell_faces.push(cf);
            cell_edges.push(ce);
        }
        if let Some((f, cs)) = face_cells.iter().enumerate().find(|(_, cs)| cs.len() > 2) {
            return Err(Error::Unsupported(format!("face {:?} is shared by {} cells", faces[f], cs.len())));
        }
        let mut declared = Vec::new();
        let mut boundary_face: Vec<bool> = face_cells.iter().map(|cs| cs.len() == 1).collect();
        for f in &declared_boundary {
            let key = sorted3(f[0], f[1], f[2]);
            match face_lookup.get(&key) {
                Some(&id) => {
                    boundary_face[id] = true;
                    declared.push(*f);
                }
                None => return Err(Error::InvalidInput(format!("declared boundary face {f:?} is not a face"))),
            }
        }
        let mut boundary_edge = vec![false; edges.len()];
        let mut boundary_vertex = vec![false; points.len()];
        for (f, tri) in faces.iter().enumerate() {
            if boundary_face[f] {
                for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                    boundary_edge[edge_lookup[&sorted2(tri[a], tri[b])]] = true;
                }
                for &v in tri {
                    boundary_vertex[v] = true;
                }
            }
        }
        let mut vertices: Vec<usize> = (0..points.len()).filter(|&i| !vertex_cells[i].is_empty()).collect();
        vertices.sort_unstable();
        let scale = points.iter().fold(1.0f64, |s, p| s.max(p.amax()));

        let tets: Vec<[Vec3; 4]> = cells.iter().map(|c| c.map(|i| points[i])).collect();
        let complex = SimplicialComplex {
            locator: CellLocator::new(tets),
            points,
            cells,
            faces,
            edges,
            vertices,
            face_cells,
            edge_cells,
            vertex_cells,
            cell_faces,
            cell_edges,
            face_lookup,
            edge_lookup,
            declared_boundary: declared,
            boundary_face,
            boundary_edge,
            boundary_vertex,
            scale,
        };
        complex.check_intersections()?;
        Ok(complex)
    }

    fn check_intersections(&self) -> Result<()> {
        let tets = self.locator.tets();
        let boxes: Vec<_> = tets.iter().map(bbox).collect();
        for (a, b) in overlapping_pairs(&boxes, 1e-12 * self.scale) {
            let shared = self.cells[a].map(|v| self.cells[b].contains(&v));
            if let Some(w) = excess_intersection(&tets[a], &tets[b], shared, LOCATE_TOL) {
                return Err(Error::BadIntersection { a, b, witness: to_array(&w) });
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Point indices used by at least one cell.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn face_cells(&self, f: usize) -> &[usize] {
        &self.face_cells[f]
    }

    pub fn edge_cells(&self, e: usize) -> &[usize] {
        &self.edge_cells[e]
    }

    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    /// Face ids of a cell; entry `k` is opposite local vertex `k`.
    pub fn cell_faces(&self, c: usize) -> [usize; 4] {
        self.cell_faces[c]
    }

    /// Edge ids of a cell in [`TET_EDGES`] order.
    pub fn cell_edges(&self, c: usize) -> [usize; 6] {
        self.cell_edges[c]
    }

    pub fn face_id(&self, a: usize, b: usize, c: usize) -> Option<usize> {
        self.face_lookup.get(&sorted3(a, b, c)).copied()
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&sorted2(a, b)).copied()
    }

    pub fn declared_boundary(&self) -> &[[usize; 3]] {
        &self.declared_boundary
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.boundary_face[f]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Largest absolute coordinate, at least 1.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn cell_points(&self, c: usize) -> [Vec3; 4] {
        self.cells[c].map(|i| self.points[i])
    }

    pub fn face_points(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|i| self.points[i])
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        crate::geom::tet_volume(&self.cell_points(c))
    }

    pub fn volume(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_volume(c)).sum()
    }

    /// The vertex of cell `c` not on face `f`.
    pub fn opposite_vertex(&self, c: usize, f: usize) -> usize {
        let k = self.cell_faces[c].iter().position(|&g| g == f).expect("face belongs to cell");
        self.cells[c][k]
    }

    /// Cell containing `x` (closed, with a small barycentric slack).
    pub fn locate(&self, x: &Vec3) -> Option<(usize, [f64; 4])> {
        self.locator.locate(x, LOCATE_TOL)
    }

    pub fn locator(&self) -> &CellLocator {
        &self.locator
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &v in &self.vertices {
            lo = lo.inf(&self.points[v]);
            hi = hi.sup(&self.points[v]);
        }
        (lo, hi)
    }
}

/// The six Kuhn simplices of `[0,1]³`, `x_{σ(1)} ≤ x_{σ(2)} ≤ x_{σ(3)}`,
/// scaled by `side`.
pub fn kuhn_cube(side: f64) -> (Vec<Vec3>, Vec<[usize; 4]>) {
    let mut points = Vec::new();
    for i in 0..8usize {
        points.push(Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64) * side);
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let cells = perms
        .iter()
        .map(|p| {
            let mut idx = [0usize; 4];
            let mut cur = 7usize;
            idx[0] = cur;
            for (k, &axis) in p.iter().enumerate() {
                cur &= !(1 << axis);
                idx[k + 1] = cur;
            }
            idx.reverse();
            idx
        })
        .collect();
    (points, cells)
}

/// Octahedron with vertices `±e_i` coned from the origin: eight cells around
/// one interior vertex (point 0).
pub fn octahedral_star(radius: f64) -> (Vec<Vec3>, Vec<[usize; 4]>) {
    let mut points = vec![Vec3::zeros()];
    for a in 0..3 {
        let mut e = Vec3::zeros();
        e[a] = radius;
        points.push(e);
        points.push(-e);
    }
    let mut cells = Vec::new();
    for sx in 0..2 {
        for sy in 0..2 {
            for sz in 0..2 {
                cells.push([0, 1 + sx, 3 + sy, 5 + sz]);
            }
        }
    }
    (points, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tet_combinatorics() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let k = SimplicialComplex::new(pts, vec![[0, 1, 2, 3]], vec![]).unwrap();
        assert_eq!(k.vertices().len(), 4);
        assert_eq!(k.edges().len(), 6);
        assert_eq!(k.faces().len(), 4);
        assert_eq!(k.cells().len(), 1);
        assert!((0..4).all(|f| k.is_boundary_face(f)));
    }

    #[test]
    fn kuhn_cube_is_valid() {
        let (p, c) = kuhn_cube(1.0);
        let k = SimplicialComplex::new(p, c, vec![]).unwrap();
        assert_eq!(k.vertices().len(), 8);
        assert_eq!(k.cells().len(), 6);
        assert!((k.volume() - 1.0).abs() < 1e-14);
        let diag = k.edge_id(0, 7).unwrap();
        assert_eq!(k.edge_cells(diag).len(), 6);
        assert!(!k.is_boundary_edge(diag));
    }

    #[test]
    fn degenerate_cell_reports_condition() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        match SimplicialComplex::new(pts, vec![[0, 1, 2, 3]], vec![]) {
            Err(Error::DegenerateCell { cell: 0, condition }) => assert!(condition > 1e10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn octahedral_star_has_interior_vertex() {
        let (p, c) = octahedral_star(1.0);
        let k = SimplicialComplex::new(p, c, vec![]).unwrap();
        assert!(!k.is_boundary_vertex(0));
        assert_eq!(k.vertex_cells(0).len(), 8);
        assert!((1..7).all(|v| k.is_boundary_vertex(v)));
    }
}
