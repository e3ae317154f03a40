//! Global assembly: parameter choice for every smoothed subsimplex, the
//! smoothed map with patch dispatch, its inverse, and the convergence sweep
//! over the scale `λ`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blend::{FaceBlend, WidthField};
use crate::edge::{max_width_for_radius, EdgeSmoother};
use crate::error::{Error, Result};
use crate::geom::{
    barycentric, fro, point_segment_distance, point_triangle_distance, segment_segment_distance, to_array, Affine,
    Frame, Map3, Mat3, Vec3,
};
use crate::mesh::{edge_fan, face_pairs, vertex_stars, EdgeFan, FacePair, PLMap, VertexStar};
use crate::norms::{pairwise_sum, RINorm, Weighted};
use crate::numeric::par_map;
use crate::quadrature::{adaptive_cube, AdaptiveOptions, QuadNode};
use crate::verify::{
    fd_check_with, injectivity_audit, jacobian_points, stratified_samples, AuditOptions, CertificationReport, Stratum,
};
use crate::vertex::VertexSmoother;

/// Barycentric tolerance for domain membership.
const DOMAIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexParam {
    pub vertex: usize,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeParam {
    pub edge: usize,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceParam {
    pub face: usize,
    pub width: f64,
}

/// Ball radii, cylinder radii and slab widths at scale `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub lambda: f64,
    pub vertices: Vec<VertexParam>,
    pub edges: Vec<EdgeParam>,
    pub faces: Vec<FaceParam>,
}

impl SmoothingParams {
    /// All lengths rescaled so that the scale becomes `lambda`.
    pub fn at_scale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Parameter(format!("λ = {lambda} outside (0, 1]")));
        }
        let k = lambda / self.lambda;
        Ok(SmoothingParams {
            lambda,
            vertices: self.vertices.iter().map(|v| VertexParam { radius: v.radius * k, ..*v }).collect(),
            edges: self.edges.iter().map(|e| EdgeParam { radius: e.radius * k, ..*e }).collect(),
            faces: self.faces.iter().map(|f| FaceParam { width: f.width * k, ..*f }).collect(),
        })
    }

    /// No subsimplex needs smoothing.
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.edges.is_empty() && self.faces.is_empty()
    }
}

/// Knobs of [`choose_params`] and [`assemble`].
#[derive(Clone, Debug)]
pub struct SmoothingOptions {
    /// Cylinder radius as a fraction of the edge length.
    pub edge_fraction: f64,
    /// Slab width cap as a fraction of the face inradius and cell heights.
    pub face_fraction: f64,
    /// Nodes per axis of the cylindrical Jacobian grid of each edge.
    pub edge_grid: usize,
    /// Radius halvings allowed per edge.
    pub max_halvings: usize,
    pub seed: u64,
}

impl Default for SmoothingOptions {
    fn default() -> Self {
        SmoothingOptions { edge_fraction: 0.1, face_fraction: 0.1, edge_grid: 24, max_halvings: 6, seed: 0 }
    }
}

/// Which subsimplices are smoothed, after the boundary rules.
struct Plan {
    pairs: HashMap<usize, FacePair>,
    fans: HashMap<usize, EdgeFan>,
    stars: Vec<VertexStar>,
    faces: Vec<usize>,
    edges: Vec<usize>,
    vertices: Vec<usize>,
}

impl Plan {
    fn new(map: &PLMap) -> Result<Plan> {
        let k = map.complex();
        let mut pairs = HashMap::new();
        let mut faces = Vec::new();
        for p in face_pairs(map) {
            if p.trivial {
                continue;
            }
            if p.boundary {
                return Err(Error::Unsupported(format!(
                    "face {} lies on a declared boundary but is not affine across it",
                    p.face
                )));
            }
            faces.push(p.face);
            pairs.insert(p.face, p);
        }
        faces.sort_unstable();
        let mut edge_load: HashMap<usize, usize> = HashMap::new();
        for &f in &faces {
            let [a, b, c] = k.faces()[f];
            for (u, v) in [(a, b), (b, c), (a, c)] {
                if let Some(e) = k.edge_id(u, v) {
                    *edge_load.entry(e).or_default() += 1;
                }
            }
        }
        let mut fans = HashMap::new();
        let mut edges = Vec::new();
        for (e, &[a, b]) in k.edges().iter().enumerate() {
            let load = edge_load.get(&e).copied().unwrap_or(0);
            if k.is_boundary_edge(e) {
                if load >= 2 {
                    return Err(Error::Unsupported(format!(
                        "boundary edge {e} ({a}–{b}) carries {load} blended faces"
                    )));
                }
                continue;
            }
            if load == 0 {
                continue;
            }
            let fan = edge_fan(map, e)?;
            if !fan.trivial {
                edges.push(e);
                fans.insert(e, fan);
            }
        }
        let stars = vertex_stars(map);
        let mut vertices = Vec::new();
        for star in &stars {
            let v = star.vertex;
            if star.trivial {
                continue;
            }
            if !star.boundary {
                vertices.push(v);
                continue;
            }
            let blended: Vec<usize> = star.faces.iter().copied().filter(|f| pairs.contains_key(f)).collect();
            if blended.len() < 2 {
                continue;
            }
            let carrier = fans.keys().copied().find(|e| {
                let [a, b] = k.edges()[*e];
                blended.iter().all(|&f| k.faces()[f].contains(&a) && k.faces()[f].contains(&b))
                    && star.cells.iter().all(|&c| k.cells()[c].contains(&a) && k.cells()[c].contains(&b))
            });
            if carrier.is_none() {
                return Err(Error::Unsupported(format!(
                    "boundary vertex {v}: blended faces do not share one smoothed interior edge around which the whole star lies"
                )));
            }
        }
        Ok(Plan { pairs, fans, stars, faces, edges, vertices })
    }
}

fn inradius(t: &[Vec3; 3]) -> f64 {
    let area = 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
    let perim = (t[1] - t[0]).norm() + (t[2] - t[1]).norm() + (t[0] - t[2]).norm();
    2.0 * area / perim
}

fn plane_distance(t: &[Vec3; 3], x: &Vec3) -> f64 {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0])).normalize();
    (x - t[0]).dot(&n).abs()
}

fn edge_radius_bound(map: &PLMap, fan: &EdgeFan, vrad: &HashMap<usize, f64>, opts: &SmoothingOptions) -> f64 {
    let k = map.complex();
    let [a, b] = fan.vertices;
    let (pa, pb) = (k.point(a), k.point(b));
    let mut r = opts.edge_fraction * fan.length;
    for &c in fan.cells.iter().filter(|&&c| c != usize::MAX) {
        let opp: Vec<usize> = k.cells()[c].iter().copied().filter(|&v| v != a && v != b).collect();
        r = r.min(0.5 * segment_segment_distance(&pa, &pb, &k.point(opp[0]), &k.point(opp[1])));
    }
    for (v, other) in [(a, b), (b, a)] {
        let Some(&big_r) = vrad.get(&v) else { continue };
        let pv = k.point(v);
        let unit = pv + (k.point(other) - pv).normalize();
        let ray = |w: usize| pv + (k.point(w) - pv).normalize() * 1e3;
        let mut s = 1.0f64;
        for &c in k.vertex_cells(v) {
            for f in k.cell_faces(c) {
                let fv = k.faces()[f];
                if fv.contains(&v) && !(fv.contains(&a) && fv.contains(&b)) {
                    let rest: Vec<usize> = fv.iter().copied().filter(|&x| x != v).collect();
                    s = s.min(point_triangle_distance(&unit, &pv, &ray(rest[0]), &ray(rest[1])));
                }
            }
            for e in k.cell_edges(c) {
                let [u, w] = k.edges()[e];
                if (u == v || w == v) && e != fan.edge {
                    let o = if u == v { w } else { u };
                    s = s.min(point_segment_distance(&unit, &pv, &ray(o)));
                }
            }
        }
        r = r.min(big_r * s / 8.0);
    }
    r
}

fn face_width(map: &PLMap, plan: &Plan, f: usize, radii: &HashMap<usize, f64>, opts: &SmoothingOptions) -> f64 {
    let k = map.complex();
    let pair = &plan.pairs[&f];
    let tri = k.face_points(f);
    let h = [pair.left, pair.right]
        .iter()
        .map(|&c| plane_distance(&tri, &k.point(k.opposite_vertex(c, f))))
        .fold(f64::INFINITY, f64::min);
    let mut w = opts.face_fraction * inradius(&tri).min(h);
    let [a, b, c] = k.faces()[f];
    for (u, v) in [(a, b), (b, c), (a, c)] {
        if let Some(e) = k.edge_id(u, v) {
            if let (Some(fan), Some(&r)) = (plan.fans.get(&e), radii.get(&e)) {
                w = w.min(0.5 * max_width_for_radius(fan.local.min_gap(), r));
            }
        }
    }
    w
}

/// Parameters at `λ = 1`: ball radii from the vertex stars, cylinder radii
/// from the edge geometry, slab widths from the strip-separation bound, each
/// with a factor-two margin. Edge radii are halved until the sampled Jacobian
/// of every edge construction is positive.
pub fn choose_params(map: &PLMap, opts: &SmoothingOptions) -> Result<SmoothingParams> {
    map.validate().into_result()?;
    let plan = Plan::new(map)?;
    let k = map.complex();
    let mut vertices = Vec::new();
    for &v in &plan.vertices {
        let mut r = plan.stars[v].radius;
        for &w in &plan.vertices {
            if w != v {
                r = r.min(0.25 * (k.point(v) - k.point(w)).norm());
            }
        }
        vertices.push(VertexParam { vertex: v, radius: r });
    }
    let vrad: HashMap<usize, f64> = vertices.iter().map(|v| (v.vertex, v.radius)).collect();
    let mut radii: HashMap<usize, f64> =
        plan.edges.iter().map(|&e| (e, edge_radius_bound(map, &plan.fans[&e], &vrad, opts))).collect();
    let mut halvings: HashMap<usize, usize> = HashMap::new();
    loop {
        let widths: HashMap<usize, f64> =
            plan.faces.iter().map(|&f| (f, face_width(map, &plan, f, &radii, opts))).collect();
        let results = par_map(&plan.edges, |&e| build_edge(&plan.fans[&e], radii[&e], &widths, opts.edge_grid));
        let mut failed = Vec::new();
        for (&e, res) in plan.edges.iter().zip(results) {
            match res {
                Ok(_) => {}
                Err(Error::Certification(msg)) | Err(Error::Construction(msg)) => failed.push((e, msg)),
                Err(other) => return Err(other),
            }
        }
        if failed.is_empty() {
            let mut edges: Vec<EdgeParam> =
                plan.edges.iter().map(|&e| EdgeParam { edge: e, radius: radii[&e] }).collect();
            edges.sort_by_key(|p| p.edge);
            let mut faces: Vec<FaceParam> =
                plan.faces.iter().map(|&f| FaceParam { face: f, width: widths[&f] }).collect();
            faces.sort_by_key(|p| p.face);
            return Ok(SmoothingParams { lambda: 1.0, vertices, edges, faces });
        }
        for (e, msg) in failed {
            let n = halvings.entry(e).or_default();
            *n += 1;
            if *n > opts.max_halvings {
                return Err(Error::Certification(format!(
                    "edge {e}: {msg} after {} radius halvings",
                    opts.max_halvings
                )));
            }
            *radii.get_mut(&e).expect("edge radius") *= 0.5;
        }
    }
}

/// A face slab `{x ∈ T_B : 0 < d(x) < w}`.
#[derive(Clone, Debug)]
struct FacePatch {
    face: usize,
    cell: usize,
    blend: FaceBlend,
    tri: [Vec3; 3],
    apex: Vec3,
    height: f64,
    width: f64,
}

/// An edge cylinder in the frame of its fan.
#[derive(Clone, Debug)]
struct EdgePatch {
    edge: usize,
    frame: Frame,
    image_frame: Frame,
    cells: Vec<usize>,
    smoother: EdgeSmoother,
    radius: f64,
    length: f64,
    floor: f64,
    min_width: f64,
}

impl EdgePatch {
    fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (g, j) = self.smoother.eval_with_jacobian(&self.frame.to_local(x));
        (self.image_frame.to_world(&g), self.image_frame.rot.transpose() * j * self.frame.rot)
    }

    fn distance(&self, x: &Vec3) -> f64 {
        let l = self.frame.to_local(x);
        l.x.hypot(l.y)
    }
}

struct VertexPatch {
    vertex: usize,
    smoother: VertexSmoother,
    min_width: f64,
    patch_floor: f64,
}

/// Isotopy stages checked on the patch directions.
const ISOTOPY_STAGES: usize = 20;

/// Unit directions from vertex `v` through the cylinders and slabs that
/// cross the sphere of radius `¾R`, where the sphere map varies fastest.
fn patch_directions(core: &Assembly, v: usize, big_r: f64) -> Vec<Vec3> {
    let k = core.map.complex();
    let pv = k.point(v);
    let rs = 0.75 * big_r;
    let mut out = Vec::new();
    for e in &core.edges {
        let [a, b] = k.edges()[e.edge];
        if a != v && b != v {
            continue;
        }
        let axis = (k.point(if a == v { b } else { a }) - pv).normalize();
        let (p, q) = crate::geom::complete_basis(&axis);
        let ang = 1.2 * e.radius / rs;
        for i in 1..=48 {
            let t = ang * i as f64 / 48.0;
            for j in 0..96 {
                let th = std::f64::consts::TAU * j as f64 / 96.0;
                out.push((axis + (p * th.cos() + q * th.sin()) * t).normalize());
            }
        }
    }
    for f in &core.faces {
        let fv = k.faces()[f.face];
        if !fv.contains(&v) {
            continue;
        }
        let rest: Vec<Vec3> = fv.iter().filter(|&&x| x != v).map(|&x| (k.point(x) - pv).normalize()).collect();
        let n = f.blend.normal();
        let n = if (f.apex - pv).dot(&n) > 0.0 { n } else { -n };
        for i in 1..64 {
            let al = i as f64 / 64.0;
            let dir = (rest[0] * (1.0 - al) + rest[1] * al).normalize();
            for d in [0.05, 0.25, 0.5, 0.75, 0.95] {
                out.push((dir * rs + n * (d * f.width)).normalize());
            }
        }
    }
    out
}

fn build_edge(fan: &EdgeFan, r: f64, widths: &HashMap<usize, f64>, grid: usize) -> Result<EdgePatch> {
    let wmax = max_width_for_radius(fan.local.min_gap(), r);
    let ws: Vec<f64> = fan.faces.iter().map(|f| widths.get(f).copied().unwrap_or(0.5 * wmax)).collect();
    let fields = ws.iter().map(|&w| WidthField::constant(w)).collect();
    let smoother = EdgeSmoother::new(fan.local.clone(), fields, r, (-r, fan.length + r))?;
    let (floor, at) = smoother.jacobian_floor(grid, 1.25);
    if !(floor > 0.0) {
        return Err(Error::Certification(format!(
            "edge {} ({}–{}): Jacobian floor {floor:.3e} at local {:?}",
            fan.edge,
            fan.vertices[0],
            fan.vertices[1],
            to_array(&at)
        )));
    }
    Ok(EdgePatch {
        edge: fan.edge,
        frame: fan.frame,
        image_frame: fan.image_frame,
        cells: fan.cells.iter().copied().filter(|&c| c != usize::MAX).collect(),
        smoother,
        radius: r,
        length: fan.length,
        floor,
        min_width: ws.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

fn build_face(map: &PLMap, pair: &FacePair, w: f64) -> Result<FacePatch> {
    let k = map.complex();
    let blend = FaceBlend::new(pair.plane(), pair.left_piece, pair.right_piece, WidthField::constant(w))?;
    let cell = if blend.strip_on_right() { pair.right } else { pair.left };
    let apex = k.point(k.opposite_vertex(cell, pair.face));
    let height = blend.depth(&apex);
    if !(height > w) {
        return Err(Error::Parameter(format!(
            "face {}: width {w:.3e} exceeds the cell height {height:.3e}",
            pair.face
        )));
    }
    Ok(FacePatch { face: pair.face, cell, blend, tri: k.face_points(pair.face), apex, height, width: w })
}

/// Owner of a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Patch {
    Vertex(usize),
    Edge(usize),
    Face(usize),
    Bulk,
}

impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Patch::Vertex(v) => write!(f, "vertex {v}"),
            Patch::Edge(e) => write!(f, "edge {e}"),
            Patch::Face(x) => write!(f, "face {x}"),
            Patch::Bulk => write!(f, "bulk"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Vertex(usize),
    Edge(usize),
    Face(usize),
    Bulk,
}

/// A region of the difference set with its parameterization by `[0, 1]³`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Primitive {
    Slab(usize),
    Cylinder(usize),
    Ball(usize),
}

impl Primitive {
    fn slot(&self) -> Slot {
        match *self {
            Primitive::Slab(i) => Slot::Face(i),
            Primitive::Cylinder(i) => Slot::Edge(i),
            Primitive::Ball(i) => Slot::Vertex(i),
        }
    }
}

/// Face and edge patches over the affine bulk: the map `ĝ` seen by the
/// vertex constructions.
struct Assembly {
    map: PLMap,
    faces: Vec<FacePatch>,
    edges: Vec<EdgePatch>,
    cell_faces: Vec<Vec<usize>>,
    cell_edges: Vec<Vec<usize>>,
}

impl Assembly {
    /// Containing cell, or the nearest one for points outside the domain.
    fn locate(&self, x: &Vec3) -> (usize, bool) {
        match self.map.complex().locator().locate(x, DOMAIN_TOL) {
            Some((c, _)) => (c, true),
            None => (self.map.nearest_cell(x), false),
        }
    }

    fn slot_in(&self, x: &Vec3, cell: usize, skip: Option<Slot>) -> Slot {
        for &i in &self.cell_edges[cell] {
            if skip != Some(Slot::Edge(i)) && self.edges[i].distance(x) < self.edges[i].radius {
                return Slot::Edge(i);
            }
        }
        for &i in &self.cell_faces[cell] {
            if skip != Some(Slot::Face(i)) && self.faces[i].blend.in_strip(x) {
                return Slot::Face(i);
            }
        }
        Slot::Bulk
    }

    fn eval_slot(&self, x: &Vec3, cell: usize, slot: Slot) -> (Vec3, Mat3) {
        match slot {
            Slot::Edge(i) => self.edges[i].eval(x),
            Slot::Face(i) => self.faces[i].blend.blend_with_jacobian(x),
            _ => {
                let a = self.map.piece(cell);
                (a.apply(x), a.matrix)
            }
        }
    }
}

impl Map3 for Assembly {
    fn eval(&self, x: &Vec3) -> Vec3 {
        self.eval_with_jacobian(x).0
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.eval_with_jacobian(x).1
    }

    fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (c, _) = self.locate(x);
        self.eval_slot(x, c, self.slot_in(x, c, None))
    }
}

/// Certification data recorded during assembly.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub faces: Vec<FaceRecord>,
    pub edges: Vec<EdgeRecord>,
    pub vertices: Vec<VertexRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FaceRecord {
    pub face: usize,
    pub strip_cell: usize,
    pub width: f64,
    pub sigma: f64,
    pub jacobian_floor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeRecord {
    pub edge: usize,
    pub radius: f64,
    pub rho: f64,
    pub sampled_jacobian_floor: f64,
    pub lift_slope: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexRecord {
    pub vertex: usize,
    pub radius: f64,
    pub kappa: f64,
    pub rho: f64,
    pub degree: i64,
    pub radial_min_ratio: f64,
    pub isotopy_det_floor: f64,
    /// Isotopy floor on directions through the edge cylinders and face slabs.
    pub patch_isotopy_floor: f64,
}

/// The smoothed map `g_λ`.
pub struct SmoothedMap {
    core: Arc<Assembly>,
    vertices: Vec<VertexPatch>,
    cell_vertices: Vec<Vec<usize>>,
    params: SmoothingParams,
    scale: f64,
}

/// Builds `g_λ` from certified parameters.
pub fn assemble(map: &PLMap, params: &SmoothingParams, opts: &SmoothingOptions) -> Result<SmoothedMap> {
    let k = map.complex();
    let n = k.cells().len();
    let pairs: HashMap<usize, FacePair> = face_pairs(map).into_iter().map(|p| (p.face, p)).collect();
    let faces = params
        .faces
        .iter()
        .map(|fp| {
            let pair =
                pairs.get(&fp.face).ok_or_else(|| Error::Parameter(format!("face {} is not interior", fp.face)))?;
            build_face(map, pair, fp.width)
        })
        .collect::<Result<Vec<_>>>()?;
    let widths: HashMap<usize, f64> = params.faces.iter().map(|f| (f.face, f.width)).collect();
    let fans = params.edges.iter().map(|ep| edge_fan(map, ep.edge)).collect::<Result<Vec<_>>>()?;
    let edges = par_map(&params.edges.iter().zip(&fans).collect::<Vec<_>>(), |(ep, fan)| {
        build_edge(fan, ep.radius, &widths, opts.edge_grid)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut cell_faces = vec![Vec::new(); n];
    for (i, f) in faces.iter().enumerate() {
        cell_faces[f.cell].push(i);
    }
    let mut cell_edges = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        for &c in &e.cells {
            cell_edges[c].push(i);
        }
    }
    let core = Arc::new(Assembly { map: map.clone(), faces, edges, cell_faces, cell_edges });
    let stars: HashMap<usize, VertexStar> = vertex_stars(map).into_iter().map(|s| (s.vertex, s)).collect();
    let built = par_map(&params.vertices, |vp| {
        let hat: Arc<dyn Map3> = core.clone();
        let v = vp.vertex;
        let sm = VertexSmoother::new(hat, k.point(v), map.vertex_image(v), vp.radius, opts.seed ^ v as u64)
            .map_err(|e| Error::Certification(format!("vertex {v}: {e}")))?;
        let (floor, at) = sm.isotopy_floor_at(&patch_directions(&core, v, vp.radius), ISOTOPY_STAGES);
        if !(floor > 0.0) {
            return Err(Error::Certification(format!(
                "vertex {v}: no isotopy found: stage Jacobian {floor:.3e} in direction {:?}",
                to_array(&at)
            )));
        }
        Ok((sm, floor))
    });
    let mut vertices = Vec::new();
    let mut cell_vertices = vec![Vec::new(); n];
    for (vp, res) in params.vertices.iter().zip(built) {
        let (smoother, patch_floor) = res?;
        let star = &stars[&vp.vertex];
        for &c in &star.cells {
            cell_vertices[c].push(vertices.len());
        }
        let min_width = star.faces.iter().filter_map(|f| widths.get(f)).copied().fold(vp.radius, f64::min);
        vertices.push(VertexPatch { vertex: vp.vertex, smoother, min_width, patch_floor });
    }
    Ok(SmoothedMap { core, vertices, cell_vertices, params: params.clone(), scale: map.scale() })
}

/// Convenience: [`choose_params`] followed by [`assemble`] at scale `lambda`.
pub fn smooth(map: &PLMap, lambda: f64, opts: &SmoothingOptions) -> Result<(SmoothingParams, SmoothedMap)> {
    let params = choose_params(map, opts)?;
    let g = assemble(map, &params.at_scale(lambda)?, opts)?;
    Ok((params, g))
}

impl SmoothedMap {
    pub fn plmap(&self) -> &PLMap {
        &self.core.map
    }

    pub fn params(&self) -> &SmoothingParams {
        &self.params
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn locate(&self, x: &Vec3) -> (usize, bool) {
        self.core.locate(x)
    }

    fn slot(&self, x: &Vec3) -> (Slot, usize, bool) {
        let (c, inside) = self.locate(x);
        for &i in &self.cell_vertices[c] {
            let v = &self.vertices[i].smoother;
            if (x - v.center()).norm() < v.radius() {
                return (Slot::Vertex(i), c, inside);
            }
        }
        (self.core.slot_in(x, c, None), c, inside)
    }

    fn eval_slot(&self, x: &Vec3, cell: usize, slot: Slot) -> (Vec3, Mat3) {
        match slot {
            Slot::Vertex(i) => self.vertices[i].smoother.eval_with_jacobian(x),
            s => self.core.eval_slot(x, cell, s),
        }
    }

    fn public_patch(&self, slot: Slot) -> Patch {
        match slot {
            Slot::Vertex(i) => Patch::Vertex(self.vertices[i].vertex),
            Slot::Edge(i) => Patch::Edge(self.core.edges[i].edge),
            Slot::Face(i) => Patch::Face(self.core.faces[i].face),
            Slot::Bulk => Patch::Bulk,
        }
    }

    /// `g(x)`, `Dg(x)` and the owning patch.
    pub fn evaluate_full(&self, x: &Vec3) -> Result<(Vec3, Mat3, Patch)> {
        let (slot, c, inside) = self.slot(x);
        if !inside {
            return Err(Error::OutOfDomain(to_array(x)));
        }
        let (g, j) = self.eval_slot(x, c, slot);
        Ok((g, j, self.public_patch(slot)))
    }

    pub fn evaluate(&self, x: &Vec3) -> Result<Vec3> {
        self.evaluate_full(x).map(|r| r.0)
    }

    pub fn derivative(&self, x: &Vec3) -> Result<Mat3> {
        self.evaluate_full(x).map(|r| r.1)
    }

    pub fn patch_of(&self, x: &Vec3) -> Result<Patch> {
        self.evaluate_full(x).map(|r| r.2)
    }

    /// The original piece at `x`.
    pub fn piece_at(&self, x: &Vec3) -> Affine {
        *self.core.map.piece(self.locate(x).0)
    }

    /// Length scale of the patch at `x`, used for finite-difference steps.
    pub fn local_scale(&self, x: &Vec3) -> f64 {
        match self.slot(x).0 {
            Slot::Vertex(i) => self.vertices[i].min_width,
            Slot::Edge(i) => self.core.edges[i].radius.min(self.core.edges[i].min_width),
            Slot::Face(i) => self.core.faces[i].width,
            Slot::Bulk => self.scale,
        }
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            faces: self
                .core
                .faces
                .iter()
                .map(|f| FaceRecord {
                    face: f.face,
                    strip_cell: f.cell,
                    width: f.width,
                    sigma: f.blend.certificate().sigma,
                    jacobian_floor: f.blend.certificate().floor,
                })
                .collect(),
            edges: self
                .core
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    edge: e.edge,
                    radius: e.radius,
                    rho: e.smoother.rho(),
                    sampled_jacobian_floor: e.floor,
                    lift_slope: e.smoother.lift_slope_range(),
                })
                .collect(),
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    vertex: v.vertex,
                    radius: v.smoother.radius(),
                    kappa: v.smoother.kappa(),
                    rho: v.smoother.rho(),
                    degree: v.smoother.degree_report().degree,
                    radial_min_ratio: v.smoother.radial_report().min_ratio,
                    isotopy_det_floor: v.smoother.isotopy_report().det_floor,
                    patch_isotopy_floor: v.patch_floor,
                })
                .collect(),
        }
    }

    /// Preimage of `y`: damped Newton from `seed` or from `f⁻¹(y)`, with
    /// continuation along the segment from `g(x₀)` to `y` as a fallback.
    /// The residual `|g(x) − y|` is at most `1e-11 · scale`.
    pub fn inverse(&self, y: &Vec3, seed: Option<Vec3>) -> Result<Vec3> {
        let x0 = match seed {
            Some(s) => s,
            None => self.initial_guess(y),
        };
        let tol = 1e-11 * self.scale;
        if let Some(x) = self.newton(x0, y, tol) {
            return Ok(x);
        }
        let y0 = self.eval(&x0);
        for steps in [16usize, 256] {
            let mut x = x0;
            let mut ok = true;
            for i in 1..=steps {
                let yi = y0 + (y - y0) * (i as f64 / steps as f64);
                let t = if i == steps { tol } else { 1e-9 * self.scale };
                match self.newton(x, &yi, t) {
                    Some(z) => x = z,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Ok(x);
            }
        }
        Err(Error::Numerical(format!("g is not invertible at {:?}: Newton and continuation both failed", to_array(y))))
    }

    /// `Dg⁻¹(y) = Dg(g⁻¹(y))⁻¹`.
    pub fn inverse_derivative(&self, y: &Vec3) -> Result<Mat3> {
        let x = self.inverse(y, None)?;
        self.jacobian(&x).try_inverse().ok_or_else(|| Error::Numerical("singular derivative".into()))
    }

    fn initial_guess(&self, y: &Vec3) -> Vec3 {
        let map = &self.core.map;
        if let Some((x, _)) = map.inverse(y) {
            return x;
        }
        let k = map.complex();
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..k.cells().len() {
            if let Some(l) = barycentric(&map.image_cell_points(c), y) {
                let m = l.iter().copied().fold(f64::INFINITY, f64::min);
                if m > best.1 {
                    best = (c, m);
                }
            }
        }
        map.piece(best.0).inverse().map_or(*y, |a| a.apply(y))
    }

    fn newton(&self, x0: Vec3, y: &Vec3, tol: f64) -> Option<Vec3> {
        let mut x = x0;
        let (mut gx, mut j) = self.eval_with_jacobian(&x);
        let mut res = (gx - y).norm();
        let mut stalls = 0;
        for _ in 0..100 {
            if res <= 1e-3 * tol {
                break;
            }
            let step = j.try_inverse()? * (gx - y);
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-8 {
                let xn = x - step * t;
                let (gn, jn) = self.eval_with_jacobian(&xn);
                let rn = (gn - y).norm();
                if rn < res {
                    x = xn;
                    gx = gn;
                    j = jn;
                    res = rn;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                stalls += 1;
                if stalls > 1 {
                    break;
                }
            }
        }
        (res <= tol).then_some(x)
    }

    /// Smoothed regions of the difference set.
    pub fn primitives(&self) -> Vec<Primitive> {
        let mut out: Vec<Primitive> = (0..self.core.faces.len()).map(Primitive::Slab).collect();
        out.extend((0..self.core.edges.len()).map(Primitive::Cylinder));
        out.extend((0..self.vertices.len()).map(Primitive::Ball));
        out
    }

    /// Point and volume element of `prim` at parameter `p ∈ [0, 1]³`.
    pub fn parameterize(&self, prim: Primitive, p: &Vec3) -> (Vec3, f64) {
        match prim {
            Primitive::Slab(i) => {
                let f = &self.core.faces[i];
                let [p0, p1, p2] = f.tri;
                let area = 0.5 * (p1 - p0).cross(&(p2 - p0)).norm();
                let (u, v) = (p.x, p.y);
                let d = p.z * f.width;
                let base = p0 + (p1 - p0) * u + (p2 - p1) * (u * v);
                let s = d / f.height;
                (base * (1.0 - s) + f.apex * s, 2.0 * area * u * (1.0 - s).powi(2) * f.width)
            }
            Primitive::Cylinder(i) => {
                let e = &self.core.edges[i];
                let (s0, s1) = (-e.radius, e.length + e.radius);
                let s = s0 + p.x * (s1 - s0);
                let th = -std::f64::consts::PI + std::f64::consts::TAU * p.y;
                let t = e.radius * p.z;
                let x = e.frame.to_world(&Vec3::new(t * th.cos(), t * th.sin(), s));
                (x, t * (s1 - s0) * std::f64::consts::TAU * e.radius)
            }
            Primitive::Ball(i) => {
                let v = &self.vertices[i].smoother;
                let r = v.radius() * p.x;
                let phi = std::f64::consts::PI * p.y;
                let psi = std::f64::consts::TAU * p.z;
                let dir = Vec3::new(phi.sin() * psi.cos(), phi.sin() * psi.sin(), phi.cos());
                let jac = r * r * phi.sin() * v.radius() * std::f64::consts::PI * std::f64::consts::TAU;
                (v.center() + dir * r, jac)
            }
        }
    }

    /// Volume of the parameter box of `prim`, an upper bound for its region.
    fn primitive_extent(&self, prim: Primitive) -> f64 {
        match prim {
            Primitive::Slab(i) => {
                let f = &self.core.faces[i];
                0.5 * (f.tri[1] - f.tri[0]).cross(&(f.tri[2] - f.tri[0])).norm() * f.width
            }
            Primitive::Cylinder(i) => {
                let e = &self.core.edges[i];
                std::f64::consts::PI * e.radius * e.radius * (e.length + 2.0 * e.radius)
            }
            Primitive::Ball(i) => 4.0 / 3.0 * std::f64::consts::PI * self.vertices[i].smoother.radius().powi(3),
        }
    }

    fn owns(&self, prim: Primitive, x: &Vec3) -> Option<(usize, Slot)> {
        let (slot, c, inside) = self.slot(x);
        (inside && slot == prim.slot()).then_some((c, slot))
    }

    fn primitive_label(&self, prim: Primitive) -> String {
        self.public_patch(prim.slot()).to_string()
    }

    /// Sampling strata: one per smoothed region plus one per cell.
    pub fn strata(&self) -> Vec<Stratum<'_>> {
        let mut out: Vec<Stratum<'_>> = self
            .primitives()
            .into_iter()
            .map(|prim| Stratum {
                label: self.primitive_label(prim),
                measure: self.primitive_extent(prim),
                sampler: Box::new(move |rng: &mut ChaCha8Rng| {
                    for _ in 0..200 {
                        let p = Vec3::new(rng.gen(), rng.gen(), rng.gen());
                        let x = self.parameterize(prim, &p).0;
                        if self.owns(prim, &x).is_some() {
                            return x;
                        }
                    }
                    self.parameterize(prim, &Vec3::new(0.5, 0.5, 0.5)).0
                }),
            })
            .collect();
        let k = self.core.map.complex();
        for c in 0..k.cells().len() {
            out.push(Stratum::tet(format!("cell {c}"), k.cell_points(c)));
        }
        out
    }

    /// Largest jump between each patch and its surroundings, sampled just
    /// inside the patch boundary.
    pub fn interface_check(&self, samples: usize, seed: u64) -> CertificationReport {
        let prims = self.primitives();
        let per = if prims.is_empty() { 0 } else { samples.div_ceil(prims.len()) };
        let mut pts: Vec<(Primitive, Vec3)> = Vec::new();
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        for &prim in &prims {
            let mut got = 0;
            let mut tries = 0;
            while got < per && tries < 50 * per {
                tries += 1;
                let p = Vec3::new(rng.gen(), rng.gen(), 1.0 - 1e-12);
                let p = if let Primitive::Ball(_) = prim { Vec3::new(p.z, p.x, p.y) } else { p };
                let x = self.parameterize(prim, &p).0;
                if self.owns(prim, &x).is_some() {
                    pts.push((prim, x));
                    got += 1;
                }
            }
        }
        let errs = par_map(&pts, |&(prim, x)| {
            let (c, _) = self.locate(&x);
            let inner = self.eval_slot(&x, c, prim.slot()).0;
            let outer = match prim {
                Primitive::Ball(_) => self.core.eval(&x),
                Primitive::Cylinder(i) => self.core.eval_slot(&x, c, self.core.slot_in(&x, c, Some(Slot::Edge(i)))).0,
                Primitive::Slab(i) => self.core.eval_slot(&x, c, self.core.slot_in(&x, c, Some(Slot::Face(i)))).0,
            };
            (inner - outer).norm()
        });
        let xs: Vec<Vec3> = pts.iter().map(|p| p.1).collect();
        let (worst, at) =
            errs.iter().zip(&xs).fold((0.0f64, None), |acc, (e, x)| if *e > acc.0 { (*e, Some(*x)) } else { acc });
        let tol = 1e-10 * self.scale;
        CertificationReport {
            check: "interface continuity".into(),
            samples: xs.len(),
            worst,
            tolerance: tol,
            passed: worst <= tol,
            witness: if worst <= tol { None } else { at.map(|x| to_array(&x)) },
            partner: None,
            seed: Some(seed),
        }
    }

    /// Finite-difference, Jacobian, interface, boundary and injectivity checks.
    pub fn certify(&self, opts: &CertifyOptions) -> Vec<CertificationReport> {
        let strata = self.strata();
        let fd_pts: Vec<Vec3> =
            stratified_samples(&strata, opts.fd_samples, 100, opts.seed).into_iter().map(|p| p.1).collect();
        let mut fd = fd_check_with(
            |x| self.eval_with_jacobian(x),
            &fd_pts,
            |x| 1e-6 * self.local_scale(x),
            |x| self.piece_at(x),
        );
        fd.seed = Some(opts.seed);
        let jac_pts: Vec<Vec3> =
            stratified_samples(&strata, opts.samples, 500, opts.seed ^ 1).into_iter().map(|p| p.1).collect();
        let mut jac = jacobian_points(|x| self.jacobian(x), &jac_pts, f64::MIN_POSITIVE);
        jac.seed = Some(opts.seed ^ 1);
        let iface = self.interface_check(opts.interface_samples, opts.seed ^ 2);
        let fringe = self.boundary_fringe(opts.interface_samples, opts.seed ^ 3);
        let mut audit_opts = AuditOptions::new(self.scale, opts.seed ^ 4);
        audit_opts.samples = opts.samples;
        let audit = injectivity_audit(self, &strata, &audit_opts);
        vec![fd, jac, iface, fringe, audit]
    }

    /// `g = f` at boundary samples outside the smoothed regions.
    pub fn boundary_fringe(&self, samples: usize, seed: u64) -> CertificationReport {
        let k = self.core.map.complex();
        let bfaces: Vec<usize> = (0..k.faces().len()).filter(|&f| k.face_cells(f).len() == 1).collect();
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut worst = (0.0f64, None);
        let mut n = 0;
        if !bfaces.is_empty() {
            for _ in 0..samples {
                let f = bfaces[rng.gen_range(0..bfaces.len())];
                let t = k.face_points(f);
                let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
                if a + b > 1.0 {
                    a = 1.0 - a;
                    b = 1.0 - b;
                }
                let x = t[0] + (t[1] - t[0]) * a + (t[2] - t[0]) * b;
                let (slot, c, _) = self.slot(&x);
                if slot != Slot::Bulk {
                    continue;
                }
                n += 1;
                let e = (self.eval_slot(&x, c, slot).0 - self.core.map.piece(k.face_cells(f)[0]).apply(&x)).norm();
                if e > worst.0 {
                    worst = (e, Some(x));
                }
            }
        }
        let tol = 1e-12 * self.scale;
        CertificationReport {
            check: "boundary fringe".into(),
            samples: n,
            worst: worst.0,
            tolerance: tol,
            passed: worst.0 <= tol,
            witness: if worst.0 <= tol { None } else { worst.1.map(|x| to_array(&x)) },
            partner: None,
            seed: Some(seed),
        }
    }

    /// `g` on an `n³` grid over the bounding box; points outside the domain
    /// are skipped.
    pub fn grid_dump(&self, n: usize) -> Vec<([f64; 3], [f64; 3])> {
        let (lo, hi) = self.core.map.complex().bounding_box();
        let n = n.max(2);
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let t = Vec3::new(i as f64, j as f64, l as f64) / (n - 1) as f64;
                    pts.push(lo + (hi - lo).component_mul(&t));
                }
            }
        }
        par_map(&pts, |x| self.evaluate(x).ok().map(|g| (to_array(x), to_array(&g)))).into_iter().flatten().collect()
    }

    /// Integrals over the difference set `E_λ` and over `g_λ(E_λ)`.
    pub fn difference(&self, opts: &DifferenceOptions) -> Result<DifferenceReport> {
        for n in &opts.norms {
            n.validate()?;
        }
        if !(opts.p >= 1.0 && opts.q >= 1.0) {
            return Err(Error::Parameter(format!("exponents p = {}, q = {} must be at least 1", opts.p, opts.q)));
        }
        let prims = self.primitives();
        let outcomes = par_map(&prims, |&prim| {
            adaptive_cube(|p| self.node(prim, p), |d: &NodeData| if d.inside { 1.0 } else { 0.0 }, &opts.quadrature)
        });
        let mut nodes: Vec<(Primitive, QuadNode<NodeData>)> = Vec::new();
        let mut volume_error = 0.0;
        let mut converged = true;
        for (prim, o) in prims.iter().zip(outcomes) {
            volume_error += o.error;
            converged &= o.converged;
            nodes.extend(o.nodes.into_iter().filter(|n| n.data.inside).map(|n| (*prim, n)));
        }
        let (p, q) = (opts.p, opts.q);
        let sum =
            |f: &dyn Fn(&QuadNode<NodeData>) -> f64| pairwise_sum(&nodes.iter().map(|(_, n)| f(n)).collect::<Vec<_>>());
        let volume = sum(&|n| n.weight);
        let lp_value = sum(&|n| n.weight * n.data.diff.powf(p)).powf(1.0 / p);
        let lp_derivative = sum(&|n| n.weight * n.data.ddiff.powf(p)).powf(1.0 / p);
        let inv = |n: &QuadNode<NodeData>| n.data.inverse.map(|v| (n.weight * n.data.det, v));
        let lq_inverse_value = sum(&|n| inv(n).map_or(0.0, |(w, v)| w * v.0.powf(q))).powf(1.0 / q);
        let lq_inverse_derivative = sum(&|n| inv(n).map_or(0.0, |(w, v)| w * v.1.powf(q))).powf(1.0 / q);
        let unmatched = sum(&|n| if n.data.inverse.is_none() { n.weight * n.data.det } else { 0.0 });

        let refine = |key: &dyn Fn(&NodeData) -> f64| -> f64 {
            let Some((prim, best)) = nodes.iter().max_by(|a, b| key(&a.1.data).total_cmp(&key(&b.1.data))) else {
                return 0.0;
            };
            self.refine_max(*prim, &best.data, key)
        };
        let linf = refine(&|d| d.diff);
        let sup_dd = refine(&|d| d.ddiff);
        let linf_inverse = refine(&|d| d.inverse.map_or(0.0, |v| v.0));
        let sup_idd = refine(&|d| d.inverse.map_or(0.0, |v| v.1));
        let pieces = self.core.map.pieces();
        let sup_piece = pieces.iter().map(|a| fro(&a.matrix)).fold(0.0, f64::max);
        let sup_piece_inv = pieces.iter().filter_map(|a| a.matrix.try_inverse()).map(|m| fro(&m)).fold(0.0, f64::max);
        let sup_dg = refine(&|d| d.dg).max(sup_piece);
        let sup_dginv = refine(&|d| d.dginv).max(sup_piece_inv);

        let mut norms = Vec::new();
        for norm in &opts.norms {
            let fwd: Vec<Weighted> = nodes.iter().map(|(_, n)| Weighted::new(n.data.ddiff, n.weight)).collect();
            let bwd: Vec<Weighted> =
                nodes.iter().filter_map(|(_, n)| inv(n).map(|(w, v)| Weighted::new(v.1, w))).collect();
            norms.push(NormValue { norm: norm.to_string(), forward: norm.norm(&fwd)?, inverse: norm.norm(&bwd)? });
        }
        Ok(DifferenceReport {
            volume,
            volume_error,
            converged,
            nodes: nodes.len(),
            linf,
            lp_value,
            lp_derivative,
            w1p: (lp_value.powf(p) + lp_derivative.powf(p)).powf(1.0 / p),
            sup_derivative_difference: sup_dd,
            linf_inverse,
            lq_inverse_value,
            lq_inverse_derivative,
            w1q_inverse: (lq_inverse_value.powf(q) + lq_inverse_derivative.powf(q)).powf(1.0 / q),
            sup_inverse_derivative_difference: sup_idd,
            sup_dg,
            sup_dginv,
            unmatched_image_measure: unmatched,
            norms,
        })
    }

    fn node(&self, prim: Primitive, p: &Vec3) -> (f64, NodeData) {
        let (x, jac) = self.parameterize(prim, p);
        let Some((c, slot)) = self.owns(prim, &x) else {
            return (jac, NodeData::outside(*p));
        };
        let (g, dg) = self.eval_slot(&x, c, slot);
        let a = self.core.map.piece(c);
        let dginv = dg.try_inverse().unwrap_or(Mat3::repeat(f64::INFINITY));
        let inverse = self.core.map.inverse(&g).map(|(xf, cf)| {
            let ainv = self.core.map.piece(cf).matrix.try_inverse().unwrap_or(Mat3::zeros());
            ((x - xf).norm(), fro(&(dginv - ainv)))
        });
        let data = NodeData {
            p: *p,
            inside: true,
            det: dg.determinant(),
            diff: (g - a.apply(&x)).norm(),
            ddiff: fro(&(dg - a.matrix)),
            dg: fro(&dg),
            dginv: fro(&dginv),
            inverse,
        };
        (jac, data)
    }

    /// Three rounds of 27-point pattern search in parameter space.
    fn refine_max(&self, prim: Primitive, start: &NodeData, key: &dyn Fn(&NodeData) -> f64) -> f64 {
        let mut best = (key(start), start.p);
        let mut h = 1.0 / 64.0;
        for _ in 0..3 {
            let centre = best.1;
            for i in -1..=1 {
                for j in -1..=1 {
                    for l in -1..=1 {
                        let p = centre + Vec3::new(i as f64, j as f64, l as f64) * h;
                        if p.min() < 0.0 || p.max() > 1.0 {
                            continue;
                        }
                        let d = self.node(prim, &p).1;
                        if d.inside && key(&d) > best.0 {
                            best = (key(&d), p);
                        }
                    }
                }
            }
            h *= 0.25;
        }
        best.0
    }
}

impl Map3 for SmoothedMap {
    fn eval(&self, x: &Vec3) -> Vec3 {
        self.eval_with_jacobian(x).0
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.eval_with_jacobian(x).1
    }

    /// Extends `g` past the boundary by the formulas of the nearest cell.
    fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (slot, c, _) = self.slot(x);
        self.eval_slot(x, c, slot)
    }
}

/// Sample counts for [`SmoothedMap::certify`].
#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub samples: usize,
    pub fd_samples: usize,
    pub interface_samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { samples: 100_000, fd_samples: 10_000, interface_samples: 10_000, seed: 0 }
    }
}

#[derive(Clone, Debug)]
struct NodeData {
    p: Vec3,
    inside: bool,
    det: f64,
    diff: f64,
    ddiff: f64,
    dg: f64,
    dginv: f64,
    /// `|x − f⁻¹(g(x))|` and `‖Dg(x)⁻¹ − Df⁻¹(g(x))‖`; `None` when `g(x)`
    /// leaves `f(Ω)`.
    inverse: Option<(f64, f64)>,
}

impl NodeData {
    fn outside(p: Vec3) -> Self {
        NodeData { p, inside: false, det: 0.0, diff: 0.0, ddiff: 0.0, dg: 0.0, dginv: 0.0, inverse: None }
    }
}

/// Exponents, extra norms and quadrature settings of a difference measurement.
#[derive(Clone, Debug)]
pub struct DifferenceOptions {
    pub p: f64,
    pub q: f64,
    pub norms: Vec<RINorm>,
    pub quadrature: AdaptiveOptions,
}

impl Default for DifferenceOptions {
    fn default() -> Self {
        DifferenceOptions {
            p: 2.0,
            q: 2.0,
            norms: Vec::new(),
            quadrature: AdaptiveOptions { max_splits: 300, ..AdaptiveOptions::default() },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormValue {
    pub norm: String,
    /// Norm of `‖Dg − Df‖` over `E_λ`.
    pub forward: f64,
    /// Norm of `‖Dg⁻¹ − Df⁻¹‖` over `g(E_λ)`.
    pub inverse: f64,
}

/// Differences between `g_λ` and `f`, forward and inverse.
#[derive(Clone, Debug, Serialize)]
pub struct DifferenceReport {
    /// `𝓛³(E_λ)`.
    pub volume: f64,
    pub volume_error: f64,
    pub converged: bool,
    pub nodes: usize,
    /// `‖g − f‖_∞`.
    pub linf: f64,
    pub lp_value: f64,
    /// `‖Dg − Df‖_{L^p}`.
    pub lp_derivative: f64,
    pub w1p: f64,
    /// Sampled `sup ‖Dg − Df‖`.
    pub sup_derivative_difference: f64,
    /// `‖g⁻¹ − f⁻¹‖_∞`.
    pub linf_inverse: f64,
    pub lq_inverse_value: f64,
    /// `‖Dg⁻¹ − Df⁻¹‖_{L^q}`.
    pub lq_inverse_derivative: f64,
    pub w1q_inverse: f64,
    pub sup_inverse_derivative_difference: f64,
    pub sup_dg: f64,
    pub sup_dginv: f64,
    /// Measure of `g(E_λ) ∖ f(Ω)`, left out of the inverse integrals.
    pub unmatched_image_measure: f64,
    pub norms: Vec<NormValue>,
}

/// Settings of [`lambda_sweep`].
#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub lambdas: Vec<f64>,
    pub difference: DifferenceOptions,
    pub smoothing: SmoothingOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            lambdas: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            difference: DifferenceOptions::default(),
            smoothing: SmoothingOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub report: Option<DifferenceReport>,
    pub note: Option<String>,
}

impl SweepRow {
    /// `‖g − f‖_{W^{1,p}} + ‖g⁻¹ − f⁻¹‖_{W^{1,q}}`.
    pub fn total_error(&self) -> f64 {
        self.report.as_ref().map_or(f64::INFINITY, |r| r.w1p + r.w1q_inverse)
    }
}

/// Convergence table.
#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub p: f64,
    pub q: f64,
    pub rows: Vec<SweepRow>,
}

/// Column names of [`SweepTable::csv`].
pub const CSV_HEADER: &str = "lambda,vol_E,linf_f,w1p_f,linf_inv,w1q_inv,sup_Dg,sup_Dginv";

impl SweepTable {
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let cols = match &row.report {
                Some(r) => [r.volume, r.linf, r.w1p, r.linf_inverse, r.w1q_inverse, r.sup_dg, r.sup_dginv],
                None => [f64::NAN; 7],
            };
            out.push_str(&format!("{:e}", row.lambda));
            for c in cols {
                out.push_str(&format!(",{c:.12e}"));
            }
            out.push('\n');
        }
        out
    }

    /// First row whose total error is below `eps`.
    pub fn first_below(&self, eps: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.total_error() < eps)
    }
}

/// Assembles `g_λ` for each `λ` and measures its differences from `f`. A
/// failure at one scale is recorded in that row.
pub fn lambda_sweep(map: &PLMap, params: &SmoothingParams, opts: &SweepOptions) -> Result<SweepTable> {
    for &l in &opts.lambdas {
        if !(l > 0.0 && l <= 1.0) {
            return Err(Error::Parameter(format!("λ = {l} outside (0, 1]")));
        }
    }
    let rows = par_map(&opts.lambdas, |&lambda| {
        let res = params
            .at_scale(lambda)
            .and_then(|p| assemble(map, &p, &opts.smoothing))
            .and_then(|g| g.difference(&opts.difference));
        match res {
            Ok(r) => SweepRow { lambda, report: Some(r), note: None },
            Err(e) => SweepRow { lambda, report: None, note: Some(e.to_string()) },
        }
    });
    Ok(SweepTable { p: opts.difference.p, q: opts.difference.q, rows })
}
