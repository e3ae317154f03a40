use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{barycentric, to_array, Affine, Map3, Mat3, Vec3};

use super::complex::{SimplicialComplex, LOCATE_TOL};
use super::locate::CellLocator;
use super::overlap::{bbox, excess_intersection, overlapping_pairs};

/// Continuity tolerance relative to the coordinate scale.
pub const CONTINUITY_TOL: f64 = 1e-12;

/// A piecewise affine map: one affine piece per cell of a complex.
#[derive(Clone, Debug)]
pub struct PLMap {
    complex: Arc<SimplicialComplex>,
    pieces: Vec<Affine>,
    images: Vec<Vec3>,
    reflected: bool,
    image_locator: Arc<CellLocator>,
}

/// Extends each piece past the boundary by the nearest cell.
impl Map3 for PLMap {
    fn eval(&self, x: &Vec3) -> Vec3 {
        self.pieces[self.nearest_cell(x)].apply(x)
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.pieces[self.nearest_cell(x)].matrix
    }

    fn eval_with_jacobian(&self, x: &Vec3) -> (Vec3, Mat3) {
        let a = &self.pieces[self.nearest_cell(x)];
        (a.apply(x), a.matrix)
    }
}

/// Two image cells overlapping beyond their shared face.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct OverlapWitness {
    pub cells: [usize; 2],
    pub point: [f64; 3],
    pub preimages: [[f64; 3]; 2],
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    DegeneratePiece { cell: usize, det: f64 },
    SignMixed { cells: Vec<usize> },
    Discontinuous { cell: usize, vertex: usize, residual: f64 },
    Overlap(OverlapWitness),
}

/// Outcome of [`PLMap::validate`].
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub orientation: i32,
    pub continuity_residual: f64,
    pub continuity_tolerance: f64,
    pub min_abs_det: f64,
    pub injective: bool,
    pub pairs_tested: usize,
    pub cells: usize,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn into_result(self) -> Result<ValidationReport> {
        match &self.verdict {
            Verdict::Pass => Ok(self),
            v => Err(Error::InvalidInput(format!("PL map failed validation: {v:?}"))),
        }
    }
}

impl PLMap {
    pub fn new(complex: impl Into<Arc<SimplicialComplex>>, pieces: Vec<Affine>) -> Result<Self> {
        let complex = complex.into();
        if pieces.len() != complex.cells().len() {
            return Err(Error::InvalidInput(format!("{} pieces for {} cells", pieces.len(), complex.cells().len())));
        }
        if pieces.iter().any(|p| !(p.matrix.iter().chain(p.offset.iter()).all(|v| v.is_finite()))) {
            return Err(Error::InvalidInput("non-finite piece coefficient".into()));
        }
        let mut images = vec![Vec3::repeat(f64::NAN); complex.points().len()];
        for &v in complex.vertices() {
            let c = complex.vertex_cells(v)[0];
            images[v] = pieces[c].apply(&complex.point(v));
        }
        let tets: Vec<[Vec3; 4]> = complex.cells().iter().map(|c| c.map(|i| images[i])).collect();
        Ok(PLMap { complex, pieces, images, reflected: false, image_locator: Arc::new(CellLocator::new(tets)) })
    }

    /// Pieces determined by prescribed vertex images.
    pub fn from_vertex_images(complex: impl Into<Arc<SimplicialComplex>>, images: &[Vec3]) -> Result<Self> {
        let complex = complex.into();
        if images.len() != complex.points().len() {
            return Err(Error::InvalidInput("one image per point required".into()));
        }
        let mut pieces = Vec::with_capacity(complex.cells().len());
        for (c, cell) in complex.cells().iter().enumerate() {
            let from = cell.map(|i| complex.point(i));
            let to = cell.map(|i| images[i]);
            pieces.push(
                Affine::from_vertex_images(&from, &to)
                    .ok_or(Error::DegenerateCell { cell: c, condition: f64::INFINITY })?,
            );
        }
        Self::new(complex, pieces)
    }

    pub fn identity(complex: impl Into<Arc<SimplicialComplex>>) -> Self {
        let complex = complex.into();
        let n = complex.cells().len();
        Self::new(complex, vec![Affine::identity(); n]).expect("identity pieces are well formed")
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn complex_arc(&self) -> Arc<SimplicialComplex> {
        self.complex.clone()
    }

    pub fn pieces(&self) -> &[Affine] {
        &self.pieces
    }

    pub fn piece(&self, c: usize) -> &Affine {
        &self.pieces[c]
    }

    /// Consensus image of each point.
    pub fn vertex_image(&self, v: usize) -> Vec3 {
        self.images[v]
    }

    /// `true` when the domain was reflected by [`PLMap::normalized`].
    pub fn reflected(&self) -> bool {
        self.reflected
    }

    /// Scale for absolute tolerances: largest coordinate of domain or image.
    pub fn scale(&self) -> f64 {
        self.complex.vertices().iter().fold(self.complex.scale(), |s, &v| s.max(self.images[v].amax()))
    }

    pub fn image_cell_points(&self, c: usize) -> [Vec3; 4] {
        self.complex.cells()[c].map(|i| self.images[i])
    }

    pub fn locate(&self, x: &Vec3) -> Option<usize> {
        self.complex.locate(x).map(|(c, _)| c)
    }

    /// Cell whose smallest barycentric coordinate at `x` is largest: the
    /// containing cell inside the domain, the nearest one outside.
    pub fn nearest_cell(&self, x: &Vec3) -> usize {
        if let Some(c) = self.locate(x) {
            return c;
        }
        let k = &*self.complex;
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..k.cells().len() {
            if let Some(l) = barycentric(&k.cell_points(c), x) {
                let m = l.iter().copied().fold(f64::INFINITY, f64::min);
                if m > best.1 {
                    best = (c, m);
                }
            }
        }
        best.0
    }

    pub fn eval(&self, x: &Vec3) -> Result<Vec3> {
        let c = self.locate(x).ok_or(Error::OutOfDomain(to_array(x)))?;
        Ok(self.pieces[c].apply(x))
    }

    /// Image cell containing `y`.
    pub fn locate_image(&self, y: &Vec3) -> Option<usize> {
        self.image_locator.locate(y, LOCATE_TOL).map(|(c, _)| c)
    }

    /// Piecewise affine inverse, with the image cell used.
    pub fn inverse(&self, y: &Vec3) -> Option<(Vec3, usize)> {
        let c = self.locate_image(y)?;
        let inv = self.pieces[c].inverse()?;
        Some((inv.apply(y), c))
    }

    pub fn is_identity(&self) -> bool {
        self.pieces.iter().all(|p| *p == Affine::identity())
    }

    /// Orientation, continuity and global injectivity checks.
    pub fn validate(&self) -> ValidationReport {
        let k = &*self.complex;
        let scale = self.scale();
        let dets: Vec<f64> = self.pieces.iter().map(|p| p.det()).collect();
        let min_abs_det = dets.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
        let mut report = ValidationReport {
            orientation: 0,
            continuity_residual: 0.0,
            continuity_tolerance: CONTINUITY_TOL * scale,
            min_abs_det,
            injective: false,
            pairs_tested: 0,
            cells: k.cells().len(),
            verdict: Verdict::Pass,
        };
        if let Some((c, d)) = dets.iter().enumerate().find(|(_, d)| d.abs() < 1e-14 * scale.powi(3)) {
            report.verdict = Verdict::DegeneratePiece { cell: c, det: *d };
            return report;
        }
        let pos: Vec<usize> = (0..dets.len()).filter(|&c| dets[c] > 0.0).collect();
        let neg: Vec<usize> = (0..dets.len()).filter(|&c| dets[c] < 0.0).collect();
        if !pos.is_empty() && !neg.is_empty() {
            report.verdict = Verdict::SignMixed { cells: if neg.len() <= pos.len() { neg } else { pos } };
            return report;
        }
        report.orientation = if neg.is_empty() { 1 } else { -1 };

        let mut worst = (0.0, 0, 0);
        for (c, cell) in k.cells().iter().enumerate() {
            for &v in cell {
                let r = (self.pieces[c].apply(&k.point(v)) - self.images[v]).amax();
                if r > worst.0 {
                    worst = (r, c, v);
                }
            }
        }
        report.continuity_residual = worst.0;
        if worst.0 > report.continuity_tolerance {
            report.verdict = Verdict::Discontinuous { cell: worst.1, vertex: worst.2, residual: worst.0 };
            return report;
        }

        let tets = self.image_locator.tets();
        let boxes: Vec<_> = tets.iter().map(bbox).collect();
        let pairs = overlapping_pairs(&boxes, 1e-12 * scale);
        report.pairs_tested = pairs.len();
        for (a, b) in pairs {
            let shared = k.cells()[a].map(|v| k.cells()[b].contains(&v));
            if let Some(w) = excess_intersection(&tets[a], &tets[b], shared, LOCATE_TOL) {
                let pa = self.pieces[a].inverse().map(|i| i.apply(&w)).unwrap_or(w);
                let pb = self.pieces[b].inverse().map(|i| i.apply(&w)).unwrap_or(w);
                report.verdict = Verdict::Overlap(OverlapWitness {
                    cells: [a, b],
                    point: to_array(&w),
                    preimages: [to_array(&pa), to_array(&pb)],
                });
                return report;
            }
        }
        report.injective = true;
        report
    }

    /// Validates and, if every piece reverses orientation, pre-composes with
    /// `(x₁,x₂,x₃) ↦ (−x₁,x₂,x₃)`.
    pub fn normalized(&self) -> Result<PLMap> {
        let report = self.validate().into_result()?;
        if report.orientation > 0 {
            return Ok(self.clone());
        }
        let r = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        let k = &*self.complex;
        let points: Vec<Vec3> = k.points().iter().map(|p| r * p).collect();
        let boundary = k.declared_boundary().to_vec();
        let reflected = SimplicialComplex::new(points, k.cells().to_vec(), boundary)?;
        let pieces = self.pieces.iter().map(|p| Affine::new(p.matrix * r, p.offset)).collect();
        let mut out = PLMap::new(reflected, pieces)?;
        out.reflected = true;
        Ok(out)
    }
}
