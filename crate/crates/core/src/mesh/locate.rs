//! Uniform-grid bucketing of tetrahedra for point location.

use crate::geom::{barycentric, Vec3};

#[derive(Clone, Debug)]
pub struct CellLocator {
    lo: Vec3,
    cell_size: Vec3,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
    tets: Vec<[Vec3; 4]>,
}

impl CellLocator {
    pub fn new(tets: Vec<[Vec3; 4]>) -> Self {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for t in &tets {
            for p in t {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
        }
        if tets.is_empty() {
            lo = Vec3::zeros();
            hi = Vec3::repeat(1.0);
        }
        let ext = (hi - lo).map(|e| e.max(1e-12));
        let pad = ext * 1e-9;
        let lo = lo - pad;
        let ext = ext + pad * 2.0;
        let n = ((tets.len() as f64).cbrt() * 2.0).ceil().clamp(1.0, 64.0) as usize;
        let dims = [n, n, n];
        let cell_size = Vec3::new(ext.x / n as f64, ext.y / n as f64, ext.z / n as f64);
        let mut loc = CellLocator { lo, cell_size, dims, buckets: vec![Vec::new(); n * n * n], tets };
        for (c, t) in loc.tets.iter().enumerate() {
            let mut tl = t[0];
            let mut th = t[0];
            for p in &t[1..] {
                tl = tl.inf(p);
                th = th.sup(p);
            }
            let a = loc.bucket_coords(&tl);
            let b = loc.bucket_coords(&th);
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for k in a[2]..=b[2] {
                        let idx = (i * dims[1] + j) * dims[2] + k;
                        loc.buckets[idx].push(c as u32);
                    }
                }
            }
        }
        loc
    }

    fn bucket_coords(&self, x: &Vec3) -> [usize; 3] {
        let mut out = [0; 3];
        for a in 0..3 {
            let f = ((x[a] - self.lo[a]) / self.cell_size[a]).floor();
            out[a] = (f.max(0.0) as usize).min(self.dims[a] - 1);
        }
        out
    }

    pub fn tets(&self) -> &[[Vec3; 4]] {
        &self.tets
    }

    /// Cell containing `x` with barycentric tolerance `tol`, preferring the
    /// cell in which `x` is deepest.
    pub fn locate(&self, x: &Vec3, tol: f64) -> Option<(usize, [f64; 4])> {
        let b = self.bucket_coords(x);
        let idx = (b[0] * self.dims[1] + b[1]) * self.dims[2] + b[2];
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for &c in &self.buckets[idx] {
            let c = c as usize;
            if let Some(l) = barycentric(&self.tets[c], x) {
                let m = l.iter().cloned().fold(f64::INFINITY, f64::min);
                if m >= -tol && best.as_ref().is_none_or(|b| m > b.2) {
                    best = Some((c, l, m));
                }
            }
        }
        best.map(|(c, l, _)| (c, l))
    }

    /// All cells whose closure contains `x` up to `tol`.
    pub fn locate_all(&self, x: &Vec3, tol: f64) -> Vec<usize> {
        let b = self.bucket_coords(x);
        let idx = (b[0] * self.dims[1] + b[1]) * self.dims[2] + b[2];
        self.buckets[idx]
            .iter()
            .map(|&c| c as usize)
            .filter(|&c| barycentric(&self.tets[c], x).is_some_and(|l| l.iter().all(|&v| v >= -tol)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locates_inside_and_rejects_outside() {
        let t = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let s = [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(1.0, 1.0, 1.0)];
        let loc = CellLocator::new(vec![t, s]);
        assert_eq!(loc.locate(&Vec3::new(0.1, 0.1, 0.1), 0.0).unwrap().0, 0);
        assert_eq!(loc.locate(&Vec3::new(0.6, 0.6, 0.6), 0.0).unwrap().0, 1);
        assert!(loc.locate(&Vec3::new(2.0, 0.1, 0.1), 1e-12).is_none());
        assert_eq!(loc.locate_all(&Vec3::new(0.5, 0.5, 0.0), 1e-12), vec![0, 1]);
    }
}
