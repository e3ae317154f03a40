//! Small reference maps used by the tests, the command line and the demo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geom::{Affine, Mat3, Vec3};
use crate::mesh::{kuhn_cube, octahedral_star, PLMap, SimplicialComplex};

/// Two tetrahedra sharing the face `{x₁ = 0}`: the identity on `x₁ ≤ 0` and
/// `diag(a, 1, 1)` on `x₁ ≥ 0`.
pub fn two_tets(a: f64) -> Result<PLMap> {
    let pts = vec![
        Vec3::zeros(),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(-1.0, 0.25, 0.25),
        Vec3::new(1.0, 0.25, 0.25),
    ];
    let k = SimplicialComplex::new(pts, vec![[0, 1, 2, 3], [0, 2, 1, 4]], vec![])?;
    let stretch = Affine::linear(Mat3::from_diagonal(&Vec3::new(a, 1.0, 1.0)));
    let (c_left, _) = k.locate(&Vec3::new(-0.2, 0.25, 0.25)).expect("left cell");
    let pieces = (0..2).map(|c| if c == c_left { Affine::identity() } else { stretch }).collect();
    PLMap::new(k, pieces)
}

/// The Kuhn triangulation of `[0, side]³` with every vertex image moved by a
/// seeded offset of size at most `amplitude · side` in each coordinate.
pub fn perturbed_kuhn(side: f64, amplitude: f64, seed: u64) -> Result<PLMap> {
    let (p, c) = kuhn_cube(side);
    perturbed(p, c, side * amplitude, seed)
}

/// The octahedral star of radius `radius` with perturbed vertex images,
/// including the interior vertex.
pub fn perturbed_octahedron(radius: f64, amplitude: f64, seed: u64) -> Result<PLMap> {
    let (p, c) = octahedral_star(radius);
    perturbed(p, c, radius * amplitude, seed)
}

fn perturbed(points: Vec<Vec3>, cells: Vec<[usize; 4]>, amp: f64, seed: u64) -> Result<PLMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images: Vec<Vec3> = points
        .iter()
        .map(|p| p + Vec3::new(rng.gen_range(-amp..=amp), rng.gen_range(-amp..=amp), rng.gen_range(-amp..=amp)))
        .collect();
    let k = SimplicialComplex::new(points, cells, vec![])?;
    PLMap::from_vertex_images(k, &images)
}

/// A piecewise linear map with a reflected piece: `x₁ ↦ |x₁|` on two cells.
pub fn fold() -> Result<PLMap> {
    let base = two_tets(1.0)?;
    let k = base.complex_arc();
    let flip = Affine::linear(Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0)));
    let (c_left, _) = k.locate(&Vec3::new(-0.2, 0.25, 0.25)).expect("left cell");
    let pieces = (0..2).map(|c| if c == c_left { flip } else { Affine::identity() }).collect();
    PLMap::new(k, pieces)
}
