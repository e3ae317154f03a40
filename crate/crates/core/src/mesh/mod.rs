//! Simplicial complexes, piecewise affine maps, and their local structures.

pub mod complex;
pub mod doc;
pub mod local;
pub mod locate;
pub mod overlap;
pub mod plmap;

pub use complex::{kuhn_cube, octahedral_star, SimplicialComplex};
pub use doc::{load_complex, load_map, MeshDocument};
pub use local::{edge_fan, edge_fans, face_pairs, vertex_star, vertex_stars, EdgeFan, FacePair, LocalFan, VertexStar};
pub use plmap::{OverlapWitness, PLMap, ValidationReport, Verdict};
