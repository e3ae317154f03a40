//! Smoothing of piecewise affine homeomorphisms of 3D simplicial complexes
//! into diffeomorphisms that converge in W^{1,p} as the smoothing scale
//! shrinks, with numerical certification of every step.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blend;
pub mod edge;
pub mod error;
pub mod fixtures;
pub mod geom;
pub mod mesh;
pub mod norms;
pub mod numeric;
pub mod pipeline;
pub mod quadrature;
pub mod verify;
pub mod vertex;

pub use error::{Error, Result};
pub use geom::{Affine, Frame, Map3, Mat3, Vec2, Vec3};
