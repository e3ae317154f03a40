//! JSON mesh document: points, cells, optional pieces and declared boundary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Affine, AffineDoc, Vec3};

use super::complex::SimplicialComplex;
use super::plmap::PLMap;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshDocument {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<AffineDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_boundary: Option<Vec<[usize; 3]>>,
}

impl MeshDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mesh documents always serialize")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_complex(&self) -> Result<SimplicialComplex> {
        let points = self.points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
        SimplicialComplex::new(points, self.cells.clone(), self.domain_boundary.clone().unwrap_or_default())
    }

    pub fn to_map(&self) -> Result<PLMap> {
        let complex = self.to_complex()?;
        let pieces = self
            .pieces
            .as_ref()
            .ok_or_else(|| Error::Parse("document has no `pieces`".into()))?
            .iter()
            .map(Affine::from)
            .collect();
        PLMap::new(complex, pieces)
    }

    pub fn from_complex(k: &SimplicialComplex) -> Self {
        let declared = k.declared_boundary();
        MeshDocument {
            points: k.points().iter().map(|p| [p.x, p.y, p.z]).collect(),
            cells: k.cells().to_vec(),
            pieces: None,
            domain_boundary: if declared.is_empty() { None } else { Some(declared.to_vec()) },
        }
    }

    pub fn from_map(f: &PLMap) -> Self {
        MeshDocument {
            pieces: Some(f.pieces().iter().map(AffineDoc::from).collect()),
            ..Self::from_complex(f.complex())
        }
    }
}

/// Parses a mesh document and builds its complex.
pub fn load_complex(text: &str) -> Result<SimplicialComplex> {
    MeshDocument::parse(text)?.to_complex()
}

/// Parses a mesh document with pieces and builds the PL map.
pub fn load_map(text: &str) -> Result<PLMap> {
    MeshDocument::parse(text)?.to_map()
}
