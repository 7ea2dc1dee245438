//! Binary field container: magic, header length, JSON header, little-endian f64 payload.
//!
//! ```text
//! bytes 0..8    b"AKGEOM01"
//! bytes 8..16   u64 LE: header length H
//! bytes 16..16+H  UTF-8 JSON header (ContainerHeader)
//! then          each array in header order, component-major, f64 LE
//! ```

use std::fs;
use std::path::Path;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{index_tuples, n_components, FormField, ScalarField};
use crate::grid::GridSpec;
use crate::structure::{AlmostComplexField, CompatibleTriple};

pub const MAGIC: &[u8; 8] = b"AKGEOM01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Form,
    AlmostComplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayHeader {
    pub name: String,
    pub kind: ArrayKind,
    /// Form degree; 0 for scalars, absent for matrix fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    /// Index tuple of each stored component, in storage order. For matrix
    /// fields the pair is `(row, column)` of J.
    pub components: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainerHeader {
    pub format: String,
    pub version: u32,
    pub endianness: String,
    pub dtype: String,
    /// Point order: `((i0·n1 + i1)·n2 + i2)·n3 + i3`.
    pub point_order: String,
    pub grid: GridSpec,
    pub arrays: Vec<ArrayHeader>,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

/// One stored array with its data, component-major.
#[derive(Debug, Clone)]
pub struct Array {
    pub header: ArrayHeader,
    pub data: Vec<f64>,
}

impl Array {
    pub fn form(name: &str, f: &FormField) -> Self {
        Self {
            header: ArrayHeader {
                name: name.into(),
                kind: ArrayKind::Form,
                degree: Some(f.degree),
                components: index_tuples(f.degree),
            },
            data: f.flatten(),
        }
    }

    pub fn scalar(name: &str, f: &ScalarField) -> Self {
        Self::form(name, &f.as_form())
    }

    pub fn almost_complex(name: &str, j: &AlmostComplexField) -> Self {
        let n = j.grid.len();
        let mut data = vec![0.0; 16 * n];
        for (i, m) in j.j.iter().enumerate() {
            for r in 0..4 {
                for c in 0..4 {
                    data[(4 * r + c) * n + i] = m[(r, c)];
                }
            }
        }
        Self {
            header: ArrayHeader {
                name: name.into(),
                kind: ArrayKind::AlmostComplex,
                degree: None,
                components: (0..4).flat_map(|r| (0..4).map(move |c| vec![r, c])).collect(),
            },
            data,
        }
    }

    fn component_count(&self) -> usize {
        self.header.components.len()
    }

    pub fn to_form(&self, grid: GridSpec) -> Result<FormField> {
        let p = match (self.header.kind, self.header.degree) {
            (ArrayKind::Form, Some(p)) if p <= 4 => p,
            _ => return Err(Error::Format(format!("array '{}' is not a form", self.header.name))),
        };
        if self.header.components != index_tuples(p) {
            return Err(Error::Format(format!(
                "array '{}' has component order {:?}, expected lexicographic",
                self.header.name, self.header.components
            )));
        }
        Ok(FormField::from_flat(grid, p, &self.data))
    }

    pub fn to_almost_complex(&self, grid: GridSpec) -> Result<AlmostComplexField> {
        if self.header.kind != ArrayKind::AlmostComplex || self.component_count() != 16 {
            return Err(Error::Format(format!("array '{}' is not an almost-complex field", self.header.name)));
        }
        let n = grid.len();
        let mut slots = [0usize; 16];
        for (k, rc) in self.header.components.iter().enumerate() {
            match rc.as_slice() {
                [r, c] if *r < 4 && *c < 4 => slots[4 * r + c] = k,
                _ => return Err(Error::Format(format!("bad matrix component {rc:?}"))),
            }
        }
        let j = (0..n).map(|i| Matrix4::from_fn(|r, c| self.data[slots[4 * r + c] * n + i])).collect();
        AlmostComplexField::new(grid, j)
    }
}

#[derive(Debug, Clone)]
pub struct Container {
    pub grid: GridSpec,
    pub arrays: Vec<Array>,
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl Container {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, arrays: Vec::new(), metadata: Default::default() }
    }

    pub fn push(mut self, a: Array) -> Self {
        self.arrays.push(a);
        self
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.arrays
            .iter()
            .find(|a| a.header.name == name)
            .ok_or_else(|| Error::Format(format!("container has no array '{name}'")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = ContainerHeader {
            format: "akgeom-fields".into(),
            version: FORMAT_VERSION,
            endianness: "little".into(),
            dtype: "f64".into(),
            point_order: "row-major (i0, i1, i2, i3)".into(),
            grid: self.grid,
            arrays: self.arrays.iter().map(|a| a.header.clone()).collect(),
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let payload: usize = self.arrays.iter().map(|a| a.data.len()).sum();
        let mut out = Vec::with_capacity(16 + json.len() + 8 * payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for a in &self.arrays {
            if a.data.len() != a.component_count() * self.grid.len() {
                return Err(Error::Format(format!("array '{}' has {} values", a.header.name, a.data.len())));
            }
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not an akgeom container (bad magic)".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| Error::Format("truncated header".into()))?;
        let header: ContainerHeader = serde_json::from_slice(body).map_err(|e| Error::Format(e.to_string()))?;
        if header.version != FORMAT_VERSION || header.endianness != "little" || header.dtype != "f64" {
            return Err(Error::Format(format!(
                "unsupported container (version {}, {}, {})",
                header.version, header.endianness, header.dtype
            )));
        }
        let grid = GridSpec::new(header.grid.resolution, header.grid.period)?;
        let n = grid.len();
        let mut offset = 16 + hlen;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for h in header.arrays {
            let expected = match (h.kind, h.degree) {
                (ArrayKind::Form, Some(p)) if p <= 4 => n_components(p),
                (ArrayKind::AlmostComplex, None) => 16,
                _ => return Err(Error::Format(format!("array '{}' has inconsistent kind/degree", h.name))),
            };
            if h.components.len() != expected {
                return Err(Error::Format(format!("array '{}' lists {} components", h.name, h.components.len())));
            }
            let len = expected * n;
            let raw = bytes
                .get(offset..offset + 8 * len)
                .ok_or_else(|| Error::Format(format!("payload of '{}' is truncated", h.name)))?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            offset += 8 * len;
            arrays.push(Array { header: h, data });
        }
        if offset != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - offset)));
        }
        Ok(Self { grid, arrays, metadata: header.metadata })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Container holding `omega` and `J` of a triple.
pub fn triple_container(triple: &CompatibleTriple) -> Container {
    Container::new(*triple.grid())
        .push(Array::form("omega", triple.omega()))
        .push(Array::almost_complex("J", triple.j_field()))
}

pub fn write_triple(path: &Path, triple: &CompatibleTriple) -> Result<()> {
    triple_container(triple).write(path)
}

/// Read and validate a triple written by [`write_triple`].
pub fn read_triple(path: &Path) -> Result<CompatibleTriple> {
    let c = Container::read(path)?;
    let omega = c.get("omega")?.to_form(c.grid)?;
    let j = c.get("J")?.to_almost_complex(c.grid)?;
    CompatibleTriple::new(omega, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_magic_is_rejected() {
        assert!(matches!(Container::from_bytes(b"NOTAFILE00000000"), Err(Error::Format(_))));
    }
}
