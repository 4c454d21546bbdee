//! Field snapshot files.
//!
//! Layout: one line of JSON ([`SnapshotHeader`]) terminated by `\n`, followed
//! immediately by the physical-space samples as little-endian `f64`.
//! Components are stored one after another in `component_order`; within a
//! component the flat index is row-major with the first axis slowest,
//! `((i_x * n) + i_y) * n + i_z`, point `i` at coordinate `i * L / n`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::field::RealVectorField;
use super::grid::{Grid, GridSpec};
use crate::error::{Error, Result};

pub const SNAPSHOT_FORMAT: &str = "sgdecay-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const ALPHA_CONVENTION: &str = "h1alpha_sq = l2_sq + alpha * grad_l2_sq";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub n_points: usize,
    pub box_length: f64,
    pub alpha: f64,
    pub alpha_convention: String,
    pub component_order: Vec<String>,
    pub layout: String,
    pub time: f64,
}

impl SnapshotHeader {
    pub fn new(spec: GridSpec, alpha: f64, time: f64) -> Self {
        let names = ["u_x", "u_y", "u_z"];
        SnapshotHeader {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            dim: spec.dim,
            n_points: spec.n_points,
            box_length: spec.box_length,
            alpha,
            alpha_convention: ALPHA_CONVENTION.to_string(),
            component_order: names[..spec.dim].iter().map(|s| s.to_string()).collect(),
            layout: "component-major, row-major with first axis slowest, little-endian f64"
                .to_string(),
            time,
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            dim: self.dim,
            n_points: self.n_points,
            box_length: self.box_length,
        }
    }
}

pub fn write_snapshot(path: &Path, field: &RealVectorField, alpha: f64, time: f64) -> Result<()> {
    let header = SnapshotHeader::new(field.grid().spec(), alpha, time);
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    for c in field.components() {
        for v in c {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, RealVectorField)> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(f);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
    if header.format != SNAPSHOT_FORMAT || header.version != SNAPSHOT_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported snapshot format {} v{}",
            path.display(),
            header.format,
            header.version
        )));
    }
    let grid = Grid::from_spec(header.grid_spec())?;
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    let expected = grid.dim() * grid.len() * 8;
    if raw.len() != expected {
        return Err(Error::Config(format!(
            "{}: expected {expected} payload bytes, found {}",
            path.display(),
            raw.len()
        )));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    let components = values.chunks(grid.len()).map(<[f64]>::to_vec).collect();
    let field = RealVectorField::new(grid, components)?;
    Ok((header, field))
}
