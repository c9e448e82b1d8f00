use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseIssue, Result};
use crate::geometry::Point2;
use crate::num::Real;

use super::{MeshFamily, PolygonalMesh};

pub const MESH_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    version: u32,
    family: MeshFamily,
    sigma: f64,
    n: usize,
    vertices: Vec<[f64; 2]>,
    cells: Vec<CellRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    vertex_ids: Vec<usize>,
    layer: usize,
}

/// JSON text of a mesh. Floats are written in shortest round-trip form.
pub fn serialize_mesh<T: Real>(mesh: &PolygonalMesh<T>) -> String {
    let file = MeshFile {
        version: MESH_FORMAT_VERSION,
        family: mesh.family,
        sigma: mesh.sigma.to_f64_lossy(),
        n: mesh.n,
        vertices: mesh.vertices.iter().map(|p| [p.x.to_f64_lossy(), p.y.to_f64_lossy()]).collect(),
        cells: mesh
            .cells
            .iter()
            .map(|c| CellRecord { vertex_ids: c.vertex_ids.clone(), layer: c.layer })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("mesh is always serializable");
    s.push('\n');
    s
}

pub fn deserialize_mesh<T: Real>(text: &str) -> Result<PolygonalMesh<T>> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        field: "document".into(),
        line: Some(e.line()),
        issue: ParseIssue::Syntax(e.to_string()),
    })?;
    let invalid = |field: String, msg: String| Error::Parse { field, line: None, issue: ParseIssue::Invalid(msg) };
    if file.version != MESH_FORMAT_VERSION {
        return Err(invalid("version".into(), format!("unsupported version {}", file.version)));
    }
    let sigma = T::lit(file.sigma);
    if !(file.sigma > 0.0 && file.sigma < 1.0) {
        return Err(invalid("sigma".into(), format!("{} is not in (0, 1)", file.sigma)));
    }
    let vertices: Vec<Point2<T>> = file.vertices.iter().map(|&[x, y]| Point2::new(T::lit(x), T::lit(y))).collect();
    for (c, cell) in file.cells.iter().enumerate() {
        if let Some(&v) = cell.vertex_ids.iter().find(|&&v| v >= vertices.len()) {
            return Err(invalid(format!("cells[{c}].vertex_ids"), format!("vertex {v} does not exist")));
        }
    }
    let loops = file.cells.into_iter().map(|c| (c.vertex_ids, c.layer)).collect();
    PolygonalMesh::from_parts(vertices, loops, file.family, sigma, file.n).map_err(|e| match e {
        Error::NonConforming(m) => Error::Parse { field: "cells".into(), line: None, issue: ParseIssue::NonConforming(m) },
        Error::InvalidParameter(m) => invalid("cells".into(), m),
        e => e,
    })
}

pub fn write_mesh<T: Real>(mesh: &PolygonalMesh<T>, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_mesh(mesh))?;
    Ok(())
}

pub fn read_mesh<T: Real>(path: &Path) -> Result<PolygonalMesh<T>> {
    deserialize_mesh(&std::fs::read_to_string(path)?)
}
