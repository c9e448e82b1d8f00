//! Geometrically graded polygonal meshes of the L-shaped domain
//! `[-1,1]² \ [-1,0]²`, refined toward the re-entrant corner at the origin.

mod build;
mod diagnose;
mod io;
mod layers;
mod triangulate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point2};
use crate::num::Real;

pub use build::build_graded_mesh;
pub use diagnose::{diagnose, grading_ratios, MeshDiagnostics};
pub use io::{deserialize_mesh, read_mesh, serialize_mesh, write_mesh, MESH_FORMAT_VERSION};
pub use layers::compute_layers;
pub use triangulate::{subtriangulate, triangulate_polygon};

/// Area of the L-shaped domain.
pub const DOMAIN_AREA: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFamily {
    /// Squares split at ratio σ toward the corner; hanging nodes become polygon vertices.
    GradedSquares,
    /// One ten-vertex ring per layer and an L-shaped hexagon at the corner.
    LayerDecagons,
    /// `LayerDecagons` with every cell split along the diagonal ray `y = x`.
    DecagonsCut,
    /// Tensor-product geometric quadrilaterals for the hp-FEM comparison.
    TensorQuadsFem,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 4] = [
        MeshFamily::GradedSquares,
        MeshFamily::LayerDecagons,
        MeshFamily::DecagonsCut,
        MeshFamily::TensorQuadsFem,
    ];

    /// One-letter tag used on the command line.
    pub fn letter(self) -> char {
        match self {
            MeshFamily::GradedSquares => 'a',
            MeshFamily::LayerDecagons => 'b',
            MeshFamily::DecagonsCut => 'c',
            MeshFamily::TensorQuadsFem => 'd',
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "graded-squares" => Ok(MeshFamily::GradedSquares),
            "b" | "layer-decagons" => Ok(MeshFamily::LayerDecagons),
            "c" | "decagons-cut" => Ok(MeshFamily::DecagonsCut),
            "d" | "tensor-quads-fem" => Ok(MeshFamily::TensorQuadsFem),
            _ => Err(Error::InvalidParameter(format!(
                "unknown mesh family `{s}` (expected one of a, b, c, d)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolygonCell<T: Real> {
    /// Counterclockwise vertex loop.
    pub vertex_ids: Vec<usize>,
    pub layer: usize,
    pub diameter: T,
    pub star_center: Point2<T>,
}

impl<T: Real> PolygonCell<T> {
    pub fn n_vertices(&self) -> usize {
        self.vertex_ids.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshEdge {
    /// Endpoints, lower global id first.
    pub vertices: [usize; 2],
    /// One adjacent cell for boundary edges, two for interior edges.
    pub cells: Vec<usize>,
}

impl MeshEdge {
    pub fn is_boundary(&self) -> bool {
        self.cells.len() == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolygonalMesh<T: Real> {
    pub vertices: Vec<Point2<T>>,
    pub cells: Vec<PolygonCell<T>>,
    pub edges: Vec<MeshEdge>,
    /// `cell_edges[c][i]` is the edge from local vertex `i` to `i + 1`.
    pub cell_edges: Vec<Vec<usize>>,
    pub family: MeshFamily,
    pub sigma: T,
    /// Refinement level; the mesh has layers `L_0..=L_n`.
    pub n: usize,
}

impl<T: Real> PolygonalMesh<T> {
    /// Builds the derived topology (edges, diameters, star centers) from vertex
    /// loops and layer indices, checking conformity.
    pub fn from_parts(
        vertices: Vec<Point2<T>>,
        loops: Vec<(Vec<usize>, usize)>,
        family: MeshFamily,
        sigma: T,
        n: usize,
    ) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("vertex {i} has non-finite coordinates")));
        }
        let mut cells = Vec::with_capacity(loops.len());
        for (c, (ids, layer)) in loops.into_iter().enumerate() {
            if ids.len() < 3 {
                return Err(Error::InvalidParameter(format!("cell {c} has fewer than 3 vertices")));
            }
            if let Some(&bad) = ids.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidParameter(format!("cell {c} references missing vertex {bad}")));
            }
            let pts: Vec<_> = ids.iter().map(|&v| vertices[v]).collect();
            if geometry::signed_area(&pts) <= T::zero() {
                return Err(Error::InvalidParameter(format!("cell {c} is not counterclockwise")));
            }
            if !geometry::is_simple(&pts) {
                return Err(Error::InvalidParameter(format!("cell {c} is not a simple polygon")));
            }
            let diameter = geometry::diameter(&pts);
            cells.push(PolygonCell { vertex_ids: ids, layer, diameter, star_center: Point2::origin() });
        }
        let (edges, cell_edges) = build_edges(&cells)?;
        let mut mesh = Self { vertices, cells, edges, cell_edges, family, sigma, n };
        for c in 0..mesh.cells.len() {
            let center = mesh.choose_star_center(c);
            mesh.cells[c].star_center = center;
        }
        Ok(mesh)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point2<T>> {
        self.cells[c].vertex_ids.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_area(&self, c: usize) -> T {
        geometry::signed_area(&self.cell_points(c))
    }

    pub fn total_area(&self) -> T {
        (0..self.n_cells()).fold(T::zero(), |a, c| a + self.cell_area(c))
    }

    pub fn is_conforming(&self) -> bool {
        self.edges.iter().all(|e| matches!(e.cells.len(), 1 | 2))
    }

    /// True when the cell has the origin among its vertices.
    pub fn touches_origin(&self, c: usize) -> bool {
        let tol = T::lit(1e-14) * self.cells[c].diameter;
        self.cells[c].vertex_ids.iter().any(|&v| self.vertices[v].norm() <= tol)
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertices()[v]
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            flags[e.vertices[0]] = true;
            flags[e.vertices[1]] = true;
        }
        flags
    }

    /// Cells grouped by layer index.
    pub fn cells_by_layer(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (c, cell) in self.cells.iter().enumerate() {
            m.entry(cell.layer).or_default().push(c);
        }
        m
    }

    /// Rigidly translated copy (used by invariance checks).
    pub fn translated(&self, shift: Point2<T>) -> Self {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v = *v + shift;
        }
        for c in &mut m.cells {
            c.star_center = c.star_center + shift;
        }
        m
    }

    fn choose_star_center(&self, c: usize) -> Point2<T> {
        let pts = self.cell_points(c);
        if self.cells[c].layer == 0 && self.touches_origin(c) {
            return Point2::origin();
        }
        if geometry::is_convex(&pts) {
            return geometry::centroid(&pts);
        }
        match geometry::kernel_chebyshev_center(&pts) {
            Some((center, _)) => center,
            None => geometry::centroid(&pts),
        }
    }
}

fn build_edges<T: Real>(cells: &[PolygonCell<T>]) -> Result<(Vec<MeshEdge>, Vec<Vec<usize>>)> {
    let mut index: BTreeMap<[usize; 2], usize> = BTreeMap::new();
    let mut edges: Vec<MeshEdge> = Vec::new();
    // orientation of each traversal: +1 when low→high
    let mut orient: Vec<Vec<i8>> = Vec::new();
    let mut cell_edges = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let n = cell.vertex_ids.len();
        let mut ce = Vec::with_capacity(n);
        for i in 0..n {
            let a = cell.vertex_ids[i];
            let b = cell.vertex_ids[(i + 1) % n];
            if a == b {
                return Err(Error::InvalidParameter(format!("cell {c} repeats vertex {a}")));
            }
            let key = [a.min(b), a.max(b)];
            let e = *index.entry(key).or_insert_with(|| {
                edges.push(MeshEdge { vertices: key, cells: Vec::new() });
                orient.push(Vec::new());
                edges.len() - 1
            });
            edges[e].cells.push(c);
            orient[e].push(if a < b { 1 } else { -1 });
            ce.push(e);
        }
        cell_edges.push(ce);
    }
    for (e, edge) in edges.iter().enumerate() {
        match edge.cells.len() {
            1 => {}
            2 if orient[e][0] != orient[e][1] => {}
            2 => {
                return Err(Error::NonConforming(format!(
                    "edge ({}, {}) is traversed in the same direction by cells {} and {}",
                    edge.vertices[0], edge.vertices[1], edge.cells[0], edge.cells[1]
                )))
            }
            k => {
                return Err(Error::NonConforming(format!(
                    "edge ({}, {}) is shared by {k} cells",
                    edge.vertices[0], edge.vertices[1]
                )))
            }
        }
    }
    Ok((edges, cell_edges))
}
