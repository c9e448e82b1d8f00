use crate::geometry::Point2;
use crate::mesh::PolygonalMesh;
use crate::num::Real;
use crate::polyquad::{dim_moments, gauss_lobatto_1d};
use crate::vem_local::{CellGeometry, DofKind, DofLayout};

use super::DegreeAssignment;

/// Global numbering: vertex dofs first, then interior GLL nodes edge by edge (counted
/// from the lower vertex id), then the moments of each cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub n_dofs: usize,
    /// Number of non-Dirichlet dofs.
    pub n_free: usize,
    pub dirichlet: Vec<bool>,
    /// Local-to-global map of every cell in local layout order.
    pub cell_dofs: Vec<Vec<usize>>,
    /// First interior node dof of every edge.
    pub edge_offset: Vec<usize>,
    /// First moment dof of every cell.
    pub moment_offset: Vec<usize>,
    pub edge_degrees: Vec<usize>,
}

impl DofMap {
    /// Physical position of every vertex and edge-node dof (`None` for moments).
    pub fn positions<T: Real>(&self, mesh: &PolygonalMesh<T>) -> Vec<Option<Point2<f64>>> {
        let mut out = vec![None; self.n_dofs];
        for (v, p) in mesh.vertices.iter().enumerate() {
            out[v] = Some(p.cast());
        }
        for (e, edge) in mesh.edges.iter().enumerate() {
            let a: Point2<f64> = mesh.vertices[edge.vertices[0]].cast();
            let b: Point2<f64> = mesh.vertices[edge.vertices[1]].cast();
            let gll = gauss_lobatto_1d::<f64>(self.edge_degrees[e]);
            for k in 1..self.edge_degrees[e] {
                out[self.edge_offset[e] + k - 1] = Some(a.lerp(b, 0.5 * (gll.nodes[k] + 1.0)));
            }
        }
        out
    }
}

pub fn build_dof_map<T: Real>(mesh: &PolygonalMesh<T>, degrees: &DegreeAssignment) -> DofMap {
    let nv = mesh.vertices.len();
    let boundary_vertex = mesh.boundary_vertices();
    let mut dirichlet: Vec<bool> = boundary_vertex.clone();
    let mut edge_offset = Vec::with_capacity(mesh.edges.len());
    let mut next = nv;
    for (e, edge) in mesh.edges.iter().enumerate() {
        edge_offset.push(next);
        let n = degrees.edge[e] - 1;
        dirichlet.extend(std::iter::repeat_n(edge.is_boundary(), n));
        next += n;
    }
    let mut moment_offset = Vec::with_capacity(mesh.n_cells());
    for &p in &degrees.cell {
        moment_offset.push(next);
        let n = dim_moments(p);
        dirichlet.extend(std::iter::repeat_n(false, n));
        next += n;
    }
    let cell_dofs = (0..mesh.n_cells())
        .map(|c| {
            let ids = &mesh.cells[c].vertex_ids;
            let edges = &mesh.cell_edges[c];
            let layout = local_layout(mesh, degrees, c);
            (0..layout.n_dofs())
                .map(|i| match layout.kind(i) {
                    DofKind::Vertex(v) => ids[v],
                    DofKind::EdgeNode { edge, node } => edge_offset[edges[edge]] + node - 1,
                    DofKind::Moment(l) => moment_offset[c] + l,
                })
                .collect()
        })
        .collect();
    let n_free = dirichlet.iter().filter(|&&d| !d).count();
    DofMap {
        n_dofs: next,
        n_free,
        dirichlet,
        cell_dofs,
        edge_offset,
        moment_offset,
        edge_degrees: degrees.edge.clone(),
    }
}

fn local_layout<T: Real>(mesh: &PolygonalMesh<T>, degrees: &DegreeAssignment, c: usize) -> DofLayout {
    // only vertex ids matter for the layout; coordinates are not needed
    let cell = &mesh.cells[c];
    let geom = CellGeometry {
        index: c,
        points: vec![Point2::origin(); cell.n_vertices()],
        vertex_ids: cell.vertex_ids.clone(),
        diameter: 1.0,
        star_center: Point2::origin(),
        area: 1.0,
        centroid: Point2::origin(),
    };
    DofLayout::new(&geom, degrees.cell[c], &degrees.cell_edge_degrees(mesh, c))
        .expect("edge degrees follow the maximum rule")
}
