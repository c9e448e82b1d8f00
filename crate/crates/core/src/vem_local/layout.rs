use std::ops::Range;

use crate::error::{Error, Result};
use crate::geometry::{self, Point2};
use crate::mesh::PolygonalMesh;
use crate::polyquad::{dim_moments, gauss_lobatto_1d};

type Point = Point2<f64>;

/// Geometry of one polygon as seen by the local operators.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGeometry {
    pub index: usize,
    /// Counterclockwise vertices.
    pub points: Vec<Point>,
    /// Global vertex ids; only their order matters (edge orientation).
    pub vertex_ids: Vec<usize>,
    pub diameter: f64,
    pub star_center: Point,
    pub area: f64,
    pub centroid: Point,
}

impl CellGeometry {
    pub fn from_mesh(mesh: &PolygonalMesh<f64>, c: usize) -> Self {
        let cell = &mesh.cells[c];
        let points = mesh.cell_points(c);
        Self {
            index: c,
            area: geometry::signed_area(&points),
            centroid: geometry::centroid(&points),
            vertex_ids: cell.vertex_ids.clone(),
            diameter: cell.diameter,
            star_center: cell.star_center,
            points,
        }
    }

    /// Stand-alone polygon; vertices are numbered in loop order and the star center
    /// is the kernel Chebyshev center (the centroid when the kernel is empty).
    pub fn from_polygon(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 || geometry::signed_area(&points) <= 0.0 || !geometry::is_simple(&points) {
            return Err(Error::InvalidParameter("polygon must be simple and counterclockwise".into()));
        }
        let centroid = geometry::centroid(&points);
        let star_center = if geometry::is_convex(&points) {
            centroid
        } else {
            geometry::kernel_chebyshev_center(&points).map_or(centroid, |(c, _)| c)
        };
        Ok(Self {
            index: 0,
            area: geometry::signed_area(&points),
            diameter: geometry::diameter(&points),
            vertex_ids: (0..points.len()).collect(),
            star_center,
            centroid,
            points,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    /// Endpoints of local edge `i` in counterclockwise order.
    pub fn edge(&self, i: usize) -> (Point, Point) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    pub fn translated(&self, shift: Point) -> Self {
        let mut g = self.clone();
        for p in &mut g.points {
            *p = *p + shift;
        }
        g.star_center = g.star_center + shift;
        g.centroid = g.centroid + shift;
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofKind {
    Vertex(usize),
    /// Interior GLL node `node` (1-based, counted from the lower global vertex id) of local edge `edge`.
    EdgeNode { edge: usize, node: usize },
    Moment(usize),
}

/// Local degrees of freedom in canonical order: vertex values, interior GLL node
/// values edge by edge, then scaled moments.
#[derive(Clone, Debug, PartialEq)]
pub struct DofLayout {
    pub cell: usize,
    pub degree: usize,
    pub edge_degrees: Vec<usize>,
    /// True when the counterclockwise traversal of the edge runs from the lower to the higher global id.
    pub edge_forward: Vec<bool>,
    edge_offsets: Vec<usize>,
    n_moments: usize,
}

impl DofLayout {
    pub fn new(geom: &CellGeometry, degree: usize, edge_degrees: &[usize]) -> Result<Self> {
        if degree < 2 {
            return Err(Error::DegreeTooLow(degree));
        }
        let nv = geom.n_vertices();
        if edge_degrees.len() != nv {
            return Err(Error::InvalidParameter(format!(
                "{} edge degrees given for a cell with {nv} edges",
                edge_degrees.len()
            )));
        }
        if let Some(&pe) = edge_degrees.iter().find(|&&pe| pe < degree) {
            return Err(Error::InvalidParameter(format!(
                "edge degree {pe} is below the cell degree {degree} (maximum rule)"
            )));
        }
        let mut edge_offsets = Vec::with_capacity(nv + 1);
        let mut off = nv;
        for &pe in edge_degrees {
            edge_offsets.push(off);
            off += pe - 1;
        }
        edge_offsets.push(off);
        let edge_forward = (0..nv)
            .map(|i| geom.vertex_ids[i] < geom.vertex_ids[(i + 1) % nv])
            .collect();
        Ok(Self {
            cell: geom.index,
            degree,
            edge_degrees: edge_degrees.to_vec(),
            edge_forward,
            edge_offsets,
            n_moments: dim_moments(degree),
        })
    }

    /// Layout with every edge at the cell degree.
    pub fn uniform(geom: &CellGeometry, degree: usize) -> Result<Self> {
        Self::new(geom, degree, &vec![degree; geom.n_vertices()])
    }

    pub fn n_vertices(&self) -> usize {
        self.edge_degrees.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.edge_offsets[self.n_vertices()] + self.n_moments
    }

    pub fn n_boundary_dofs(&self) -> usize {
        self.edge_offsets[self.n_vertices()]
    }

    pub fn n_moments(&self) -> usize {
        self.n_moments
    }

    pub fn edge_dofs(&self, edge: usize) -> Range<usize> {
        self.edge_offsets[edge]..self.edge_offsets[edge + 1]
    }

    pub fn moment_dofs(&self) -> Range<usize> {
        let b = self.n_boundary_dofs();
        b..b + self.n_moments
    }

    pub fn kind(&self, dof: usize) -> DofKind {
        let nv = self.n_vertices();
        if dof < nv {
            return DofKind::Vertex(dof);
        }
        if dof >= self.n_boundary_dofs() {
            return DofKind::Moment(dof - self.n_boundary_dofs());
        }
        let edge = self.edge_offsets.partition_point(|&o| o <= dof) - 1;
        DofKind::EdgeNode { edge, node: dof - self.edge_offsets[edge] + 1 }
    }

    /// Local dofs at the `p_e + 1` GLL nodes of `edge`, in counterclockwise order
    /// (first entry at vertex `edge`, last at vertex `edge + 1`).
    pub fn edge_trace_dofs(&self, edge: usize) -> Vec<usize> {
        let nv = self.n_vertices();
        let pe = self.edge_degrees[edge];
        let interior = self.edge_dofs(edge);
        let mut out = Vec::with_capacity(pe + 1);
        out.push(edge);
        if self.edge_forward[edge] {
            out.extend(interior);
        } else {
            out.extend(interior.rev());
        }
        out.push((edge + 1) % nv);
        out
    }

    /// Physical position of every boundary dof (vertices and GLL nodes).
    pub fn boundary_nodes(&self, geom: &CellGeometry) -> Vec<Point> {
        let mut out = vec![Point::origin(); self.n_boundary_dofs()];
        for (i, p) in geom.points.iter().enumerate() {
            out[i] = *p;
        }
        for e in 0..self.n_vertices() {
            let (a, b) = geom.edge(e);
            let gll = gauss_lobatto_1d::<f64>(self.edge_degrees[e]);
            for (k, &dof) in self.edge_trace_dofs(e).iter().enumerate() {
                let t = 0.5 * (gll.nodes[k] + 1.0);
                out[dof] = a.lerp(b, t);
            }
        }
        out
    }
}
