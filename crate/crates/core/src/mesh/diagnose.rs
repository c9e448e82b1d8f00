use crate::geometry::{self, Point2};
use crate::num::Real;

use super::PolygonalMesh;

/// Worst-case shape-regularity and grading figures of a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshDiagnostics<T: Real> {
    /// `min_E 2ρ_E / h_E`, with `ρ_E` the radius of the largest disc inside the
    /// kernel of `E` (zero when some cell is not star-shaped).
    pub min_star_radius_ratio: T,
    /// `min_E min_e |e| / h_E`.
    pub min_edge_ratio: T,
    pub max_edges_per_cell: usize,
    /// `max_{E ∉ L_0} |h_E σ / ((1-σ) dist(0,E)) - 1|`.
    pub grading_residual: T,
    pub conforming: bool,
    /// Cells whose kernel has empty interior.
    pub not_star_shaped: Vec<usize>,
    pub star_shaped_ok: bool,
    pub edge_ratio_ok: bool,
}

pub fn diagnose<T: Real>(mesh: &PolygonalMesh<T>, gamma: T, gamma_tilde: T) -> MeshDiagnostics<T> {
    let mut min_star = T::infinity();
    let mut min_edge = T::infinity();
    let mut max_edges = 0;
    let mut not_star_shaped = Vec::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        let pts = mesh.cell_points(c);
        let h = cell.diameter;
        let ratio = match geometry::kernel_chebyshev_center(&pts) {
            Some((_, rho)) => T::lit(2.0) * rho / h,
            None => {
                not_star_shaped.push(c);
                T::zero()
            }
        };
        min_star = min_star.min(ratio);
        let m = pts.len();
        for i in 0..m {
            min_edge = min_edge.min(pts[i].dist(pts[(i + 1) % m]) / h);
        }
        max_edges = max_edges.max(m);
    }
    let grading_residual = grading_ratios(mesh)
        .into_iter()
        .fold(T::zero(), |m, (_, r)| m.max((r - T::one()).abs()));
    MeshDiagnostics {
        min_star_radius_ratio: min_star,
        min_edge_ratio: min_edge,
        max_edges_per_cell: max_edges,
        grading_residual,
        conforming: mesh.is_conforming(),
        star_shaped_ok: not_star_shaped.is_empty() && min_star >= gamma,
        edge_ratio_ok: min_edge >= gamma_tilde,
        not_star_shaped,
    }
}

/// `h_E σ / ((1-σ) dist(0,E))` for every cell outside `L_0`.
pub fn grading_ratios<T: Real>(mesh: &PolygonalMesh<T>) -> Vec<(usize, T)> {
    let s = mesh.sigma;
    (0..mesh.n_cells())
        .filter(|&c| mesh.cells[c].layer > 0)
        .map(|c| {
            let d = geometry::point_polygon_distance(Point2::origin(), &mesh.cell_points(c));
            (c, mesh.cells[c].diameter * s / ((T::one() - s) * d))
        })
        .collect()
}
