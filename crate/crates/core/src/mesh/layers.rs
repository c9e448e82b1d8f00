use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::num::Real;

use super::PolygonalMesh;

/// Layer index of every cell: `L_0` holds the cells with a vertex at the origin and
/// `L_j` the not yet assigned cells sharing a vertex with `L_{j-1}`.
pub fn compute_layers<T: Real>(mesh: &PolygonalMesh<T>) -> Result<Vec<usize>> {
    if !mesh.is_conforming() {
        return Err(Error::NonConforming("an edge is shared by more than two cells".into()));
    }
    let mut vertex_cells = vec![Vec::new(); mesh.vertices.len()];
    for (c, cell) in mesh.cells.iter().enumerate() {
        for &v in &cell.vertex_ids {
            vertex_cells[v].push(c);
        }
    }
    let mut layer = vec![usize::MAX; mesh.n_cells()];
    let mut queue = VecDeque::new();
    for c in 0..mesh.n_cells() {
        if mesh.touches_origin(c) {
            layer[c] = 0;
            queue.push_back(c);
        }
    }
    if queue.is_empty() {
        return Err(Error::NonConforming("no cell has a vertex at the origin".into()));
    }
    while let Some(c) = queue.pop_front() {
        for &v in &mesh.cells[c].vertex_ids {
            for &d in &vertex_cells[v] {
                if layer[d] == usize::MAX {
                    layer[d] = layer[c] + 1;
                    queue.push_back(d);
                }
            }
        }
    }
    if let Some(c) = layer.iter().position(|&l| l == usize::MAX) {
        return Err(Error::NonConforming(format!("cell {c} is not connected to the origin")));
    }
    Ok(layer)
}
