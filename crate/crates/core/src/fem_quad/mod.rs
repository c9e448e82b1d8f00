//! Conforming hp finite elements on quadrilaterals with hierarchical Lobatto shape
//! functions and minimum-rule edge degrees.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assemble::{assign_degrees, solve_with_limit, DegreeRule, Solution, DIRECT_SOLVE_LIMIT};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::linalg::CsrMatrix;
use crate::mesh::PolygonalMesh;
use crate::polyquad::{gauss_legendre, gauss_lobatto_1d, legendre_table};

type Point = Point2<f64>;

/// `(l_k(x), l_k'(x))` for `k = 0..=p`: the two linear modes followed by integrated Legendre polynomials.
pub fn lobatto_table(p: usize, x: f64) -> Vec<(f64, f64)> {
    let leg = legendre_table(p.max(1), x);
    let mut out = Vec::with_capacity(p + 1);
    out.push((0.5 * (1.0 - x), -0.5));
    out.push((0.5 * (1.0 + x), 0.5));
    for k in 2..=p {
        let c = (2.0 * (2 * k - 1) as f64).sqrt();
        out.push(((leg[k].0 - leg[k - 2].0) / c, leg[k - 1].0 * ((2 * k - 1) as f64 / 2.0).sqrt()));
    }
    out.truncate(p + 1);
    out
}

/// Shape function of a quadrilateral element on `[-1, 1]²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Bilinear mode of local vertex `0..4` (CCW from `(-1,-1)`).
    Vertex(usize),
    /// Mode of Lobatto degree `k ≥ 2` on local edge `0..4` (edge `i` joins vertices `i` and `i+1`).
    Edge { edge: usize, k: usize },
    Interior(usize, usize),
}

/// Lobatto indices `(i, j)` of a mode in `l_i(ξ) l_j(η)`.
fn mode_indices(m: Mode) -> (usize, usize) {
    match m {
        Mode::Vertex(0) => (0, 0),
        Mode::Vertex(1) => (1, 0),
        Mode::Vertex(2) => (1, 1),
        Mode::Vertex(_) => (0, 1),
        Mode::Edge { edge: 0, k } => (k, 0),
        Mode::Edge { edge: 1, k } => (1, k),
        Mode::Edge { edge: 2, k } => (k, 1),
        Mode::Edge { k, .. } => (0, k),
        Mode::Interior(i, j) => (i, j),
    }
}

/// Local vertices at the start and end of the reference parametrization of each edge
/// (increasing `ξ` or `η`).
const EDGE_REFERENCE_ENDS: [(usize, usize); 4] = [(0, 1), (1, 2), (3, 2), (0, 3)];

/// Modes of an element of degree `p` whose edges carry `edge_degrees` (each `≤ p`).
pub fn element_modes(p: usize, edge_degrees: [usize; 4]) -> Vec<Mode> {
    let mut out: Vec<Mode> = (0..4).map(Mode::Vertex).collect();
    for (edge, &pe) in edge_degrees.iter().enumerate() {
        out.extend((2..=pe).map(|k| Mode::Edge { edge, k }));
    }
    for j in 2..=p {
        for i in 2..=p {
            out.push(Mode::Interior(i, j));
        }
    }
    out
}

/// Quadrilateral with a bilinear map from `[-1, 1]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadElement {
    pub index: usize,
    pub vertices: [Point; 4],
    pub vertex_ids: [usize; 4],
    pub degree: usize,
    pub layer: usize,
}

impl QuadElement {
    pub fn new(index: usize, vertices: [Point; 4], vertex_ids: [usize; 4], degree: usize, layer: usize) -> Result<Self> {
        let e = Self { index, vertices, vertex_ids, degree, layer };
        // the Jacobian determinant is bilinear, so positivity at the corners suffices
        for (xi, eta) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
            if e.jacobian(xi, eta).1 <= 0.0 {
                return Err(Error::DegenerateMap { element: index });
            }
        }
        Ok(e)
    }

    pub fn map(&self, xi: f64, eta: f64) -> Point {
        let n = bilinear(xi, eta);
        let mut p = Point::origin();
        for a in 0..4 {
            p = p + self.vertices[a].scale(n[a]);
        }
        p
    }

    /// Jacobian `[[∂x/∂ξ, ∂x/∂η], [∂y/∂ξ, ∂y/∂η]]` and its determinant.
    pub fn jacobian(&self, xi: f64, eta: f64) -> ([[f64; 2]; 2], f64) {
        let dxi = [-(1.0 - eta) / 4.0, (1.0 - eta) / 4.0, (1.0 + eta) / 4.0, -(1.0 + eta) / 4.0];
        let deta = [-(1.0 - xi) / 4.0, -(1.0 + xi) / 4.0, (1.0 + xi) / 4.0, (1.0 - xi) / 4.0];
        let mut j = [[0.0; 2]; 2];
        for a in 0..4 {
            let v = self.vertices[a];
            j[0][0] += v.x * dxi[a];
            j[0][1] += v.x * deta[a];
            j[1][0] += v.y * dxi[a];
            j[1][1] += v.y * deta[a];
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        (j, det)
    }

    /// Reference coordinates of a physical point by Newton's method.
    pub fn inverse_map(&self, x: Point) -> Option<(f64, f64)> {
        let (mut xi, mut eta) = (0.0, 0.0);
        for _ in 0..50 {
            let r = self.map(xi, eta) - x;
            let (j, det) = self.jacobian(xi, eta);
            let dxi = (j[1][1] * r.x - j[0][1] * r.y) / det;
            let deta = (-j[1][0] * r.x + j[0][0] * r.y) / det;
            xi -= dxi;
            eta -= deta;
            if dxi.abs() + deta.abs() < 1e-15 {
                break;
            }
        }
        let tol = 1e-10;
        (xi.abs() <= 1.0 + tol && eta.abs() <= 1.0 + tol).then_some((xi.clamp(-1.0, 1.0), eta.clamp(-1.0, 1.0)))
    }

    /// Values and physical gradients of `modes` at a reference point.
    pub fn eval_modes(&self, modes: &[Mode], xi: f64, eta: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
        let tx = lobatto_table(self.degree, xi);
        let ty = lobatto_table(self.degree, eta);
        let (j, det) = self.jacobian(xi, eta);
        let mut vals = Vec::with_capacity(modes.len());
        let mut grads = Vec::with_capacity(modes.len());
        for &m in modes {
            let (i, k) = mode_indices(m);
            let (a, da) = tx[i];
            let (b, db) = ty[k];
            let (gx, ge) = (da * b, a * db);
            // ∇_x = J⁻ᵀ ∇_ξ
            grads.push([(j[1][1] * gx - j[1][0] * ge) / det, (-j[0][1] * gx + j[0][0] * ge) / det]);
            vals.push(a * b);
        }
        (vals, grads)
    }
}

fn bilinear(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta) / 4.0,
        (1.0 + xi) * (1.0 - eta) / 4.0,
        (1.0 + xi) * (1.0 + eta) / 4.0,
        (1.0 - xi) * (1.0 + eta) / 4.0,
    ]
}

/// `∫ ∇φ_i · ∇φ_j` with a tensor Gauss rule of `p + 2` points per direction.
pub fn fem_local_stiffness(elem: &QuadElement, modes: &[Mode]) -> DMatrix<f64> {
    let g = gauss_legendre::<f64>(elem.degree + 2);
    let n = modes.len();
    let mut k = DMatrix::zeros(n, n);
    for (&xi, &wx) in g.nodes.iter().zip(&g.weights) {
        for (&eta, &wy) in g.nodes.iter().zip(&g.weights) {
            let (_, grads) = elem.eval_modes(modes, xi, eta);
            let w = wx * wy * elem.jacobian(xi, eta).1;
            for a in 0..n {
                for b in 0..=a {
                    k[(a, b)] += w * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                }
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            k[(a, b)] = k[(b, a)];
        }
    }
    k
}

/// `∫ f φ_i` with a tensor Gauss rule of `p + 2` points per direction.
pub fn fem_local_load(elem: &QuadElement, modes: &[Mode], f: impl Fn(Point) -> f64) -> DVector<f64> {
    let g = gauss_legendre::<f64>(elem.degree + 2);
    let mut out = DVector::zeros(modes.len());
    for (&xi, &wx) in g.nodes.iter().zip(&g.weights) {
        for (&eta, &wy) in g.nodes.iter().zip(&g.weights) {
            let fx = f(elem.map(xi, eta));
            if fx == 0.0 {
                continue;
            }
            let (vals, _) = elem.eval_modes(modes, xi, eta);
            let w = wx * wy * elem.jacobian(xi, eta).1 * fx;
            for (a, v) in vals.iter().enumerate() {
                out[a] += w * v;
            }
        }
    }
    out
}

/// Assembled and solved hp-FEM problem on a quadrilateral mesh.
#[derive(Clone, Debug)]
pub struct FemSolution {
    pub elements: Vec<QuadElement>,
    pub modes: Vec<Vec<Mode>>,
    /// Global index and sign of every local mode.
    pub cell_dofs: Vec<Vec<(usize, f64)>>,
    /// Minimum-rule degree of every mesh edge.
    pub edge_degrees: Vec<usize>,
    pub edge_offset: Vec<usize>,
    pub edge_vertices: Vec<[usize; 2]>,
    pub vertices: Vec<Point>,
    pub n_dofs: usize,
    pub n_free: usize,
    pub values: Vec<f64>,
    pub solver: Solution,
}

/// Builds the elements of a quadrilateral mesh with cell degrees from `rule`.
pub fn quad_elements(mesh: &PolygonalMesh<f64>, rule: DegreeRule) -> Result<(Vec<QuadElement>, Vec<usize>)> {
    let deg = assign_degrees(mesh, rule)?;
    let elements = mesh
        .cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            if cell.n_vertices() != 4 {
                return Err(Error::InvalidParameter(format!("cell {c} has {} vertices, expected 4", cell.n_vertices())));
            }
            let ids = [cell.vertex_ids[0], cell.vertex_ids[1], cell.vertex_ids[2], cell.vertex_ids[3]];
            QuadElement::new(c, ids.map(|v| mesh.vertices[v]), ids, deg.cell[c], cell.layer)
        })
        .collect::<Result<Vec<_>>>()?;
    let edge_degrees = mesh
        .edges
        .iter()
        .map(|e| e.cells.iter().map(|&c| deg.cell[c]).min().unwrap_or(1))
        .collect();
    Ok((elements, edge_degrees))
}

/// Solves `−Δu = f`, `u = g` on `∂Ω` on a quadrilateral mesh (every cell must have 4 vertices).
pub fn fem_assemble_solve(
    mesh: &PolygonalMesh<f64>,
    rule: DegreeRule,
    f: impl Fn(Point) -> f64 + Sync,
    g: impl Fn(Point) -> f64,
) -> Result<FemSolution> {
    let (elements, edge_degrees) = quad_elements(mesh, rule)?;
    let nv = mesh.vertices.len();
    let mut edge_offset = Vec::with_capacity(mesh.edges.len());
    let mut next = nv;
    for &pe in &edge_degrees {
        edge_offset.push(next);
        next += pe - 1;
    }
    let mut interior_offset = Vec::with_capacity(elements.len());
    for e in &elements {
        interior_offset.push(next);
        next += (e.degree - 1) * (e.degree - 1);
    }
    let n_dofs = next;

    let mut modes = Vec::with_capacity(elements.len());
    let mut cell_dofs = Vec::with_capacity(elements.len());
    for (c, elem) in elements.iter().enumerate() {
        let edges = &mesh.cell_edges[c];
        let pe = [0, 1, 2, 3].map(|i| edge_degrees[edges[i]]);
        let m = element_modes(elem.degree, pe);
        let dofs = m
            .iter()
            .map(|&mode| match mode {
                Mode::Vertex(a) => (elem.vertex_ids[a], 1.0),
                Mode::Edge { edge, k } => {
                    let (s, t) = EDGE_REFERENCE_ENDS[edge];
                    let forward = elem.vertex_ids[s] < elem.vertex_ids[t];
                    let sign = if forward || k % 2 == 0 { 1.0 } else { -1.0 };
                    (edge_offset[edges[edge]] + k - 2, sign)
                }
                Mode::Interior(i, j) => (interior_offset[c] + (j - 2) * (elem.degree - 1) + (i - 2), 1.0),
            })
            .collect::<Vec<_>>();
        modes.push(m);
        cell_dofs.push(dofs);
    }

    let locals: Vec<(DMatrix<f64>, DVector<f64>)> = elements
        .par_iter()
        .zip(modes.par_iter())
        .map(|(e, m)| (fem_local_stiffness(e, m), fem_local_load(e, m, &f)))
        .collect();
    let mut triplets = Vec::new();
    let mut load = vec![0.0; n_dofs];
    for (c, (k, l)) in locals.iter().enumerate() {
        let map = &cell_dofs[c];
        for (a, &(ga, sa)) in map.iter().enumerate() {
            load[ga] += sa * l[a];
            for (b, &(gb, sb)) in map.iter().enumerate() {
                triplets.push((ga, gb, sa * sb * k[(a, b)]));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(n_dofs, n_dofs, triplets);

    // Dirichlet data: vertex values and GLL interpolation of g on every boundary edge
    let mut dirichlet = vec![false; n_dofs];
    let mut boundary = vec![0.0; n_dofs];
    let vertices: Vec<Point> = mesh.vertices.clone();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let [lo, hi] = edge.vertices;
        let (a, b) = (vertices[lo], vertices[hi]);
        let (ga, gb) = (g(a), g(b));
        for (v, gv) in [(lo, ga), (hi, gb)] {
            dirichlet[v] = true;
            boundary[v] = gv;
        }
        let coeffs = edge_interpolation(edge_degrees[e], ga, gb, |s| g(a.lerp(b, 0.5 * (s + 1.0))));
        for (k, c) in coeffs.iter().enumerate() {
            dirichlet[edge_offset[e] + k] = true;
            boundary[edge_offset[e] + k] = *c;
        }
    }
    let n_free = dirichlet.iter().filter(|&&d| !d).count();
    let sol = solve_with_limit(&stiffness, &load, &dirichlet, &boundary, DIRECT_SOLVE_LIMIT)?;
    Ok(FemSolution {
        elements,
        modes,
        cell_dofs,
        edge_degrees,
        edge_offset,
        edge_vertices: mesh.edges.iter().map(|e| e.vertices).collect(),
        vertices,
        n_dofs,
        n_free,
        values: sol.values.clone(),
        solver: sol,
    })
}

/// Coefficients of the Lobatto modes `k = 2..=p` of the degree-`p` interpolant of `g`
/// at the GLL nodes, given the end values.
fn edge_interpolation(p: usize, ga: f64, gb: f64, g: impl Fn(f64) -> f64) -> Vec<f64> {
    if p < 2 {
        return Vec::new();
    }
    let gll = gauss_lobatto_1d::<f64>(p);
    let m = p - 1;
    let mut a = DMatrix::zeros(m, m);
    let mut r = DVector::zeros(m);
    for j in 0..m {
        let s = gll.nodes[j + 1];
        let t = lobatto_table(p, s);
        for k in 0..m {
            a[(j, k)] = t[k + 2].0;
        }
        r[j] = g(s) - ga * t[0].0 - gb * t[1].0;
    }
    a.lu().solve(&r).map(|c| c.iter().copied().collect()).unwrap_or_else(|| vec![0.0; m])
}

impl FemSolution {
    /// Value and physical gradient in element `c` at a reference point.
    pub fn eval(&self, c: usize, xi: f64, eta: f64) -> (f64, [f64; 2]) {
        let (vals, grads) = self.elements[c].eval_modes(&self.modes[c], xi, eta);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (a, &(dof, sign)) in self.cell_dofs[c].iter().enumerate() {
            let u = sign * self.values[dof];
            v += u * vals[a];
            g[0] += u * grads[a][0];
            g[1] += u * grads[a][1];
        }
        (v, g)
    }

    /// Trace on mesh edge `e` at `s ∈ [-1, 1]` (from the lower to the higher vertex id).
    pub fn edge_trace(&self, e: usize, s: f64) -> f64 {
        let [lo, hi] = self.edge_vertices[e];
        let p = self.edge_degrees[e];
        let t = lobatto_table(p, s);
        let mut v = self.values[lo] * t[0].0 + self.values[hi] * t[1].0;
        for k in 2..=p {
            v += self.values[self.edge_offset[e] + k - 2] * t[k].0;
        }
        v
    }

    /// `‖u − u_h‖_{0,ℰ}` over all mesh edges.
    pub fn skeleton_l2_error(&self, u: impl Fn(Point) -> f64) -> f64 {
        let mut total = 0.0;
        for e in 0..self.edge_vertices.len() {
            let [lo, hi] = self.edge_vertices[e];
            let (a, b) = (self.vertices[lo], self.vertices[hi]);
            let half = 0.5 * a.dist(b);
            let g = gauss_legendre::<f64>(self.edge_degrees[e] + 8);
            for (&s, &w) in g.nodes.iter().zip(&g.weights) {
                let d = u(a.lerp(b, 0.5 * (s + 1.0))) - self.edge_trace(e, s);
                total += w * half * d * d;
            }
        }
        total.sqrt()
    }

    /// `|u − u_h|_{1,Ω}` by tensor Gauss quadrature; elements touching `focus` are split
    /// `extra_levels` times toward it.
    pub fn energy_error(&self, grad_u: impl Fn(Point) -> [f64; 2], focus: Point, extra_levels: usize) -> f64 {
        let mut total = 0.0;
        for (c, elem) in self.elements.iter().enumerate() {
            let g = gauss_legendre::<f64>(elem.degree + 4);
            let corner = elem.vertices.iter().position(|v| v.dist(focus) < 1e-14);
            let boxes = match corner {
                Some(a) if extra_levels > 0 => graded_boxes(a, extra_levels),
                _ => vec![(-1.0, 1.0, -1.0, 1.0)],
            };
            for (x0, x1, y0, y1) in boxes {
                let (hx, hy) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
                for (&s, &ws) in g.nodes.iter().zip(&g.weights) {
                    for (&t, &wt) in g.nodes.iter().zip(&g.weights) {
                        let (xi, eta) = (x0 + hx * (s + 1.0), y0 + hy * (t + 1.0));
                        let x = elem.map(xi, eta);
                        let (_, gh) = self.eval(c, xi, eta);
                        let gu = grad_u(x);
                        let w = ws * wt * hx * hy * elem.jacobian(xi, eta).1;
                        total += w * ((gu[0] - gh[0]).powi(2) + (gu[1] - gh[1]).powi(2));
                    }
                }
            }
        }
        total.sqrt()
    }
}

/// Sub-boxes of `[-1,1]²` refined geometrically (ratio ½) toward reference vertex `a`.
fn graded_boxes(a: usize, levels: usize) -> Vec<(f64, f64, f64, f64)> {
    let (sx, sy): (f64, f64) = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)][a];
    // boxes in coordinates relative to the corner, distances in [0, 2]
    let mut out = Vec::new();
    let mut size = 2.0;
    for _ in 0..levels {
        let h = size / 2.0;
        for (u0, u1, v0, v1) in [(h, size, 0.0, h), (h, size, h, size), (0.0, h, h, size)] {
            out.push((u0, u1, v0, v1));
        }
        size = h;
    }
    out.push((0.0, size, 0.0, size));
    out.into_iter()
        .map(|(u0, u1, v0, v1)| {
            let (xa, xb) = (sx - sx * u0, sx - sx * u1);
            let (ya, yb) = (sy - sy * v0, sy - sy * v1);
            (xa.min(xb), xa.max(xb), ya.min(yb), ya.max(yb))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobatto_modes_vanish_at_the_ends() {
        for x in [-1.0, 1.0] {
            let t = lobatto_table(8, x);
            for (k, (v, _)) in t.iter().enumerate().skip(2) {
                assert!(v.abs() < 1e-14, "k = {k}");
            }
        }
        // derivative check by finite differences
        let h = 1e-6;
        let (a, b) = (lobatto_table(6, 0.3 + h), lobatto_table(6, 0.3 - h));
        let t = lobatto_table(6, 0.3);
        for k in 0..=6 {
            assert!(((a[k].0 - b[k].0) / (2.0 * h) - t[k].1).abs() < 1e-7);
        }
    }

    #[test]
    fn graded_boxes_tile_the_square() {
        for a in 0..4 {
            let area: f64 = graded_boxes(a, 3).iter().map(|b| (b.1 - b.0) * (b.3 - b.2)).sum();
            assert!((area - 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_square_p1_stencil() {
        let v = [Point::new(0., 0.), Point::new(1., 0.), Point::new(1., 1.), Point::new(0., 1.)];
        let e = QuadElement::new(0, v, [0, 1, 2, 3], 1, 0).unwrap();
        let modes = element_modes(1, [1; 4]);
        let k = fem_local_stiffness(&e, &modes);
        let want = [[4.0, -1.0, -2.0, -1.0], [-1.0, 4.0, -1.0, -2.0], [-2.0, -1.0, 4.0, -1.0], [-1.0, -2.0, -1.0, 4.0]];
        for i in 0..4 {
            for j in 0..4 {
                assert!((k[(i, j)] - want[i][j] / 6.0).abs() < 1e-14);
            }
            assert!(k.row(i).sum().abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_map_is_rejected() {
        let v = [Point::new(0., 0.), Point::new(1., 0.), Point::new(0., 1.), Point::new(1., 1.)];
        assert!(matches!(QuadElement::new(3, v, [0, 1, 2, 3], 2, 0), Err(Error::DegenerateMap { element: 3 })));
    }

    #[test]
    fn edge_interpolation_is_exact_for_polynomials() {
        let g = |s: f64| s.powi(4) - 0.5 * s.powi(3) + s;
        let c = edge_interpolation(5, g(-1.0), g(1.0), g);
        for s in [-0.7, 0.1, 0.55] {
            let t = lobatto_table(5, s);
            let v = g(-1.0) * t[0].0 + g(1.0) * t[1].0 + (2..=5).map(|k| c[k - 2] * t[k].0).sum::<f64>();
            assert!((v - g(s)).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_map_round_trip() {
        let v = [Point::new(0., 0.), Point::new(2., 0.2), Point::new(2.3, 1.5), Point::new(-0.2, 1.0)];
        let e = QuadElement::new(0, v, [0, 1, 2, 3], 2, 0).unwrap();
        let (xi, eta) = e.inverse_map(e.map(0.3, -0.6)).unwrap();
        assert!((xi - 0.3).abs() < 1e-12 && (eta + 0.6).abs() < 1e-12);
        assert!(e.inverse_map(Point::new(5.0, 5.0)).is_none());
    }
}
