//! Continuous `P_k` Lagrange finite elements on a uniformly refined triangulation of a polygon.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{self, orient, Point2};
use crate::linalg::CsrMatrix;
use crate::polyquad::{triangle_rule, QuadratureRule};

type Point = Point2<f64>;

/// Where a fine node sits on the polygon boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPosition {
    /// Local polygon edge, traversed counterclockwise.
    pub edge: usize,
    /// Parameter in `[0, 1]` from vertex `edge` to vertex `edge + 1`.
    pub t: f64,
}

/// Reference `P_k` element on `(0,0), (1,0), (0,1)` with equispaced nodes `(r/k, s/k)`.
#[derive(Clone, Debug)]
pub struct LagrangeTriangle {
    pub k: usize,
    /// `(r, s)` lattice coordinates of the local nodes.
    pub lattice: Vec<(usize, usize)>,
    /// Monomial coefficients of each shape function (columns), row order as `exps`.
    coef: DMatrix<f64>,
    exps: Vec<(usize, usize)>,
}

impl LagrangeTriangle {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "element degree must be positive");
        let mut lattice = Vec::new();
        for s in 0..=k {
            for r in 0..=k - s {
                lattice.push((r, s));
            }
        }
        let exps = crate::polyquad::exponents(k);
        let n = lattice.len();
        let kf = k as f64;
        let v = DMatrix::from_fn(n, n, |i, j| {
            let (r, s) = lattice[i];
            let (a, b) = exps[j];
            (r as f64 / kf).powi(a as i32) * (s as f64 / kf).powi(b as i32)
        });
        let coef = v.try_inverse().expect("Lagrange Vandermonde matrix is invertible");
        Self { k, lattice, coef, exps }
    }

    pub fn n_nodes(&self) -> usize {
        self.lattice.len()
    }

    pub fn values(&self, x: f64, y: f64) -> Vec<f64> {
        let m: DVector<f64> = DVector::from_iterator(
            self.exps.len(),
            self.exps.iter().map(|&(a, b)| x.powi(a as i32) * y.powi(b as i32)),
        );
        (self.coef.transpose() * m).iter().copied().collect()
    }

    pub fn gradients(&self, x: f64, y: f64) -> Vec<[f64; 2]> {
        let dx = DVector::from_iterator(
            self.exps.len(),
            self.exps.iter().map(|&(a, b)| {
                if a == 0 {
                    0.0
                } else {
                    a as f64 * x.powi(a as i32 - 1) * y.powi(b as i32)
                }
            }),
        );
        let dy = DVector::from_iterator(
            self.exps.len(),
            self.exps.iter().map(|&(a, b)| {
                if b == 0 {
                    0.0
                } else {
                    b as f64 * x.powi(a as i32) * y.powi(b as i32 - 1)
                }
            }),
        );
        let gx = self.coef.transpose() * dx;
        let gy = self.coef.transpose() * dy;
        (0..self.n_nodes()).map(|i| [gx[i], gy[i]]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum NodeKey {
    Corner(usize),
    /// Base edge `(lo, hi)` and lattice index counted from `lo`.
    Edge(usize, usize, usize),
    Interior(usize, usize, usize),
}

/// Fine triangulation of one polygon with `P_k` nodes.
#[derive(Clone, Debug)]
pub struct FineMesh {
    pub level: usize,
    pub element: LagrangeTriangle,
    pub nodes: Vec<Point>,
    pub boundary: Vec<Option<BoundaryPosition>>,
    /// Global node index of every local node, per element.
    pub elements: Vec<Vec<usize>>,
    /// Affine corners of every element.
    pub corners: Vec<[Point; 3]>,
    pub polygon: Vec<Point>,
}

impl FineMesh {
    /// Refines the star fan about `center` (ear clipping when the polygon is not
    /// star-shaped with respect to it) `level` times and places `P_k` nodes.
    pub fn new(polygon: &[Point], center: Point, level: usize, k: usize) -> Result<Self> {
        let (base_pts, base_tris) = base_triangulation(polygon, center)?;
        let nv = polygon.len();
        let element = LagrangeTriangle::new(k);
        let n_sub = 1usize << level;
        let m = n_sub * k;
        let mf = m as f64;
        let mut index: HashMap<NodeKey, usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut boundary = Vec::new();
        let mut elements = Vec::with_capacity(base_tris.len() * n_sub * n_sub);
        let mut corners = Vec::with_capacity(elements.capacity());

        let is_polygon_edge = |u: usize, v: usize| -> Option<(usize, bool)> {
            if u >= nv || v >= nv {
                return None;
            }
            if (u + 1) % nv == v {
                Some((u, true))
            } else if (v + 1) % nv == u {
                Some((v, false))
            } else {
                None
            }
        };

        for (t, tri) in base_tris.iter().enumerate() {
            let [ia, ib, ic] = *tri;
            let (a, b, c) = (base_pts[ia], base_pts[ib], base_pts[ic]);
            let pos = |i: usize, j: usize| {
                let (s, u) = (i as f64 / mf, j as f64 / mf);
                a + (b - a).scale(s) + (c - a).scale(u)
            };
            // key and boundary position of lattice node (i, j)
            let key_of = |i: usize, j: usize| -> (NodeKey, Option<(usize, usize, usize)>) {
                let on_edge = |u: usize, v: usize, idx: usize| {
                    let (lo, hi, from_lo) = if u < v { (u, v, idx) } else { (v, u, m - idx) };
                    (NodeKey::Edge(lo, hi, from_lo), Some((u, v, idx)))
                };
                match (i, j) {
                    (0, 0) => (NodeKey::Corner(ia), None),
                    (i, 0) if i == m => (NodeKey::Corner(ib), None),
                    (0, j) if j == m => (NodeKey::Corner(ic), None),
                    (i, 0) => on_edge(ia, ib, i),
                    (0, j) => on_edge(ia, ic, j),
                    (i, j) if i + j == m => on_edge(ib, ic, j),
                    (i, j) => (NodeKey::Interior(t, i, j), None),
                }
            };
            let mut node_id = |i: usize, j: usize| -> usize {
                let (key, edge) = key_of(i, j);
                if let Some(&id) = index.get(&key) {
                    return id;
                }
                let id = nodes.len();
                index.insert(key, id);
                nodes.push(pos(i, j));
                let bpos = match key {
                    NodeKey::Corner(v) if v < nv => Some(BoundaryPosition { edge: v, t: 0.0 }),
                    _ => edge.and_then(|(u, v, idx)| {
                        is_polygon_edge(u, v).map(|(e, forward)| {
                            let s = idx as f64 / mf;
                            BoundaryPosition { edge: e, t: if forward { s } else { 1.0 - s } }
                        })
                    }),
                };
                boundary.push(bpos);
                id
            };
            for bj in 0..n_sub {
                for bi in 0..n_sub - bj {
                    // upward sub-triangle
                    let up: Vec<usize> = element
                        .lattice
                        .iter()
                        .map(|&(r, s)| node_id(k * bi + r, k * bj + s))
                        .collect();
                    corners.push([pos(k * bi, k * bj), pos(k * (bi + 1), k * bj), pos(k * bi, k * (bj + 1))]);
                    elements.push(up);
                    if bi + bj + 1 < n_sub {
                        let down: Vec<usize> = element
                            .lattice
                            .iter()
                            .map(|&(r, s)| node_id(k * (bi + 1) - r, k * (bj + 1) - s))
                            .collect();
                        corners.push([
                            pos(k * (bi + 1), k * (bj + 1)),
                            pos(k * bi, k * (bj + 1)),
                            pos(k * (bi + 1), k * bj),
                        ]);
                        elements.push(down);
                    }
                }
            }
        }
        Ok(Self { level, element, nodes, boundary, elements, corners, polygon: polygon.to_vec() })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node].is_some()
    }

    /// Stiffness matrix `∫ ∇ψ_i · ∇ψ_j`.
    pub fn stiffness(&self) -> CsrMatrix {
        let k = self.element.k;
        let rule = triangle_rule::<f64>(2 * k.saturating_sub(1));
        let grads: Vec<Vec<[f64; 2]>> = rule.points.iter().map(|p| self.element.gradients(p.x, p.y)).collect();
        let nl = self.element.n_nodes();
        let mut trip = Vec::with_capacity(self.elements.len() * nl * nl);
        let mut ke = vec![0.0; nl * nl];
        for (e, nodes) in self.elements.iter().enumerate() {
            let [p0, p1, p2] = self.corners[e];
            let (j00, j01, j10, j11) = (p1.x - p0.x, p2.x - p0.x, p1.y - p0.y, p2.y - p0.y);
            let det = j00 * j11 - j01 * j10;
            // inverse transpose of the Jacobian
            let (i00, i01, i10, i11) = (j11 / det, -j10 / det, -j01 / det, j00 / det);
            ke.fill(0.0);
            for (q, w) in rule.weights.iter().enumerate() {
                let ww = w * det.abs();
                let g: Vec<[f64; 2]> = grads[q]
                    .iter()
                    .map(|r| [i00 * r[0] + i01 * r[1], i10 * r[0] + i11 * r[1]])
                    .collect();
                for a in 0..nl {
                    for b in 0..=a {
                        ke[a * nl + b] += ww * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    }
                }
            }
            for a in 0..nl {
                for b in 0..=a {
                    let v = ke[a * nl + b];
                    trip.push((nodes[a], nodes[b], v));
                    if a != b {
                        trip.push((nodes[b], nodes[a], v));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.n_nodes(), self.n_nodes(), trip)
    }

    /// `∫ f ψ_i` for each function `f` of `fs` (columns), by a rule of the given order
    /// on every fine element.
    pub fn load_matrix(&self, order: usize, fs: impl Fn(Point) -> Vec<f64>, ncols: usize) -> DMatrix<f64> {
        let k = self.element.k;
        let rule = triangle_rule::<f64>(order + k);
        let vals: Vec<Vec<f64>> = rule.points.iter().map(|p| self.element.values(p.x, p.y)).collect();
        let mut out = DMatrix::zeros(self.n_nodes(), ncols);
        for (e, nodes) in self.elements.iter().enumerate() {
            let [p0, p1, p2] = self.corners[e];
            let det = orient(p0, p1, p2).abs();
            for (q, (rp, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let x = p0 + (p1 - p0).scale(rp.x) + (p2 - p0).scale(rp.y);
                let f = fs(x);
                for (a, &node) in nodes.iter().enumerate() {
                    let phi = vals[q][a] * w * det;
                    for (c, fc) in f.iter().enumerate() {
                        out[(node, c)] += phi * fc;
                    }
                }
            }
        }
        out
    }

    /// Quadrature rule on the whole polygon through the fine elements.
    pub fn rule(&self, order: usize) -> QuadratureRule<f64> {
        let tris: Vec<[Point; 3]> = self.corners.clone();
        crate::polyquad::rule_on_triangles(&tris, order)
    }

    /// Value and gradient of the finite element function `u` at a point of element `e`
    /// given by reference coordinates.
    pub fn eval_in_element(&self, u: &[f64], e: usize, xi: f64, eta: f64) -> (f64, [f64; 2]) {
        let [p0, p1, p2] = self.corners[e];
        let (j00, j01, j10, j11) = (p1.x - p0.x, p2.x - p0.x, p1.y - p0.y, p2.y - p0.y);
        let det = j00 * j11 - j01 * j10;
        let (i00, i01, i10, i11) = (j11 / det, -j10 / det, -j01 / det, j00 / det);
        let vals = self.element.values(xi, eta);
        let grads = self.element.gradients(xi, eta);
        let mut v = 0.0;
        let mut g = [0.0, 0.0];
        for (a, &node) in self.elements[e].iter().enumerate() {
            v += u[node] * vals[a];
            g[0] += u[node] * (i00 * grads[a][0] + i01 * grads[a][1]);
            g[1] += u[node] * (i10 * grads[a][0] + i11 * grads[a][1]);
        }
        (v, g)
    }

    /// Element containing `x` and the reference coordinates of `x` in it.
    pub fn locate(&self, x: Point) -> Option<(usize, f64, f64)> {
        let tol = 1e-12;
        for (e, &[p0, p1, p2]) in self.corners.iter().enumerate() {
            let det = orient(p0, p1, p2);
            let xi = orient(p0, x, p2) / det;
            let eta = orient(p0, p1, x) / det;
            if xi >= -tol && eta >= -tol && xi + eta <= 1.0 + tol {
                return Some((e, xi.clamp(0.0, 1.0), eta.clamp(0.0, 1.0)));
            }
        }
        None
    }

    /// Trace of `u` on polygon edge `edge` at parameter `t`, from the `P_k` nodes on that edge.
    pub fn trace_value(&self, u: &[f64], edge: usize, t: f64) -> f64 {
        let (a, b) = (self.polygon[edge], self.polygon[(edge + 1) % self.polygon.len()]);
        let x = a.lerp(b, t);
        match self.locate(x) {
            Some((e, xi, eta)) => self.eval_in_element(u, e, xi, eta).0,
            None => f64::NAN,
        }
    }
}

/// Base triangulation as points and index triples: the fan about `center` (a polygon
/// vertex when it coincides with one) or ear clipping.
fn base_triangulation(polygon: &[Point], center: Point) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let n = polygon.len();
    let h = geometry::diameter(polygon);
    let area_tol = 1e-12 * h * h;
    if let Some(v) = polygon.iter().position(|p| p.dist(center) <= 1e-12 * h) {
        let tris: Vec<[usize; 3]> = (1..n - 1).map(|j| [v, (v + j) % n, (v + j + 1) % n]).collect();
        if tris.iter().all(|t| orient(polygon[t[0]], polygon[t[1]], polygon[t[2]]) > area_tol) {
            return Ok((polygon.to_vec(), tris));
        }
    } else if (0..n).all(|i| orient(center, polygon[i], polygon[(i + 1) % n]) > area_tol) {
        let mut pts = polygon.to_vec();
        pts.push(center);
        let tris = (0..n).map(|i| [n, i, (i + 1) % n]).collect();
        return Ok((pts, tris));
    }
    let tris = geometry::ear_clip(polygon).ok_or_else(|| Error::SingularSystem("polygon could not be triangulated".into()))?;
    Ok((polygon.to_vec(), tris))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point> {
        vec![Point::new(0., 0.), Point::new(1., 0.), Point::new(1., 1.), Point::new(0., 1.)]
    }

    #[test]
    fn lagrange_element_is_nodal() {
        for k in 1..=5 {
            let el = LagrangeTriangle::new(k);
            assert_eq!(el.n_nodes(), (k + 1) * (k + 2) / 2);
            for (i, &(r, s)) in el.lattice.iter().enumerate() {
                let v = el.values(r as f64 / k as f64, s as f64 / k as f64);
                for (j, vj) in v.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - want).abs() < 1e-10);
                }
            }
            let g = el.gradients(0.2, 0.3);
            let sx: f64 = g.iter().map(|g| g[0]).sum();
            assert!(sx.abs() < 1e-10);
        }
    }

    #[test]
    fn node_counts_and_area() {
        for (level, k) in [(0, 1), (1, 2), (2, 3)] {
            let m = FineMesh::new(&square(), Point::new(0.5, 0.5), level, k).unwrap();
            let per_side = (1 << level) * k;
            // fan of 4 triangles: lattice nodes on the square plus the diagonals
            let expected = {
                let mm = per_side;
                let tri_nodes = (mm + 1) * (mm + 2) / 2;
                4 * tri_nodes - 4 * (mm + 1) + 1
            };
            assert_eq!(m.n_nodes(), expected);
            let area: f64 = m.corners.iter().map(|c| 0.5 * orient(c[0], c[1], c[2])).sum();
            assert!((area - 1.0).abs() < 1e-14);
            assert_eq!(m.boundary.iter().filter(|b| b.is_some()).count(), 4 * per_side);
        }
    }

    #[test]
    fn stiffness_reproduces_quadratic_energy() {
        let m = FineMesh::new(&square(), Point::new(0.5, 0.5), 2, 2).unwrap();
        let a = m.stiffness();
        assert!(a.is_symmetric(1e-13));
        let u: Vec<f64> = m.nodes.iter().map(|p| p.x * p.x - p.y).collect();
        let au = a.mul_vec(&u);
        let e: f64 = u.iter().zip(&au).map(|(a, b)| a * b).sum();
        // ∫ (2x)² + 1 over the unit square
        assert!((e - (4.0 / 3.0 + 1.0)).abs() < 1e-12);
        let ones = vec![1.0; m.n_nodes()];
        assert!(a.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn boundary_positions_are_on_edges() {
        let m = FineMesh::new(&square(), Point::new(0.3, 0.6), 2, 2).unwrap();
        for (i, b) in m.boundary.iter().enumerate() {
            if let Some(b) = b {
                let (p, q) = (m.polygon[b.edge], m.polygon[(b.edge + 1) % 4]);
                assert!(m.nodes[i].dist(p.lerp(q, b.t)) < 1e-14);
            }
        }
    }

    #[test]
    fn corner_vertex_fan_and_ear_clip() {
        let hex = vec![
            Point::new(0., 0.),
            Point::new(0., -1.),
            Point::new(1., -1.),
            Point::new(1., 1.),
            Point::new(-1., 1.),
            Point::new(-1., 0.),
        ];
        let (_, tris) = base_triangulation(&hex, Point::origin()).unwrap();
        assert_eq!(tris.len(), 4);
        let (_, tris) = base_triangulation(&hex, Point::new(-0.5, 0.5)).unwrap();
        assert_eq!(tris.len(), 4);
        let m = FineMesh::new(&hex, Point::origin(), 1, 2).unwrap();
        let area: f64 = m.corners.iter().map(|c| 0.5 * orient(c[0], c[1], c[2])).sum();
        assert!((area - 3.0).abs() < 1e-14);
    }
}
