use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{orient, Point2};
use crate::num::Real;

use super::{MeshFamily, PolygonalMesh};

pub const MAX_LEVEL: usize = 30;
pub const SIGMA_RANGE: (f64, f64) = (0.05, 0.95);

/// Quadrants of the L-shaped domain as coordinate signs, in construction order.
const QUADRANTS: [(i8, i8); 3] = [(1, 1), (1, -1), (-1, 1)];

/// Builds the level-`n` member of a geometric mesh family with grading ratio `sigma`.
pub fn build_graded_mesh<T: Real>(family: MeshFamily, n: usize, sigma: T) -> Result<PolygonalMesh<T>> {
    if n > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!("n = {n} exceeds the maximum level {MAX_LEVEL}")));
    }
    let s = sigma.to_f64_lossy();
    if !(s > SIGMA_RANGE.0 && s < SIGMA_RANGE.1) {
        return Err(Error::InvalidParameter(format!(
            "sigma = {s} outside ({}, {})",
            SIGMA_RANGE.0, SIGMA_RANGE.1
        )));
    }
    let pw = powers(sigma, n);
    let mut pool = VertexPool::default();
    let loops = match family {
        MeshFamily::GradedSquares => graded_squares(&mut pool, &pw, n),
        MeshFamily::LayerDecagons => layer_decagons(&mut pool, &pw, n, false),
        MeshFamily::DecagonsCut => layer_decagons(&mut pool, &pw, n, true),
        MeshFamily::TensorQuadsFem => tensor_quads(&mut pool, &pw, n),
    };
    PolygonalMesh::from_parts(pool.points, loops, family, sigma, n)
}

/// `σ^0, σ^1, ..., σ^n`, each by direct exponentiation so no error accumulates along the table.
fn powers<T: Real>(sigma: T, n: usize) -> Vec<T> {
    (0..=n).map(|k| sigma.powi(k as i32)).collect()
}

/// Vertex deduplication keyed on exact coordinates. All coordinates are signed
/// entries of the power table, so shared vertices are bitwise identical.
#[derive(Default)]
struct VertexPool<T: Real> {
    points: Vec<Point2<T>>,
    index: HashMap<(u64, u64), usize>,
}

impl<T: Real> VertexPool<T> {
    fn id(&mut self, x: T, y: T) -> usize {
        // -0 and +0 must coincide
        let key = |v: T| (v.to_f64_lossy() + 0.0).to_bits();
        let k = (key(x), key(y));
        if let Some(&i) = self.index.get(&k) {
            return i;
        }
        self.points.push(Point2::new(x + T::zero(), y + T::zero()));
        self.index.insert(k, self.points.len() - 1);
        self.points.len() - 1
    }

    /// Loop through the points `(sx·x, sy·y)`; reflected loops are reversed to stay counterclockwise.
    fn reflected_loop(&mut self, pts: &[(T, T)], (sx, sy): (i8, i8)) -> Vec<usize> {
        let sgn = |s: i8, v: T| if s < 0 { -v } else { v };
        let mut pts = pts.to_vec();
        if sx * sy < 0 {
            pts[1..].reverse();
        }
        pts.iter().map(|&(x, y)| self.id(sgn(sx, x), sgn(sy, y))).collect()
    }
}

fn rect<T: Real>(x0: T, x1: T, y0: T, y1: T) -> [(T, T); 4] {
    [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
}

fn graded_squares<T: Real>(pool: &mut VertexPool<T>, pw: &[T], n: usize) -> Vec<(Vec<usize>, usize)> {
    let z = T::zero();
    let mut loops = Vec::with_capacity(9 * n + 3);
    for q in QUADRANTS {
        for k in 0..n {
            let (s, t) = (pw[k], pw[k + 1]);
            for r in [rect(t, s, z, t), rect(t, s, t, s), rect(z, t, t, s)] {
                loops.push((pool.reflected_loop(&r, q), n - k));
            }
        }
        loops.push((pool.reflected_loop(&rect(z, pw[n], z, pw[n]), q), 0));
    }
    insert_hanging_nodes(&pool.points, &mut loops);
    loops
}

/// Adds every vertex lying in the relative interior of a cell edge to that cell's loop.
fn insert_hanging_nodes<T: Real>(points: &[Point2<T>], loops: &mut [(Vec<usize>, usize)]) {
    for (ids, _) in loops.iter_mut() {
        let m = ids.len();
        let mut out = Vec::with_capacity(m + 2);
        for i in 0..m {
            let (a, b) = (points[ids[i]], points[ids[(i + 1) % m]]);
            let d = b - a;
            let len2 = d.dot(d);
            let mut inner: Vec<(T, usize)> = points
                .iter()
                .enumerate()
                .filter_map(|(v, &p)| {
                    let t = (p - a).dot(d) / len2;
                    let on_line = orient(a, b, p).abs() <= T::lit(1e-12) * len2;
                    let inside = t > T::lit(1e-12) && t < T::one() - T::lit(1e-12);
                    (on_line && inside).then_some((t, v))
                })
                .collect();
            inner.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            out.push(ids[i]);
            out.extend(inner.into_iter().map(|(_, v)| v));
        }
        *ids = out;
    }
}

fn layer_decagons<T: Real>(pool: &mut VertexPool<T>, pw: &[T], n: usize, cut: bool) -> Vec<(Vec<usize>, usize)> {
    let z = T::zero();
    let mut loops = Vec::new();
    let mut add = |pool: &mut VertexPool<T>, pts: &[(T, T)], layer: usize| {
        let ids = pts.iter().map(|&(x, y)| pool.id(x, y)).collect();
        loops.push((ids, layer));
    };
    for k in 0..n {
        let (b, s) = (pw[k], pw[k + 1]);
        if cut {
            add(pool, &[(z, -b), (b, -b), (b, b), (s, s), (s, -s), (z, -s)], n - k);
            add(pool, &[(b, b), (-b, b), (-b, z), (-s, z), (-s, s), (s, s)], n - k);
        } else {
            add(
                pool,
                &[(z, -b), (b, -b), (b, b), (-b, b), (-b, z), (-s, z), (-s, s), (s, s), (s, -s), (z, -s)],
                n - k,
            );
        }
    }
    let c = pw[n];
    if cut {
        add(pool, &[(z, z), (z, -c), (c, -c), (c, c)], 0);
        add(pool, &[(z, z), (c, c), (-c, c), (-c, z)], 0);
    } else {
        add(pool, &[(z, z), (z, -c), (c, -c), (c, c), (-c, c), (-c, z)], 0);
    }
    loops
}

fn tensor_quads<T: Real>(pool: &mut VertexPool<T>, pw: &[T], n: usize) -> Vec<(Vec<usize>, usize)> {
    // grid 0 < σ^n < ... < σ < 1, interval i = [g_i, g_{i+1}]
    let mut g = vec![T::zero()];
    g.extend(pw.iter().rev().copied());
    let mut loops = Vec::with_capacity(3 * (n + 1) * (n + 1));
    for q in QUADRANTS {
        for j in 0..=n {
            for i in 0..=n {
                let r = rect(g[i], g[i + 1], g[j], g[j + 1]);
                loops.push((pool.reflected_loop(&r, q), i.max(j)));
            }
        }
    }
    loops
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(build_graded_mesh(MeshFamily::GradedSquares, 31, 0.5).is_err());
        assert!(build_graded_mesh(MeshFamily::GradedSquares, 2, 0.05).is_err());
        assert!(build_graded_mesh(MeshFamily::GradedSquares, 2, 0.95).is_err());
        assert!(build_graded_mesh(MeshFamily::GradedSquares, 2, f64::NAN).is_err());
        assert!(build_graded_mesh(MeshFamily::LayerDecagons, 30, 0.9).is_ok());
    }

    #[test]
    fn signed_zero_is_one_vertex() {
        let mut pool = VertexPool::<f64>::default();
        assert_eq!(pool.id(0.0, 1.0), pool.id(-0.0, 1.0));
        assert_eq!(pool.points.len(), 1);
    }

    #[test]
    fn tiny_cells_are_not_merged() {
        let m = build_graded_mesh(MeshFamily::GradedSquares, 30, 0.1f64).unwrap();
        assert_eq!(m.n_cells(), 9 * 30 + 3);
        let a = m.total_area();
        assert!((a - 3.0).abs() < 1e-12 * 3.0);
    }
}
