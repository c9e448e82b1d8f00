//! Planar points and polygon primitives.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::num::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Point2<T: Real> {
    pub x: T,
    pub y: T,
}

impl<T: Real> From<[T; 2]> for Point2<T> {
    fn from(a: [T; 2]) -> Self {
        Self { x: a[0], y: a[1] }
    }
}

impl<T: Real> From<Point2<T>> for [T; 2] {
    fn from(p: Point2<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Real> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    #[inline]
    pub fn lerp(self, o: Self, t: T) -> Self {
        self + (o - self).scale(t)
    }

    #[inline]
    pub fn midpoint(self, o: Self) -> Self {
        self.lerp(o, T::lit(0.5))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Real>(self) -> Point2<U> {
        Point2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// Twice the signed area of triangle `abc` (positive when counterclockwise).
#[inline]
pub fn orient<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    (b - a).cross(c - a)
}

pub fn signed_area<T: Real>(poly: &[Point2<T>]) -> T {
    let n = poly.len();
    let mut acc = T::zero();
    for i in 0..n {
        acc = acc + poly[i].cross(poly[(i + 1) % n]);
    }
    acc * T::lit(0.5)
}

pub fn centroid<T: Real>(poly: &[Point2<T>]) -> Point2<T> {
    let n = poly.len();
    let a = signed_area(poly);
    let (mut cx, mut cy) = (T::zero(), T::zero());
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let w = p.cross(q);
        cx = cx + (p.x + q.x) * w;
        cy = cy + (p.y + q.y) * w;
    }
    let s = T::lit(6.0) * a;
    Point2::new(cx / s, cy / s)
}

/// Maximum pairwise vertex distance.
pub fn diameter<T: Real>(poly: &[Point2<T>]) -> T {
    let mut h = T::zero();
    for (i, p) in poly.iter().enumerate() {
        for q in &poly[i + 1..] {
            h = h.max(p.dist(*q));
        }
    }
    h
}

pub fn perimeter<T: Real>(poly: &[Point2<T>]) -> T {
    let n = poly.len();
    (0..n).fold(T::zero(), |acc, i| acc + poly[i].dist(poly[(i + 1) % n]))
}

/// Convex in the weak sense: collinear vertices are allowed.
pub fn is_convex<T: Real>(poly: &[Point2<T>]) -> bool {
    let n = poly.len();
    let scale = diameter(poly);
    let tol = T::lit(1e-12) * scale * scale;
    (0..n).all(|i| orient(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) >= -tol)
}

pub fn point_segment_distance<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == T::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).max(T::zero()).min(T::one());
    p.dist(a + d.scale(t))
}

/// Distance from `p` to the closed polygon region (zero inside).
pub fn point_polygon_distance<T: Real>(p: Point2<T>, poly: &[Point2<T>]) -> T {
    if contains(poly, p) {
        return T::zero();
    }
    let n = poly.len();
    (0..n).fold(T::infinity(), |m, i| {
        m.min(point_segment_distance(p, poly[i], poly[(i + 1) % n]))
    })
}

/// Winding-number point inclusion (boundary points count as inside).
pub fn contains<T: Real>(poly: &[Point2<T>], p: Point2<T>) -> bool {
    let n = poly.len();
    let tol = T::lit(1e-12) * diameter(poly);
    for i in 0..n {
        if point_segment_distance(p, poly[i], poly[(i + 1) % n]) <= tol {
            return true;
        }
    }
    let mut winding = 0i32;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a.y <= p.y {
            if b.y > p.y && orient(a, b, p) > T::zero() {
                winding += 1;
            }
        } else if b.y <= p.y && orient(a, b, p) < T::zero() {
            winding -= 1;
        }
    }
    winding != 0
}

/// True when no two non-adjacent edges intersect.
pub fn is_simple<T: Real>(poly: &[Point2<T>]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > T::zero() && d2 < T::zero()) || (d1 < T::zero() && d2 > T::zero()))
        && ((d3 > T::zero() && d4 < T::zero()) || (d3 < T::zero() && d4 > T::zero()))
    {
        return true;
    }
    let on = |p: Point2<T>, q: Point2<T>, r: Point2<T>, o: T| {
        o == T::zero()
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

/// Largest disc contained in the kernel of a counterclockwise polygon.
///
/// The kernel is the intersection of the inner half-planes of all edges, so the
/// radius at a candidate center is its smallest signed distance to the edge lines.
/// Maximizing it is a three-variable linear program whose optimum sits where three
/// constraints are active; all triples are enumerated. Returns `None` when the
/// kernel has empty interior.
pub fn kernel_chebyshev_center<T: Real>(poly: &[Point2<T>]) -> Option<(Point2<T>, T)> {
    let lines = inward_lines(poly);
    let m = lines.len();
    let h = diameter(poly);
    let feas_tol = T::lit(1e-12) * h;
    let mut best: Option<(Point2<T>, T)> = None;
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let Some((c, rho)) = solve_three(&lines[i], &lines[j], &lines[k]) else {
                    continue;
                };
                if !c.is_finite() || rho <= T::zero() {
                    continue;
                }
                let ok = lines
                    .iter()
                    .all(|(nrm, off)| nrm.dot(c) - *off >= rho - feas_tol);
                if ok && best.is_none_or(|(_, r)| rho > r) {
                    best = Some((c, rho));
                }
            }
        }
    }
    best.filter(|(_, r)| *r > T::lit(1e-10) * h)
}

/// Radius of the largest kernel-contained disc centered at `c` (negative when `c`
/// is outside the kernel).
pub fn kernel_radius_at<T: Real>(poly: &[Point2<T>], c: Point2<T>) -> T {
    inward_lines(poly)
        .iter()
        .fold(T::infinity(), |m, (nrm, off)| m.min(nrm.dot(c) - *off))
}

fn inward_lines<T: Real>(poly: &[Point2<T>]) -> Vec<(Point2<T>, T)> {
    let n = poly.len();
    (0..n)
        .filter_map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let d = b - a;
            let len = d.norm();
            if len == T::zero() {
                return None;
            }
            let nrm = Point2::new(-d.y / len, d.x / len);
            Some((nrm, nrm.dot(a)))
        })
        .collect()
}

fn solve_three<T: Real>(
    l1: &(Point2<T>, T),
    l2: &(Point2<T>, T),
    l3: &(Point2<T>, T),
) -> Option<(Point2<T>, T)> {
    // n_i . c - rho = off_i
    let m = [
        [l1.0.x, l1.0.y, -T::one()],
        [l2.0.x, l2.0.y, -T::one()],
        [l3.0.x, l3.0.y, -T::one()],
    ];
    let rhs = [l1.1, l2.1, l3.1];
    let det = det3(&m);
    if det.abs() < T::lit(1e-12) {
        return None;
    }
    let mut sol = [T::zero(); 3];
    for (col, s) in sol.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][col] = rhs[r];
        }
        *s = det3(&mc) / det;
    }
    Some((Point2::new(sol[0], sol[1]), sol[2]))
}

fn det3<T: Real>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Ear-clipping triangulation of a simple counterclockwise polygon. At every step the
/// ear with the largest minimum angle is removed, which keeps the triangles of the
/// ring-shaped cells reasonably shaped. Returns triangles as vertex index triples.
pub fn ear_clip<T: Real>(poly: &[Point2<T>]) -> Option<Vec<[usize; 3]>> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::with_capacity(poly.len().saturating_sub(2));
    let h = diameter(poly);
    let area_tol = T::lit(1e-14) * h * h;
    while idx.len() > 3 {
        let m = idx.len();
        let mut best: Option<(usize, T)> = None;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if orient(a, b, c) <= area_tol {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = poly[j];
                orient(a, b, p) >= T::zero() && orient(b, c, p) >= T::zero() && orient(c, a, p) >= T::zero()
            });
            if blocked {
                continue;
            }
            let q = min_angle(a, b, c);
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((k, q));
            }
        }
        let (k, _) = best?;
        let m = idx.len();
        tris.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
        idx.remove(k);
    }
    if orient(poly[idx[0]], poly[idx[1]], poly[idx[2]]) > area_tol {
        tris.push([idx[0], idx[1], idx[2]]);
    }
    Some(tris)
}

/// Smallest interior angle of a triangle, in radians.
pub fn min_angle<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    let ang = |p: Point2<T>, q: Point2<T>, r: Point2<T>| {
        let u = q - p;
        let v = r - p;
        u.cross(v).abs().atan2(u.dot(v))
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}
