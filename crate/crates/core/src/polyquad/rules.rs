//! Two-dimensional quadrature on triangles and polygons.

use crate::error::{Error, Result};
use crate::geometry::{orient, Point2};
use crate::mesh::triangulate_polygon;
use crate::num::Real;

use super::legendre::gauss_legendre;

/// Quadrature rule in the plane. Weights include the Jacobian of the mapped domain.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T: Real> {
    pub points: Vec<Point2<T>>,
    pub weights: Vec<T>,
    pub exactness: usize,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point2<T>) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }

    pub fn measure(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &w| a + w)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point2<T>, T)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    fn append(&mut self, other: QuadratureRule<T>) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
        self.exactness = self.exactness.min(other.exactness);
    }
}

/// Collapsed (Duffy) tensor Gauss rule on the reference triangle
/// `(0,0), (1,0), (0,1)`, exact for total degree `<= order`.
pub fn triangle_rule<T: Real>(order: usize) -> QuadratureRule<T> {
    // x = u, y = (1-u) v; the Jacobian (1-u) raises the degree in u by one
    let gu = gauss_legendre::<T>((order + 2).div_ceil(2).max(1));
    let gv = gauss_legendre::<T>((order + 1).div_ceil(2).max(1));
    let half = T::lit(0.5);
    let mut points = Vec::with_capacity(gu.len() * gv.len());
    let mut weights = Vec::with_capacity(gu.len() * gv.len());
    for (&su, &wu) in gu.nodes.iter().zip(&gu.weights) {
        let u = (su + T::one()) * half;
        for (&sv, &wv) in gv.nodes.iter().zip(&gv.weights) {
            let v = (sv + T::one()) * half;
            points.push(Point2::new(u, (T::one() - u) * v));
            weights.push(wu * wv * half * half * (T::one() - u));
        }
    }
    QuadratureRule { points, weights, exactness: order }
}

/// Maps a reference-triangle rule onto the triangle `abc`.
pub fn map_triangle<T: Real>(reference: &QuadratureRule<T>, tri: [Point2<T>; 3]) -> QuadratureRule<T> {
    let [a, b, c] = tri;
    let jac = orient(a, b, c).abs();
    let points = reference
        .points
        .iter()
        .map(|p| a + (b - a).scale(p.x) + (c - a).scale(p.y))
        .collect();
    let weights = reference.weights.iter().map(|&w| w * jac).collect();
    QuadratureRule { points, weights, exactness: reference.exactness }
}

/// Rule on a union of triangles.
pub fn rule_on_triangles<T: Real>(tris: &[[Point2<T>; 3]], order: usize) -> QuadratureRule<T> {
    let reference = triangle_rule::<T>(order);
    let mut out = QuadratureRule { points: Vec::new(), weights: Vec::new(), exactness: order };
    for &t in tris {
        out.append(map_triangle(&reference, t));
    }
    out
}

/// Rule on a polygon via its sub-triangulation (star fan about `center` when it
/// lies in the kernel, ear clipping otherwise).
pub fn polygon_rule<T: Real>(
    poly: &[Point2<T>],
    center: Point2<T>,
    order: usize,
) -> Result<QuadratureRule<T>> {
    let tris = triangulate_polygon(poly, center)?;
    Ok(rule_on_triangles(&tris, order))
}

/// Rule on a polygon whose fan triangles are additionally refined `levels` times
/// geometrically toward `focus` (a vertex of the polygon), for integrands that are
/// singular there.
pub fn polygon_rule_graded<T: Real>(
    poly: &[Point2<T>],
    focus: Point2<T>,
    order: usize,
    levels: usize,
) -> Result<QuadratureRule<T>> {
    let n = poly.len();
    let h = crate::geometry::diameter(poly);
    let tol = T::lit(1e-12) * h;
    let Some(k) = (0..n).find(|&i| poly[i].dist(focus) <= tol) else {
        return Err(Error::InvalidParameter(
            "graded polygon rule needs the focus to be a polygon vertex".into(),
        ));
    };
    let reference = triangle_rule::<T>(order);
    let mut out = QuadratureRule { points: Vec::new(), weights: Vec::new(), exactness: order };
    // fan from the focus vertex; requires star-shapedness with respect to it
    for j in 1..n - 1 {
        let a = poly[(k + j) % n];
        let b = poly[(k + j + 1) % n];
        if orient(focus, a, b) <= T::lit(1e-14) * h * h {
            return Err(Error::NotStarShaped);
        }
        let mut outer = [focus, a, b];
        for _ in 0..levels {
            let [o, a, b] = outer;
            let am = o.midpoint(a);
            let bm = o.midpoint(b);
            out.append(map_triangle(&reference, [am, a, b]));
            out.append(map_triangle(&reference, [am, b, bm]));
            outer = [o, am, bm];
        }
        out.append(map_triangle(&reference, outer));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Point2<f64>;

    fn beta_integral(a: u32, b: u32) -> f64 {
        // ∫_T x^a y^b = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn reference_triangle_moments() {
        let r = triangle_rule::<f64>(5);
        assert!((r.measure() - 0.5).abs() < 1e-15);
        assert!((r.integrate(|p| p.x) - 1.0 / 6.0).abs() < 1e-15);
        assert!((r.integrate(|p| p.x * p.x * p.y.powi(3)) - beta_integral(2, 3)).abs() < 1e-15);
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn triangle_rule_exact_to_order() {
        for order in [0usize, 1, 2, 7, 12, 20, 40] {
            let r = triangle_rule::<f64>(order);
            for a in 0..=order as u32 {
                let b = order as u32 - a;
                let got = r.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                let want = beta_integral(a, b);
                assert!((got - want).abs() <= 1e-13 * want.max(1e-300) + 1e-300, "order {order} a {a}");
            }
        }
    }

    #[test]
    fn unit_square_second_moment() {
        let sq = [P::new(0., 0.), P::new(1., 0.), P::new(1., 1.), P::new(0., 1.)];
        let r = polygon_rule(&sq, P::new(0.5, 0.5), 2).unwrap();
        assert!((r.integrate(|p| p.x * p.x + p.y * p.y) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn graded_rule_handles_corner_singularity() {
        let sq = [P::new(0., 0.), P::new(1., 0.), P::new(1., 1.), P::new(0., 1.)];
        let plain = polygon_rule_graded(&sq, P::origin(), 6, 0).unwrap();
        assert!((plain.measure() - 1.0).abs() < 1e-14);
        let graded = polygon_rule_graded(&sq, P::origin(), 6, 12).unwrap();
        assert!((graded.measure() - 1.0).abs() < 1e-14);
        // ∫ r^{-2/3} over the unit square, reference by a very finely graded rule
        let f = |p: P| p.norm().powf(-2.0 / 3.0);
        let reference = polygon_rule_graded(&sq, P::origin(), 20, 60).unwrap().integrate(f);
        let e_plain = (plain.integrate(f) - reference).abs();
        let e_graded = (graded.integrate(f) - reference).abs();
        assert!(e_graded < 1e-3 * e_plain);
    }
}
