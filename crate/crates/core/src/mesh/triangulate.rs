use crate::error::{Error, Result};
use crate::geometry::{self, orient, point_segment_distance, Point2};
use crate::num::Real;

use super::PolygonCell;

/// Fan triangulation `(star_center, v_i, v_{i+1})` of a cell. Edges that contain the
/// center (for corner cells the center is a vertex) produce no triangle.
pub fn subtriangulate<T: Real>(cell: &PolygonCell<T>, vertices: &[Point2<T>]) -> Result<Vec<[Point2<T>; 3]>> {
    let poly: Vec<_> = cell.vertex_ids.iter().map(|&v| vertices[v]).collect();
    fan(&poly, cell.star_center)
}

/// Triangulation of a polygon for quadrature: the fan about `center` when the polygon
/// is star-shaped with respect to it, ear clipping otherwise.
pub fn triangulate_polygon<T: Real>(poly: &[Point2<T>], center: Point2<T>) -> Result<Vec<[Point2<T>; 3]>> {
    match fan(poly, center) {
        Ok(t) => Ok(t),
        Err(Error::NotStarShaped) => {
            let tris = geometry::ear_clip(poly).ok_or_else(|| {
                Error::InvalidParameter("polygon could not be triangulated".into())
            })?;
            Ok(tris.into_iter().map(|[a, b, c]| [poly[a], poly[b], poly[c]]).collect())
        }
        Err(e) => Err(e),
    }
}

fn fan<T: Real>(poly: &[Point2<T>], center: Point2<T>) -> Result<Vec<[Point2<T>; 3]>> {
    let n = poly.len();
    let h = geometry::diameter(poly);
    let area_tol = T::lit(1e-12) * h * h;
    let mut tris = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let o = orient(center, a, b);
        if o > area_tol {
            tris.push([center, a, b]);
        } else if point_segment_distance(center, a, b) <= T::lit(1e-12) * h {
            continue;
        } else {
            return Err(Error::NotStarShaped);
        }
    }
    if tris.is_empty() {
        return Err(Error::NotStarShaped);
    }
    Ok(tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Point2<f64>;

    fn cell(n: usize, center: P) -> PolygonCell<f64> {
        PolygonCell { vertex_ids: (0..n).collect(), layer: 0, diameter: 1.0, star_center: center }
    }

    #[test]
    fn square_about_centroid_gives_four_congruent_triangles() {
        let sq = [P::new(0., 0.), P::new(1., 0.), P::new(1., 1.), P::new(0., 1.)];
        let t = subtriangulate(&cell(4, P::new(0.5, 0.5)), &sq).unwrap();
        assert_eq!(t.len(), 4);
        for tri in &t {
            assert!((orient(tri[0], tri[1], tri[2]) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn corner_hexagon_about_origin() {
        let c = 0.125;
        let hex = [P::new(0., 0.), P::new(0., -c), P::new(c, -c), P::new(c, c), P::new(-c, c), P::new(-c, 0.)];
        let t = subtriangulate(&cell(6, P::origin()), &hex).unwrap();
        // the two edges at the origin are skipped
        assert_eq!(t.len(), 4);
        let area: f64 = t.iter().map(|t| 0.5 * orient(t[0], t[1], t[2])).sum();
        assert!((area - geometry::signed_area(&hex)).abs() < 1e-12 * area);
    }

    #[test]
    fn bad_center_is_rejected() {
        // L-shaped hexagon; the center (-0.5, 0.5) cannot see the vertex (1, -1)
        let hex = [P::new(0., 0.), P::new(0., -1.), P::new(1., -1.), P::new(1., 1.), P::new(-1., 1.), P::new(-1., 0.)];
        let err = subtriangulate(&cell(6, P::new(-0.5, 0.5)), &hex).unwrap_err();
        assert!(matches!(err, Error::NotStarShaped));
        // quadrature triangulation still succeeds
        let tris = triangulate_polygon(&hex, P::new(-0.5, 0.5)).unwrap();
        let area: f64 = tris.iter().map(|t| 0.5 * orient(t[0], t[1], t[2])).sum();
        assert!((area - 3.0).abs() < 1e-14);
    }
}
