use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::generalized_eigenvalues;
use crate::oracle::FineSpace;
use crate::polyquad::{gauss_legendre, gauss_lobatto_1d, legendre_table, triangle_rule};
use crate::vem_local::CellGeometry;

use super::{power_fit, Point};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InverseLabRecord {
    pub test: String,
    pub p: usize,
    /// Extremal (or worst sampled) constant at this degree.
    pub constant: f64,
    /// Growth exponent fitted over the whole sweep.
    pub fitted_exponent: f64,
    /// Whether the sampled inequality held at this degree (always true for eigenvalue tests).
    pub holds: bool,
}

fn records(test: &str, rows: Vec<(usize, f64, bool)>, shift: f64) -> Vec<InverseLabRecord> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().map(|&(p, c, _)| (p as f64 + shift, c)).unzip();
    let exponent = power_fit(&xs, &ys).map_or(f64::NAN, |f| f.slope);
    rows.into_iter()
        .map(|(p, constant, holds)| InverseLabRecord { test: test.into(), p, constant, fitted_exponent: exponent, holds })
        .collect()
}

fn largest_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(*generalized_eigenvalues(a, b, None)?.last().expect("nonempty"))
}

/// `sup_{q ∈ P_p} ∫(1−x²)^α q² / ∫(1−x²)^β q²` on `(−1, 1)`; exponent against `p + 1`.
pub fn inverse_lab_weighted(alpha: f64, beta: f64, degrees: &[usize]) -> Result<Vec<InverseLabRecord>> {
    if !(alpha >= 0.0 && beta >= alpha && beta <= 3.0) {
        return Err(Error::InvalidParameter(format!("need 0 ≤ α ≤ β ≤ 3, got α = {alpha}, β = {beta}")));
    }
    check_max(degrees, 30)?;
    let integer = alpha.fract() == 0.0 && beta.fract() == 0.0;
    let rows = degrees
        .iter()
        .map(|&p| {
            // exact for integer exponents; a dense rule otherwise
            let n = if integer { p + beta as usize + 1 } else { p + 200 };
            let g = gauss_legendre::<f64>(n);
            let mut a = DMatrix::zeros(p + 1, p + 1);
            let mut b = DMatrix::zeros(p + 1, p + 1);
            for (&x, &w) in g.nodes.iter().zip(&g.weights) {
                let l = legendre_table(p, x);
                let (wa, wb) = (w * (1.0 - x * x).powf(alpha), w * (1.0 - x * x).powf(beta));
                for i in 0..=p {
                    for j in 0..=p {
                        a[(i, j)] += wa * l[i].0 * l[j].0;
                        b[(i, j)] += wb * l[i].0 * l[j].0;
                    }
                }
            }
            Ok((p, largest_eigenvalue(&a, &b)?, true))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records("weighted", rows, 1.0))
}

/// Worst sampled lower constant `c` in `c·Σ q²(ξ)ρ ≤ ‖q‖²₀ ≤ Σ q²(ξ)ρ` for the
/// `(p+1)`-point Gauss–Lobatto rule; `L_p` is always among the samples.
pub fn inverse_lab_gll(degrees: &[usize], samples: usize, seed: u64) -> Result<Vec<InverseLabRecord>> {
    check_max(degrees, 40)?;
    if degrees.contains(&0) {
        return Err(Error::InvalidParameter("Gauss–Lobatto test needs p ≥ 1".into()));
    }
    let rows = degrees
        .iter()
        .map(|&p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(p as u64));
            let gll = gauss_lobatto_1d::<f64>(p);
            let tables: Vec<_> = gll.nodes.iter().map(|&x| legendre_table(p, x)).collect();
            let mut worst = f64::INFINITY;
            let mut holds = true;
            for s in 0..=samples {
                let c: Vec<f64> = match s {
                    0 => (0..=p).map(|k| if k == p { 1.0 } else { 0.0 }).collect(),
                    _ => (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect(),
                };
                let exact: f64 = c.iter().enumerate().map(|(k, ck)| ck * ck * 2.0 / (2 * k + 1) as f64).sum();
                let discrete: f64 = tables
                    .iter()
                    .zip(&gll.weights)
                    .map(|(t, w)| w * c.iter().zip(t).map(|(ck, l)| ck * l.0).sum::<f64>().powi(2))
                    .sum();
                holds &= exact <= discrete * (1.0 + 1e-12);
                worst = worst.min(exact / discrete);
            }
            Ok((p, worst, holds))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records("gll", rows, 1.0))
}

/// Values and `(∂ξ, ∂η)` derivatives of `L_i(ξ) L_j(η)`, `i + j ≤ p`: a well-conditioned
/// basis of `P_p` on any subset of `[−1, 1]²`.
fn legendre_2d(p: usize, xi: f64, eta: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
    let (tx, ty) = (legendre_table(p, xi), legendre_table(p, eta));
    let mut vals = Vec::new();
    let mut grads = Vec::new();
    for j in 0..=p {
        for i in 0..=p - j {
            vals.push(tx[i].0 * ty[j].0);
            grads.push([tx[i].1 * ty[j].0, tx[i].0 * ty[j].1]);
        }
    }
    (vals, grads)
}

/// Values and derivatives of the Jacobi polynomials `P_k^{(α,0)}`, `k = 0..=n`.
fn jacobi_table(n: usize, alpha: f64, x: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(1.0, 0.0)];
    if n >= 1 {
        out.push((alpha + 1.0 + (alpha + 2.0) * (x - 1.0) / 2.0, (alpha + 2.0) / 2.0));
    }
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + alpha;
        let a0 = 2.0 * k * (k + alpha) * (c - 2.0);
        let a1 = (c - 1.0) * c * (c - 2.0);
        let a2 = (c - 1.0) * alpha * alpha;
        let a3 = 2.0 * (k + alpha - 1.0) * (k - 1.0) * c;
        let (p1, d1) = out[out.len() - 1];
        let (p2, d2) = out[out.len() - 2];
        out.push((((a1 * x + a2) * p1 - a3 * p2) / a0, ((a1 * x + a2) * d1 + a1 * p1 - a3 * d2) / a0));
    }
    out
}

/// Orthogonal (Dubiner) basis of `P_p` on the triangle `(−1,−1), (1,−1), (−1,1)`:
/// values and `(∂r, ∂s)` derivatives at an interior point.
fn dubiner(p: usize, r: f64, s: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
    // collapsed coordinates a = 2(1+r)/(1−s) − 1, b = s
    let t = 1.0 - s;
    let a = 2.0 * (1.0 + r) / t - 1.0;
    let la = legendre_table(p, a);
    let mut vals = Vec::new();
    let mut grads = Vec::new();
    for i in 0..=p {
        let jb = jacobi_table(p - i, (2 * i + 1) as f64, s);
        let w = (t / 2.0).powi(i as i32);
        let dw = if i == 0 { 0.0 } else { -(i as f64) / 2.0 * (t / 2.0).powi(i as i32 - 1) };
        for (pj, dj) in jb {
            let (pa, da) = la[i];
            vals.push(pa * w * pj);
            let dr = da * 2.0 / t * w * pj;
            let ds = da * (1.0 + a) / t * w * pj + pa * (dw * pj + w * dj);
            grads.push([dr, ds]);
        }
    }
    (vals, grads)
}

/// `sup_{q ∈ P_p} |q|₁ / ‖q‖₀` on the reference triangle; exponent against `p`.
pub fn inverse_lab_triangle(degrees: &[usize]) -> Result<Vec<InverseLabRecord>> {
    check_max(degrees, 30)?;
    let rows = degrees
        .iter()
        .map(|&p| {
            let rule = triangle_rule::<f64>(2 * p);
            let n = (p + 1) * (p + 2) / 2;
            let mut k = DMatrix::zeros(n, n);
            let mut m = DMatrix::zeros(n, n);
            for (x, w) in rule.iter() {
                // reference triangle (0,0), (1,0), (0,1) inside [0,1]², so ∂/∂x = 2 ∂/∂ξ
                let (v, g) = dubiner(p, 2.0 * x.x - 1.0, 2.0 * x.y - 1.0);
                for a in 0..n {
                    for b in 0..n {
                        m[(a, b)] += w * v[a] * v[b];
                        k[(a, b)] += 4.0 * w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    }
                }
            }
            Ok((p, largest_eigenvalue(&k, &m)?.max(0.0).sqrt(), true))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records("triangle", rows, 0.0))
}

/// `sup_{q ∈ P_p} ‖q‖₀ / ‖q‖₋₁` on a polygon, with the negative norm from the fine space;
/// exponent against `p + 1`.
pub fn inverse_lab_hminus1(polygon: &[Point], degrees: &[usize], level: usize, fem_degree: usize) -> Result<Vec<InverseLabRecord>> {
    check_max(degrees, 30)?;
    let geom = CellGeometry::from_polygon(polygon.to_vec())?;
    let space = FineSpace::new(&geom.points, geom.star_center, level, fem_degree)?;
    let (lo, hi) = bounding_box(polygon);
    let to_ref = move |x: Point| {
        (2.0 * (x.x - lo.x) / (hi.x - lo.x) - 1.0, 2.0 * (x.y - lo.y) / (hi.y - lo.y) - 1.0)
    };
    let rows = degrees
        .iter()
        .map(|&p| {
            let basis = |x: Point| {
                let (s, t) = to_ref(x);
                legendre_2d(p, s, t).0
            };
            let n = (p + 1) * (p + 2) / 2;
            let q = space.hminus1_gram(basis, n, p);
            let m = polygon_mass(&geom, p, &basis, n)?;
            Ok((p, largest_eigenvalue(&m, &q)?.max(0.0).sqrt(), true))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records("hminus1", rows, 1.0))
}

fn polygon_mass(geom: &CellGeometry, p: usize, basis: &impl Fn(Point) -> Vec<f64>, n: usize) -> Result<DMatrix<f64>> {
    let rule = crate::polyquad::polygon_rule(&geom.points, geom.star_center, 2 * p)?;
    let mut m = DMatrix::zeros(n, n);
    for (x, w) in rule.iter() {
        let v = basis(x);
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] += w * v[a] * v[b];
            }
        }
    }
    Ok(m)
}

fn bounding_box(poly: &[Point]) -> (Point, Point) {
    let fold = |f: fn(f64, f64) -> f64, init: f64| {
        poly.iter().fold(Point::new(init, init), |acc, p| Point::new(f(acc.x, p.x), f(acc.y, p.y)))
    };
    (fold(f64::min, f64::INFINITY), fold(f64::max, f64::NEG_INFINITY))
}

/// `sup_{q ∈ P_p} |q b|₁ / ‖q b^{1/2}‖₀` with the cubic bubble `b` of the reference
/// triangle; exponent against `p + 1`.
pub fn inverse_lab_bubble(degrees: &[usize]) -> Result<Vec<InverseLabRecord>> {
    check_max(degrees, 30)?;
    let rows = degrees
        .iter()
        .map(|&p| {
            let rule = triangle_rule::<f64>(2 * p + 6);
            let n = (p + 1) * (p + 2) / 2;
            let mut a = DMatrix::zeros(n, n);
            let mut m = DMatrix::zeros(n, n);
            for (x, w) in rule.iter() {
                let b = 27.0 * x.x * x.y * (1.0 - x.x - x.y);
                let db = [27.0 * x.y * (1.0 - 2.0 * x.x - x.y), 27.0 * x.x * (1.0 - x.x - 2.0 * x.y)];
                let (v, g) = dubiner(p, 2.0 * x.x - 1.0, 2.0 * x.y - 1.0);
                // ∇(q b) = b ∇q + q ∇b
                let gq: Vec<[f64; 2]> =
                    (0..n).map(|i| [2.0 * g[i][0] * b + v[i] * db[0], 2.0 * g[i][1] * b + v[i] * db[1]]).collect();
                for i in 0..n {
                    for j in 0..n {
                        a[(i, j)] += w * (gq[i][0] * gq[j][0] + gq[i][1] * gq[j][1]);
                        m[(i, j)] += w * b * v[i] * v[j];
                    }
                }
            }
            Ok((p, largest_eigenvalue(&a, &m)?.max(0.0).sqrt(), true))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records("bubble", rows, 1.0))
}

fn check_max(degrees: &[usize], max: usize) -> Result<()> {
    match degrees.iter().find(|&&p| p > max) {
        Some(p) => Err(Error::InvalidParameter(format!("degree {p} exceeds the supported maximum {max}"))),
        None => Ok(()),
    }
}
