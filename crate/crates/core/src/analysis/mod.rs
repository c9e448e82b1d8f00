//! Error measures, convergence studies, the local stability experiment and
//! numerical checks of polynomial inverse estimates.

mod inverse;
mod stability;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::assemble::{assign_degrees, build_dof_map, solve_poisson, DegreeRule, DofMap, GlobalSystem};
use crate::error::{Error, Result};
use crate::fem_quad::fem_assemble_solve;
use crate::geometry::Point2;
use crate::mesh::{build_graded_mesh, MeshFamily, PolygonalMesh};
use crate::polyquad::{gauss_legendre, gauss_lobatto_1d, lagrange_values, polygon_rule, polygon_rule_graded, QuadratureRule};
use crate::vem_local::Stabilization;

pub use inverse::{
    inverse_lab_bubble, inverse_lab_gll, inverse_lab_hminus1, inverse_lab_triangle, inverse_lab_weighted, InverseLabRecord,
};
pub use stability::{decay_exponent, spectrum, stability_table, Shape, SpectrumReport, StabilityOptions};

type Point = Point2<f64>;

/// Extra geometric refinement levels toward the corner for cells touching it.
pub const SINGULAR_REFINEMENT_LEVELS: usize = 3;

const EXPONENT: f64 = 2.0 / 3.0;

/// `u = r^{2/3} sin(2/3 (θ + π/2))` on `[-1,1]² \ [-1,0]²`, harmonic with zero trace on
/// the edges meeting at the reentrant corner.
pub fn benchmark_u(x: Point) -> f64 {
    let r = x.norm();
    // adding 0.0 turns -0.0 into +0.0 so the negative x-axis maps to θ = π
    let theta = (x.y + 0.0).atan2(x.x);
    r.powf(EXPONENT) * (EXPONENT * (theta + std::f64::consts::FRAC_PI_2)).sin()
}

pub fn benchmark_grad(x: Point) -> [f64; 2] {
    let r = x.norm();
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let theta = (x.y + 0.0).atan2(x.x);
    let phase = EXPONENT * (theta + std::f64::consts::FRAC_PI_2) - theta;
    let s = EXPONENT * r.powf(EXPONENT - 1.0);
    [s * phase.sin(), s * phase.cos()]
}

/// Quadrature for products of degree-`p` gradients on cell `c`, graded toward the
/// origin when the cell touches it.
fn error_rule(mesh: &PolygonalMesh<f64>, c: usize, p: usize) -> Result<QuadratureRule<f64>> {
    let poly = mesh.cell_points(c);
    let order = 2 * p + 4;
    if mesh.touches_origin(c) {
        if let Ok(rule) = polygon_rule_graded(&poly, Point::origin(), order, SINGULAR_REFINEMENT_LEVELS) {
            return Ok(rule);
        }
    }
    polygon_rule(&poly, mesh.cells[c].star_center, order).map_err(|e| e.in_cell(c))
}

/// `|v|_{1,Ω}` of a function given by its gradient, with the quadrature of [`energy_error_pi`]
/// at degree `p`.
pub fn energy_seminorm(mesh: &PolygonalMesh<f64>, p: usize, grad: impl Fn(Point) -> [f64; 2] + Sync) -> Result<f64> {
    let parts = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| Ok(error_rule(mesh, c, p)?.integrate(|x| sq(grad(x)))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

fn sq(g: [f64; 2]) -> f64 {
    g[0] * g[0] + g[1] * g[1]
}

/// `(Σ_E |u − Π∇u_n|²_{1,E})^{1/2}`.
pub fn energy_error_pi(system: &GlobalSystem, mesh: &PolygonalMesh<f64>, values: &[f64], grad_u: impl Fn(Point) -> [f64; 2] + Sync) -> Result<f64> {
    let parts = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let ops = &system.local[c];
            let dofs = nalgebra::DVector::from_iterator(
                system.dof_map.cell_dofs[c].len(),
                system.dof_map.cell_dofs[c].iter().map(|&g| values[g]),
            );
            let coef: Vec<f64> = ops.project(&dofs).iter().copied().collect();
            let rule = error_rule(mesh, c, ops.layout.degree)?;
            Ok(rule.integrate(|x| {
                let gh = ops.basis.grad_poly(&coef, x);
                let gu = grad_u(x);
                sq([gu[0] - gh[0], gu[1] - gh[1]])
            }))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `‖u − u_n‖_{0,ℰ}`: the discrete trace on each edge is the GLL interpolant of its nodal dofs.
pub fn skeleton_l2_error(mesh: &PolygonalMesh<f64>, dof_map: &DofMap, values: &[f64], u: impl Fn(Point) -> f64) -> f64 {
    let mut total = 0.0;
    for (e, edge) in mesh.edges.iter().enumerate() {
        let [lo, hi] = edge.vertices;
        let (a, b) = (mesh.vertices[lo], mesh.vertices[hi]);
        let pe = dof_map.edge_degrees[e];
        let gll = gauss_lobatto_1d::<f64>(pe);
        let mut nodal = Vec::with_capacity(pe + 1);
        nodal.push(values[lo]);
        nodal.extend((0..pe - 1).map(|k| values[dof_map.edge_offset[e] + k]));
        nodal.push(values[hi]);
        let half = 0.5 * a.dist(b);
        let g = gauss_legendre::<f64>(pe + 8);
        for (&s, &w) in g.nodes.iter().zip(&g.weights) {
            let ell = lagrange_values(&gll.nodes, s);
            let uh: f64 = ell.iter().zip(&nodal).map(|(l, v)| l * v).sum();
            let d = u(a.lerp(b, 0.5 * (s + 1.0))) - uh;
            total += w * half * d * d;
        }
    }
    total.sqrt()
}

/// Degree distribution used by a study: a fixed rule, or uniform degree `n + 1` on the `n`-th mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DegreePolicy {
    Rule(DegreeRule),
    UniformNPlusOne,
}

impl DegreePolicy {
    pub fn rule_for(self, n: usize) -> DegreeRule {
        match self {
            DegreePolicy::Rule(r) => r,
            DegreePolicy::UniformNPlusOne => DegreeRule::Uniform((n + 1).max(2)),
        }
    }
}

impl fmt::Display for DegreePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreePolicy::Rule(r) => write!(f, "{r}"),
            DegreePolicy::UniformNPlusOne => write!(f, "uniform:n+1"),
        }
    }
}

impl FromStr for DegreePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform:n+1" => Ok(DegreePolicy::UniformNPlusOne),
            _ => s.parse().map(DegreePolicy::Rule),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Vem,
    Fem,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Vem => "vem",
            Method::Fem => "fem",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceConfig {
    pub family: MeshFamily,
    pub sigma: f64,
    pub degrees: DegreePolicy,
    pub stabilization: Stabilization,
    pub n_min: usize,
    pub n_max: usize,
    pub method: Method,
}

/// One run of a convergence study. Failed runs keep their message and no errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRecord {
    pub family: MeshFamily,
    pub sigma: f64,
    pub rule: String,
    pub n: usize,
    /// Number of free (non-Dirichlet) degrees of freedom.
    pub n_dofs: usize,
    /// Relative energy error (`|u − Π∇u_n|` for VEM, `|u − u_n|` for FEM).
    pub err_energy: f64,
    pub err_skeleton: f64,
    pub seconds: f64,
    pub failure: Option<String>,
}

/// Least-squares line `y = intercept + slope·x` with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r2 })
}

/// Exponent `a` of `y ≈ c·x^a` by a log-log fit.
pub fn power_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).unzip();
    linear_fit(&lx, &ly)
}

/// First mesh index included in the exponential fits.
pub const FIT_FROM_N: usize = 2;

/// Fit of `log₁₀ err` against `N^{1/3}` over the successful runs with `n ≥ FIT_FROM_N`.
pub fn exponential_fit(records: &[StudyRecord], err: impl Fn(&StudyRecord) -> f64) -> Option<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.n >= FIT_FROM_N && r.failure.is_none() && err(r) > 0.0)
        .map(|r| ((r.n_dofs as f64).cbrt(), err(r).log10()))
        .unzip();
    linear_fit(&xs, &ys)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub records: Vec<StudyRecord>,
    pub energy_fit: Option<LinearFit>,
    pub skeleton_fit: Option<LinearFit>,
}

/// Runs the benchmark on meshes `n_min..=n_max` (in parallel, reported in order of `n`).
pub fn convergence_study(config: &ConvergenceConfig) -> Result<ConvergenceStudy> {
    if config.n_min > config.n_max {
        return Err(Error::InvalidParameter(format!("n range {}..{} is empty", config.n_min, config.n_max)));
    }
    if config.method == Method::Fem && config.family != MeshFamily::TensorQuadsFem {
        return Err(Error::InvalidParameter("the FEM comparison runs on family d only".into()));
    }
    let finest = build_graded_mesh(config.family, config.n_max, config.sigma)?;
    let norm = energy_seminorm(&finest, 2, benchmark_grad)?;
    let records: Vec<StudyRecord> = (config.n_min..=config.n_max)
        .into_par_iter()
        .map(|n| study_run(config, n, norm))
        .collect();
    let energy_fit = exponential_fit(&records, |r| r.err_energy);
    let skeleton_fit = exponential_fit(&records, |r| r.err_skeleton);
    Ok(ConvergenceStudy { records, energy_fit, skeleton_fit })
}

fn study_run(config: &ConvergenceConfig, n: usize, norm: f64) -> StudyRecord {
    let start = Instant::now();
    let rule = config.degrees.rule_for(n);
    let mut record = StudyRecord {
        family: config.family,
        sigma: config.sigma,
        rule: config.degrees.to_string(),
        n,
        n_dofs: 0,
        err_energy: f64::NAN,
        err_skeleton: f64::NAN,
        seconds: 0.0,
        failure: None,
    };
    let outcome = (|| -> Result<(usize, f64, f64)> {
        let mesh = build_graded_mesh(config.family, n, config.sigma)?;
        match config.method {
            Method::Vem => {
                let degrees = assign_degrees(&mesh, rule)?;
                let (system, sol) = solve_poisson(&mesh, &degrees, config.stabilization, |_| 0.0, benchmark_u)?;
                let e = energy_error_pi(&system, &mesh, &sol.values, benchmark_grad)?;
                let s = skeleton_l2_error(&mesh, &system.dof_map, &sol.values, benchmark_u);
                Ok((system.dof_map.n_free, e, s))
            }
            Method::Fem => {
                let sol = fem_assemble_solve(&mesh, rule, |_| 0.0, benchmark_u)?;
                let e = sol.energy_error(benchmark_grad, Point::origin(), SINGULAR_REFINEMENT_LEVELS);
                Ok((sol.n_free, e, sol.skeleton_l2_error(benchmark_u)))
            }
        }
    })();
    match outcome {
        Ok((n_dofs, e, s)) => {
            record.n_dofs = n_dofs;
            record.err_energy = e / norm;
            record.err_skeleton = s;
        }
        Err(e) => record.failure = Some(e.to_string()),
    }
    record.seconds = start.elapsed().as_secs_f64();
    record
}

/// Number of free dofs of the VEM space on mesh `n` without assembling.
pub fn count_free_dofs(family: MeshFamily, sigma: f64, n: usize, rule: DegreeRule) -> Result<usize> {
    let mesh = build_graded_mesh(family, n, sigma)?;
    Ok(build_dof_map(&mesh, &assign_degrees(&mesh, rule)?).n_free)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_vanishes_on_the_reentrant_edges() {
        for t in [0.1, 0.5, 1.0] {
            assert!(benchmark_u(Point::new(-t, 0.0)).abs() < 1e-15);
            assert!(benchmark_u(Point::new(0.0, -t)).abs() < 1e-15);
        }
        assert!(benchmark_u(Point::new(0.5, 0.5)) > 0.0);
    }

    #[test]
    fn benchmark_gradient_matches_differences() {
        let h = 1e-6;
        for x in [Point::new(0.3, -0.7), Point::new(-0.4, 0.2), Point::new(0.9, 0.9)] {
            let g = benchmark_grad(x);
            let dx = (benchmark_u(x + Point::new(h, 0.0)) - benchmark_u(x - Point::new(h, 0.0))) / (2.0 * h);
            let dy = (benchmark_u(x + Point::new(0.0, h)) - benchmark_u(x - Point::new(0.0, h))) / (2.0 * h);
            assert!((g[0] - dx).abs() < 1e-7 && (g[1] - dy).abs() < 1e-7);
        }
    }

    #[test]
    fn fits() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.r2 - 1.0).abs() < 1e-14);
        let p = power_fit(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]).unwrap();
        assert!((p.slope - 2.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn degree_policy_tokens() {
        assert_eq!("uniform:n+1".parse::<DegreePolicy>().unwrap(), DegreePolicy::UniformNPlusOne);
        assert_eq!("layered:1".parse::<DegreePolicy>().unwrap().to_string(), "layered:1");
        assert_eq!(DegreePolicy::UniformNPlusOne.rule_for(4), DegreeRule::Uniform(5));
    }
}
