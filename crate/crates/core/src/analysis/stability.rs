use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::generalized_eigenvalues;
use crate::oracle::{FineSpace, DEFAULT_FEM_DEGREE, DEFAULT_LEVEL};
use crate::vem_local::{local_stiffness, CellGeometry, Stabilization};

use super::{power_fit, Point};

/// Test polygons of the local stability experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Square,
    /// Outer ring of the decagon mesh with σ = ½.
    Decagon,
    /// Half of that ring cut along `y = x`.
    Hexagon,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Decagon, Shape::Hexagon];

    pub fn polygon(self) -> Vec<Point> {
        let pts: &[(f64, f64)] = match self {
            Shape::Square => &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
            Shape::Decagon => &[
                (0.0, -1.0),
                (1.0, -1.0),
                (1.0, 1.0),
                (-1.0, 1.0),
                (-1.0, 0.0),
                (-0.5, 0.0),
                (-0.5, 0.5),
                (0.5, 0.5),
                (0.5, -0.5),
                (0.0, -0.5),
            ],
            Shape::Hexagon => &[(0.0, -1.0), (1.0, -1.0), (1.0, 1.0), (0.5, 0.5), (0.5, -0.5), (0.0, -0.5)],
        };
        pts.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Square => "square",
            Shape::Decagon => "decagon",
            Shape::Hexagon => "hexagon",
        })
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Shape::Square),
            "decagon" => Ok(Shape::Decagon),
            "hexagon" => Ok(Shape::Hexagon),
            _ => Err(Error::InvalidParameter(format!("unknown shape `{s}` (expected square, decagon or hexagon)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityOptions {
    pub stabilization: Stabilization,
    pub level: usize,
    pub fem_degree: usize,
    /// Repeat on level `level − 1` and flag relative changes of 1% or more.
    pub check_convergence: bool,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            stabilization: Stabilization::default(),
            level: DEFAULT_LEVEL,
            fem_degree: DEFAULT_FEM_DEGREE,
            check_convergence: true,
        }
    }
}

/// Relative change below which the oracle counts as converged.
pub const ORACLE_TOLERANCE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub shape: Shape,
    pub p: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub oracle_level: usize,
    pub converged: bool,
    /// Largest relative change of the extremes against the coarser oracle (0 when unchecked).
    pub change: f64,
}

/// Extreme eigenvalues of `K^E v = λ A^E v` on the complement of the constants, where
/// `A^E` is the oracle's stiffness of the virtual basis.
pub fn spectrum(geom: &CellGeometry, p: usize, stab: Stabilization, space: &FineSpace) -> Result<(f64, f64)> {
    let ops = local_stiffness(geom, p, &vec![p; geom.n_vertices()], stab)?;
    let a = space.exact_local_stiffness(&space.virtual_basis(&ops)?);
    let ev = generalized_eigenvalues(&ops.k_local, &a, Some(&ops.dofs_of(|_| 1.0))).map_err(|e| match e {
        Error::NotSpd => Error::SingularSystem(format!(
            "reference stiffness is singular at degree {p}; the fine space is too coarse (raise the level or element degree)"
        )),
        e => e,
    })?;
    Ok((ev[0], ev[ev.len() - 1]))
}

/// Stability spectra of `polygon` for every degree in `degrees`.
pub fn stability_table(shape: Shape, polygon: &[Point], degrees: &[usize], opts: &StabilityOptions) -> Result<Vec<SpectrumReport>> {
    if let Some(&p) = degrees.iter().find(|&&p| p < 2) {
        return Err(Error::DegreeTooLow(p));
    }
    let geom = CellGeometry::from_polygon(polygon.to_vec())?;
    let fine = FineSpace::new(&geom.points, geom.star_center, opts.level, opts.fem_degree)?;
    let coarse = match opts.check_convergence && opts.level > 0 {
        true => Some(FineSpace::new(&geom.points, geom.star_center, opts.level - 1, opts.fem_degree)?),
        false => None,
    };
    degrees
        .par_iter()
        .map(|&p| {
            let (lo, hi) = spectrum(&geom, p, opts.stabilization, &fine)?;
            let change = match &coarse {
                Some(c) => {
                    let (clo, chi) = spectrum(&geom, p, opts.stabilization, c)?;
                    ((lo - clo) / lo).abs().max(((hi - chi) / hi).abs())
                }
                None => 0.0,
            };
            Ok(SpectrumReport {
                shape,
                p,
                lambda_min: lo,
                lambda_max: hi,
                oracle_level: opts.level,
                converged: change < ORACLE_TOLERANCE,
                change,
            })
        })
        .collect()
}

/// Exponent `a` of `λ_min ≈ c·p^a` fitted over the reports.
pub fn decay_exponent(reports: &[SpectrumReport]) -> Option<f64> {
    let (ps, ls): (Vec<f64>, Vec<f64>) = reports.iter().map(|r| (r.p as f64, r.lambda_min)).unzip();
    power_fit(&ps, &ls).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_simple_and_counterclockwise() {
        for s in Shape::ALL {
            let poly = s.polygon();
            assert!(crate::geometry::signed_area(&poly) > 0.0, "{s}");
            assert!(crate::geometry::is_simple(&poly));
            assert_eq!(s.to_string().parse::<Shape>().unwrap(), s);
        }
        assert_eq!(Shape::Decagon.polygon().len(), 10);
        assert_eq!(Shape::Hexagon.polygon().len(), 6);
    }
}
