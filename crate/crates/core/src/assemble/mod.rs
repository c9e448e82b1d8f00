//! Degree assignment, global dof numbering under the maximum rule, assembly of the
//! global system, Dirichlet data and the linear solve.

mod dofmap;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::linalg::{pcg, CsrMatrix, IterativeReport, SpdFactor};
use crate::mesh::PolygonalMesh;
use crate::vem_local::{local_stiffness, CellGeometry, LocalVemOperators, Stabilization};

pub use dofmap::{build_dof_map, DofMap};

type Point = Point2<f64>;

/// Largest number of unknowns solved by sparse Cholesky; larger systems use PCG.
pub const DIRECT_SOLVE_LIMIT: usize = 200_000;

/// Relative residual required from the iterative fallback.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Rule for the local degrees of accuracy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeRule {
    /// The same degree on every cell.
    Uniform(usize),
    /// `p = max(2, ⌈μ(j+1)⌉)` on layer `j ≥ 1` and `p = 2` on layer 0.
    Layered(f64),
}

impl DegreeRule {
    pub fn degree_on_layer(self, layer: usize) -> usize {
        match self {
            DegreeRule::Uniform(k) => k,
            DegreeRule::Layered(_) if layer == 0 => 2,
            DegreeRule::Layered(mu) => ((mu * (layer + 1) as f64).ceil() as usize).max(2),
        }
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            DegreeRule::Uniform(k) if k < 2 => Err(Error::InvalidDegree(k)),
            DegreeRule::Layered(mu) if !(mu.is_finite() && mu > 0.0) => {
                Err(Error::InvalidParameter(format!("mu = {mu} must be positive")))
            }
            r => Ok(r),
        }
    }
}

impl fmt::Display for DegreeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeRule::Uniform(k) => write!(f, "uniform:{k}"),
            DegreeRule::Layered(mu) => write!(f, "layered:{mu}"),
        }
    }
}

impl FromStr for DegreeRule {
    type Err = Error;

    /// `uniform:k` or `layered:μ`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("degree rule `{s}`: expected `uniform:<k>` or `layered:<mu>`"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let rule = match kind.trim() {
            "uniform" => DegreeRule::Uniform(value.trim().parse().map_err(|_| bad())?),
            "layered" => DegreeRule::Layered(value.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        rule.validate()
    }
}

/// Cell and edge degrees; edges carry the maximum of their neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeAssignment {
    pub rule: DegreeRule,
    pub cell: Vec<usize>,
    /// Indexed like `mesh.edges`.
    pub edge: Vec<usize>,
}

impl DegreeAssignment {
    /// Edge degrees of cell `c` in local edge order.
    pub fn cell_edge_degrees<T: crate::num::Real>(&self, mesh: &PolygonalMesh<T>, c: usize) -> Vec<usize> {
        mesh.cell_edges[c].iter().map(|&e| self.edge[e]).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.cell.iter().copied().max().unwrap_or(0)
    }
}

pub fn assign_degrees<T: crate::num::Real>(mesh: &PolygonalMesh<T>, rule: DegreeRule) -> Result<DegreeAssignment> {
    let rule = rule.validate()?;
    let cell: Vec<usize> = mesh.cells.iter().map(|c| rule.degree_on_layer(c.layer)).collect();
    let edge = mesh
        .edges
        .iter()
        .map(|e| e.cells.iter().map(|&c| cell[c]).max().unwrap_or(2))
        .collect();
    Ok(DegreeAssignment { rule, cell, edge })
}

/// Assembled stiffness and load over all global dofs, with the local operators kept
/// for post-processing.
#[derive(Debug)]
pub struct GlobalSystem {
    pub dof_map: DofMap,
    pub stiffness: CsrMatrix,
    pub load: Vec<f64>,
    pub local: Vec<LocalVemOperators>,
}

/// Builds every local operator (in parallel) and scatters them into the global numbering.
pub fn assemble_global(
    mesh: &PolygonalMesh<f64>,
    degrees: &DegreeAssignment,
    stab: Stabilization,
    f: impl Fn(Point) -> f64 + Sync,
) -> Result<GlobalSystem> {
    let dof_map = build_dof_map(mesh, degrees);
    let local: Vec<LocalVemOperators> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let geom = CellGeometry::from_mesh(mesh, c);
            local_stiffness(&geom, degrees.cell[c], &degrees.cell_edge_degrees(mesh, c), stab)
                .map_err(|e| e.in_cell(c))
        })
        .collect::<Result<_>>()?;
    let mut triplets = Vec::with_capacity(local.iter().map(|o| o.n_dofs() * o.n_dofs()).sum());
    let mut load = vec![0.0; dof_map.n_dofs];
    for (c, ops) in local.iter().enumerate() {
        let map = &dof_map.cell_dofs[c];
        let k = &ops.k_local;
        for (i, &gi) in map.iter().enumerate() {
            for (j, &gj) in map.iter().enumerate() {
                triplets.push((gi, gj, k[(i, j)]));
            }
        }
        let fl = ops.load(&f);
        for (i, &gi) in map.iter().enumerate() {
            load[gi] += fl[i];
        }
    }
    let stiffness = CsrMatrix::from_triplets(dof_map.n_dofs, dof_map.n_dofs, triplets);
    Ok(GlobalSystem { dof_map, stiffness, load, local })
}

/// Values of `g` at every Dirichlet dof (vertex or edge GLL node on `∂Ω`); zero elsewhere.
pub fn dirichlet_values<T: crate::num::Real>(mesh: &PolygonalMesh<T>, dof_map: &DofMap, g: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; dof_map.n_dofs];
    for (dof, x) in dof_map.positions(mesh).into_iter().enumerate() {
        if dof_map.dirichlet[dof] {
            if let Some(x) = x {
                out[dof] = g(x);
            }
        }
    }
    out
}

/// How the reduced system was solved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Cholesky,
    Pcg,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Values of all global dofs, Dirichlet ones included.
    pub values: Vec<f64>,
    pub solver: SolverKind,
    pub relative_residual: f64,
    pub iterations: usize,
}

impl Solution {
    /// Local dof vector of cell `c`.
    pub fn cell_dofs(&self, dof_map: &DofMap, c: usize) -> DVector<f64> {
        DVector::from_iterator(dof_map.cell_dofs[c].len(), dof_map.cell_dofs[c].iter().map(|&g| self.values[g]))
    }
}

/// Eliminates the Dirichlet dofs (given by `boundary`, a full-length vector whose
/// Dirichlet entries are used) symmetrically and solves for the free dofs.
pub fn solve(system: &GlobalSystem, boundary: &[f64]) -> Result<Solution> {
    solve_with_limit(&system.stiffness, &system.load, &system.dof_map.dirichlet, boundary, DIRECT_SOLVE_LIMIT)
}

/// [`solve`] on raw data, with an explicit size limit for the direct solver.
pub fn solve_with_limit(
    stiffness: &CsrMatrix,
    load: &[f64],
    dirichlet: &[bool],
    boundary: &[f64],
    direct_limit: usize,
) -> Result<Solution> {
    let n = stiffness.nrows;
    let free: Vec<usize> = (0..n).filter(|&i| !dirichlet[i]).collect();
    let fixed: Vec<usize> = (0..n).filter(|&i| dirichlet[i]).collect();
    let mut values = vec![0.0; n];
    for &i in &fixed {
        values[i] = boundary[i];
    }
    if free.is_empty() {
        return Ok(Solution { values, solver: SolverKind::Cholesky, relative_residual: 0.0, iterations: 0 });
    }
    let a_ff = stiffness.submatrix(&free, &free);
    let a_fd = stiffness.submatrix(&free, &fixed);
    let ud: Vec<f64> = fixed.iter().map(|&i| boundary[i]).collect();
    let corr = a_fd.mul_vec(&ud);
    let rhs: Vec<f64> = free.iter().zip(&corr).map(|(&i, c)| load[i] - c).collect();
    let (uf, solver, report) = if free.len() <= direct_limit {
        let x = SpdFactor::new(&a_ff)?.solve(&rhs);
        let r = residual(&a_ff, &x, &rhs);
        (x, SolverKind::Cholesky, IterativeReport { iterations: 0, relative_residual: r })
    } else {
        let (x, rep) = pcg(&a_ff, &rhs, SOLVE_TOLERANCE, 20 * free.len())?;
        (x, SolverKind::Pcg, rep)
    };
    for (k, &i) in free.iter().enumerate() {
        values[i] = uf[k];
    }
    Ok(Solution { values, solver, relative_residual: report.relative_residual, iterations: report.iterations })
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Assembles and solves `−Δu = f` with `u = g` on `∂Ω`.
pub fn solve_poisson(
    mesh: &PolygonalMesh<f64>,
    degrees: &DegreeAssignment,
    stab: Stabilization,
    f: impl Fn(Point) -> f64 + Sync,
    g: impl Fn(Point) -> f64,
) -> Result<(GlobalSystem, Solution)> {
    let system = assemble_global(mesh, degrees, stab, f)?;
    let boundary = dirichlet_values(mesh, &system.dof_map, g);
    let sol = solve(&system, &boundary)?;
    Ok((system, sol))
}
