//! Fine finite element reference computations on a single polygon: approximate
//! virtual basis functions, their exact Dirichlet energy, pointwise evaluation
//! and discrete negative norms.

mod fine;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::linalg::{CsrMatrix, SpdFactor};
use crate::polyquad::{gauss_lobatto_1d, lagrange_values};
use crate::vem_local::LocalVemOperators;

pub use fine::{BoundaryPosition, FineMesh, LagrangeTriangle};

type Point = Point2<f64>;

/// Default refinement level and element degree of the fine space.
pub const DEFAULT_LEVEL: usize = 4;
pub const DEFAULT_FEM_DEGREE: usize = 4;

/// Fine `P_k` space on a polygon with its stiffness matrix and the factorized
/// interior block, shared by all solves on that polygon.
#[derive(Debug)]
pub struct FineSpace {
    pub mesh: FineMesh,
    pub stiffness: CsrMatrix,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    a_ib: CsrMatrix,
    a_ii: SpdFactor,
    area: f64,
}

impl FineSpace {
    pub fn new(polygon: &[Point], center: Point, level: usize, fem_degree: usize) -> Result<Self> {
        let mesh = FineMesh::new(polygon, center, level, fem_degree)?;
        let stiffness = mesh.stiffness();
        let (boundary, interior): (Vec<usize>, Vec<usize>) = (0..mesh.n_nodes()).partition(|&i| mesh.is_boundary(i));
        if interior.is_empty() {
            return Err(Error::SingularSystem("fine mesh has no interior nodes".into()));
        }
        let a_ii = SpdFactor::new(&stiffness.submatrix(&interior, &interior))?;
        let a_ib = stiffness.submatrix(&interior, &boundary);
        let area = crate::geometry::signed_area(polygon);
        Ok(Self { mesh, stiffness, interior, boundary, a_ib, a_ii, area })
    }

    pub fn level(&self) -> usize {
        self.mesh.level
    }

    pub fn fem_degree(&self) -> usize {
        self.mesh.element.k
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// Approximations of the canonical basis `dof_i(φ_j) = δ_ij` of the local space:
    /// polynomial traces on the edges, Laplacian in `P_{p-2}` and prescribed moments.
    pub fn virtual_basis(&self, ops: &LocalVemOperators) -> Result<VirtualBasisApprox> {
        let layout = &ops.layout;
        let nd = layout.n_dofs();
        let nm = layout.n_moments();
        let nb = self.boundary.len();

        // boundary values of each basis function: the edge GLL interpolant
        let mut g = DMatrix::zeros(nb, nd);
        let gll: Vec<_> = layout.edge_degrees.iter().map(|&pe| gauss_lobatto_1d::<f64>(pe)).collect();
        for (row, &node) in self.boundary.iter().enumerate() {
            let pos = self.mesh.boundary[node].expect("boundary node");
            let ell = lagrange_values(&gll[pos.edge].nodes, 2.0 * pos.t - 1.0);
            for (k, &dof) in layout.edge_trace_dofs(pos.edge).iter().enumerate() {
                g[(row, dof)] = ell[k];
            }
        }

        // moment functionals (1/|E|) ∫ m_α ψ on the fine space
        let area = self.area;
        let basis = &ops.basis;
        let c = self
            .mesh
            .load_matrix(layout.degree.saturating_sub(2), |x| basis.eval(x)[..nm].iter().map(|v| v / area).collect(), nm)
            .transpose();
        let c_i = select_columns(&c, &self.interior);
        let c_b = select_columns(&c, &self.boundary);
        let mut mu = DMatrix::zeros(nm, nd);
        for (l, dof) in layout.moment_dofs().enumerate() {
            mu[(l, dof)] = 1.0;
        }

        // interior block: A_II φ_I = C_Iᵀ λ − A_IB g, C_I φ_I = μ − C_B g
        let z = self.a_ii.solve_dense(&self.a_ib.mul_dense(&g));
        let phi_i = if nm > 0 {
            let y = self.a_ii.solve_dense(&c_i.transpose());
            let s = &c_i * &y;
            let rhs = &mu - &c_b * &g + &c_i * &z;
            let lambda = s
                .cholesky()
                .ok_or_else(|| Error::SingularSystem("moment constraints are degenerate on the fine mesh".into()))?
                .solve(&rhs);
            y * lambda - z
        } else {
            -z
        };

        let mut coeffs = DMatrix::zeros(self.n_nodes(), nd);
        for (row, &node) in self.boundary.iter().enumerate() {
            coeffs.row_mut(node).copy_from(&g.row(row));
        }
        for (row, &node) in self.interior.iter().enumerate() {
            coeffs.row_mut(node).copy_from(&phi_i.row(row));
        }
        if !coeffs.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularSystem("non-finite fine basis coefficients".into()));
        }
        Ok(VirtualBasisApprox { coeffs })
    }

    /// Exact local stiffness `a^E(φ_i, φ_j)` of the approximate basis.
    pub fn exact_local_stiffness(&self, approx: &VirtualBasisApprox) -> DMatrix<f64> {
        let ka = self.stiffness.mul_dense(&approx.coeffs);
        let a = approx.coeffs.transpose() * ka;
        0.5 * (&a + a.transpose())
    }

    /// Fine function `Σ_j dofs_j φ_j`.
    pub fn evaluate(&self, approx: &VirtualBasisApprox, dofs: &DVector<f64>) -> FineField<'_> {
        let values = &approx.coeffs * dofs;
        FineField { mesh: &self.mesh, values: values.iter().copied().collect() }
    }

    /// Dof functionals of `ops` applied to every approximate basis function (columns).
    /// Boundary functionals are evaluated through the fine trace; moments by fine quadrature.
    pub fn dof_round_trip(&self, ops: &LocalVemOperators, approx: &VirtualBasisApprox) -> DMatrix<f64> {
        let layout = &ops.layout;
        let nd = layout.n_dofs();
        let nm = layout.n_moments();
        let nbd = layout.n_boundary_dofs();
        let mut out = DMatrix::zeros(nd, nd);
        let area = self.area;
        let c = self
            .mesh
            .load_matrix(layout.degree.saturating_sub(2), |x| ops.basis.eval(x)[..nm].iter().map(|v| v / area).collect(), nm)
            .transpose();
        let moments = c * &approx.coeffs;
        for e in 0..layout.n_vertices() {
            let gll = gauss_lobatto_1d::<f64>(layout.edge_degrees[e]);
            for (k, &dof) in layout.edge_trace_dofs(e).iter().enumerate() {
                let t = 0.5 * (gll.nodes[k] + 1.0);
                for j in 0..nd {
                    let col: Vec<f64> = approx.coeffs.column(j).iter().copied().collect();
                    out[(dof, j)] = self.mesh.trace_value(&col, e, t);
                }
            }
        }
        for l in 0..nm {
            for j in 0..nd {
                out[(nbd + l, j)] = moments[(l, j)];
            }
        }
        out
    }

    /// Gram matrix of the discrete `H⁻¹` product of the `n` functions returned by `fs`
    /// (all of degree `degree`): `Cᵀ A_II⁻¹ C` with `C` their fine load vectors.
    pub fn hminus1_gram(&self, fs: impl Fn(Point) -> Vec<f64>, n: usize, degree: usize) -> DMatrix<f64> {
        let b = self.mesh.load_matrix(degree, fs, n);
        let c = DMatrix::from_fn(self.interior.len(), n, |i, j| b[(self.interior[i], j)]);
        let g = c.transpose() * self.a_ii.solve_dense(&c);
        0.5 * (&g + g.transpose())
    }

    /// `‖q‖_{-1,E}` as `|w|_{1,E}` with `−Δw = q` in `E`, `w = 0` on `∂E`, computed on the fine space.
    /// `degree` is the polynomial degree of `q` (for quadrature).
    pub fn hminus1_norm(&self, q: impl Fn(Point) -> f64, degree: usize) -> f64 {
        let b = self.mesh.load_matrix(degree, |x| vec![q(x)], 1);
        let rhs: Vec<f64> = self.interior.iter().map(|&i| b[(i, 0)]).collect();
        let w = self.a_ii.solve(&rhs);
        let energy: f64 = w.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        energy.max(0.0).sqrt()
    }
}

/// Fine-space coefficients (rows: fine nodes) of every approximate basis function (columns).
#[derive(Clone, Debug)]
pub struct VirtualBasisApprox {
    pub coeffs: DMatrix<f64>,
}

/// A finite element function on the fine mesh.
#[derive(Clone, Debug)]
pub struct FineField<'a> {
    mesh: &'a FineMesh,
    pub values: Vec<f64>,
}

impl FineField<'_> {
    /// Value and gradient at `x`; `None` outside the polygon.
    pub fn at(&self, x: Point) -> Option<(f64, [f64; 2])> {
        let (e, xi, eta) = self.mesh.locate(x)?;
        Some(self.mesh.eval_in_element(&self.values, e, xi, eta))
    }

    /// `∫ |∇u|²` over the polygon.
    pub fn energy(&self) -> f64 {
        let k = self.mesh.element.k;
        let rule = crate::polyquad::triangle_rule::<f64>(2 * k);
        let mut total = 0.0;
        for (e, c) in self.mesh.corners.iter().enumerate() {
            let det = crate::geometry::orient(c[0], c[1], c[2]).abs();
            for (p, w) in rule.iter() {
                let (_, g) = self.mesh.eval_in_element(&self.values, e, p.x, p.y);
                total += w * det * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        total
    }
}

fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}
