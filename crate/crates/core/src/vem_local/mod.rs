//! Local virtual element operators: dof layout, the projectors `Π∇` and `Π⁰`,
//! stabilization, local stiffness and load.

mod layout;

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::polyquad::{
    dim_p, gauss_for_degree, gauss_lobatto_1d, lagrange_values, polygon_rule, PolyBasis, QuadratureRule,
};

pub use layout::{CellGeometry, DofKind, DofLayout};

type Point = Point2<f64>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum StabilizationKind {
    /// `(p/h)(u,v)_{0,∂E} + (p²/h²)(Π⁰u, Π⁰v)_{0,E}` with exact edge integrals.
    #[default]
    BoundaryPlusMoments,
    /// Same, with the boundary product replaced by the GLL nodal sum on each edge.
    GllBoundaryPlusMoments,
    /// Euclidean product of dof vectors.
    DofiDofi,
}

impl FromStr for StabilizationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boundary" | "boundary-plus-moments" => Ok(Self::BoundaryPlusMoments),
            "gll" | "gll-boundary-plus-moments" => Ok(Self::GllBoundaryPlusMoments),
            "dofi-dofi" | "dofidofi" => Ok(Self::DofiDofi),
            _ => Err(Error::InvalidParameter(format!("unknown stabilization `{s}`"))),
        }
    }
}

/// Stabilization form with a multiplier on its boundary term (`p/h` becomes `weight·p/h`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stabilization {
    pub kind: StabilizationKind,
    pub boundary_weight: f64,
}

impl Stabilization {
    pub fn new(kind: StabilizationKind) -> Self {
        Self { kind, boundary_weight: 1.0 }
    }

    pub fn with_boundary_weight(self, boundary_weight: f64) -> Self {
        Self { boundary_weight, ..self }
    }

    /// Setting that reproduces the published stability table: Gauss–Lobatto boundary
    /// product with weight `√2` (equivalently `h/√2` in the boundary term).
    pub fn table() -> Self {
        Self::new(StabilizationKind::GllBoundaryPlusMoments).with_boundary_weight(std::f64::consts::SQRT_2)
    }
}

impl Default for Stabilization {
    fn default() -> Self {
        Self::new(StabilizationKind::default())
    }
}

impl From<StabilizationKind> for Stabilization {
    fn from(kind: StabilizationKind) -> Self {
        Self::new(kind)
    }
}

/// Cell quadrature order used for products of degree-`p` polynomials.
pub fn default_quadrature_order(p: usize) -> usize {
    2 * p + 2
}

/// All local matrices of one cell. Polynomial coefficients refer to `basis`.
#[derive(Clone, Debug)]
pub struct LocalVemOperators {
    pub geometry: CellGeometry,
    pub layout: DofLayout,
    pub basis: PolyBasis<f64>,
    pub rule: QuadratureRule<f64>,
    pub stabilization: Stabilization,
    /// `dof_i(q_α)`, `n_dofs × dim P_p`.
    pub d: DMatrix<f64>,
    /// `dim P_p × n_dofs`.
    pub b: DMatrix<f64>,
    /// `B·D`.
    pub g: DMatrix<f64>,
    /// Dofs to coefficients of `Π∇v`, `dim P_p × n_dofs`.
    pub pi_nabla: DMatrix<f64>,
    /// Dofs to coefficients of `Π⁰_{p-2} v` in the first `dim P_{p-2}` basis functions.
    pub pi0: DMatrix<f64>,
    /// `(1/|E|) ∫ q_i q_j` for `i, j < dim P_{p-2}`.
    pub moment_mass: DMatrix<f64>,
    pub k_consistency: DMatrix<f64>,
    pub k_stab: DMatrix<f64>,
    pub k_local: DMatrix<f64>,
}

impl LocalVemOperators {
    pub fn n_dofs(&self) -> usize {
        self.layout.n_dofs()
    }

    /// Dof vector of a polynomial given by its coefficients in `basis`.
    pub fn dofs_of_poly(&self, coef: &[f64]) -> DVector<f64> {
        &self.d * DVector::from_column_slice(coef)
    }

    /// Dof vector of an arbitrary function: nodal values on the boundary and
    /// moments by cell quadrature.
    pub fn dofs_of(&self, f: impl Fn(Point) -> f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.n_dofs());
        for (i, x) in self.layout.boundary_nodes(&self.geometry).into_iter().enumerate() {
            v[i] = f(x);
        }
        let nm = self.layout.n_moments();
        let off = self.layout.n_boundary_dofs();
        let area = self.geometry.area;
        for (x, w) in self.rule.iter() {
            let q = self.basis.eval(x);
            let fx = f(x);
            for l in 0..nm {
                v[off + l] += w * q[l] * fx / area;
            }
        }
        v
    }

    /// Coefficients of `Π∇v`.
    pub fn project(&self, dofs: &DVector<f64>) -> DVector<f64> {
        &self.pi_nabla * dofs
    }

    /// Local load `∫_E Π⁰_{p-2} f · φ_i`, nonzero on the moment dofs only.
    pub fn load(&self, f: impl Fn(Point) -> f64) -> DVector<f64> {
        let nm = self.layout.n_moments();
        let area = self.geometry.area;
        let mut fm = DVector::zeros(nm);
        for (x, w) in self.rule.iter() {
            let q = self.basis.eval(x);
            let fx = f(x);
            for l in 0..nm {
                fm[l] += w * q[l] * fx / area;
            }
        }
        let c = solve_spd(&self.moment_mass, &fm).unwrap_or(fm);
        let mut out = DVector::zeros(self.n_dofs());
        for (l, dof) in self.layout.moment_dofs().enumerate() {
            out[dof] = area * c[l];
        }
        out
    }
}

/// Builds every local operator of a cell with degree `p` and the given edge degrees.
pub fn local_stiffness(
    geom: &CellGeometry,
    degree: usize,
    edge_degrees: &[usize],
    stab: impl Into<Stabilization>,
) -> Result<LocalVemOperators> {
    let layout = DofLayout::new(geom, degree, edge_degrees)?;
    let rule = polygon_rule(&geom.points, geom.star_center, default_quadrature_order(degree))
        .map_err(|e| e.in_cell(geom.index))?;
    let basis = PolyBasis::for_cell(geom.index, geom.centroid, geom.diameter, degree, &rule)?;
    build(geom.clone(), layout, basis, rule, stab.into())
}

fn build(
    geom: CellGeometry,
    layout: DofLayout,
    basis: PolyBasis<f64>,
    rule: QuadratureRule<f64>,
    stab: Stabilization,
) -> Result<LocalVemOperators> {
    let p = layout.degree;
    let np = dim_p(p);
    let nm = layout.n_moments();
    let nd = layout.n_dofs();
    let nb = layout.n_boundary_dofs();
    let area = geom.area;

    let gram = DMatrix::from_row_slice(np, np, &basis.gram(&rule));
    let moment_mass = gram.view((0, 0), (nm, nm)).into_owned();

    // D
    let mut d = DMatrix::zeros(nd, np);
    for (i, x) in layout.boundary_nodes(&geom).into_iter().enumerate() {
        let q = basis.eval(x);
        for a in 0..np {
            d[(i, a)] = q[a];
        }
    }
    for l in 0..nm {
        for a in 0..np {
            d[(nb + l, a)] = gram[(l, a)];
        }
    }

    // B: -∫ Δq_α v + ∫_∂E ∂_n q_α v, row 0 replaced by ∫_∂E v
    let mut b = DMatrix::zeros(np, nd);
    let lap = basis.laplacian_coefficients();
    for a in 0..np {
        for l in 0..nm {
            b[(a, nb + l)] -= area * lap[a * nm + l];
        }
    }
    for e in 0..layout.n_vertices() {
        let (pa, pb) = geom.edge(e);
        let pe = layout.edge_degrees[e];
        let len = pa.dist(pb);
        let normal = Point::new(pb.y - pa.y, pa.x - pb.x).scale(1.0 / len);
        let gll = gauss_lobatto_1d::<f64>(pe);
        let trace = layout.edge_trace_dofs(e);
        let gauss = gauss_for_degree::<f64>(pe + p + 2);
        for (&s, &w) in gauss.nodes.iter().zip(&gauss.weights) {
            let x = pa.lerp(pb, 0.5 * (s + 1.0));
            let ww = 0.5 * w * len;
            let ell = lagrange_values(&gll.nodes, s);
            let grads = basis.grad(x);
            for (k, &dof) in trace.iter().enumerate() {
                b[(0, dof)] += ww * ell[k];
                for a in 1..np {
                    let dn = grads[a][0] * normal.x + grads[a][1] * normal.y;
                    b[(a, dof)] += ww * dn * ell[k];
                }
            }
        }
    }

    let g = &b * &d;
    let g_lu = g.clone().lu();
    let pi_nabla = g_lu.solve(&b).ok_or(Error::SingularG { cell: geom.index })?;
    if !pi_nabla.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularG { cell: geom.index });
    }

    // consistency: G with the constant row removed is the polynomial stiffness matrix
    let mut g_tilde = g.clone();
    g_tilde.row_mut(0).fill(0.0);
    let g_tilde = 0.5 * (&g_tilde + g_tilde.transpose());
    let k_consistency = symmetrize(pi_nabla.transpose() * &g_tilde * &pi_nabla);

    // Π⁰ onto P_{p-2}
    let mut select = DMatrix::zeros(nm, nd);
    for l in 0..nm {
        select[(l, nb + l)] = 1.0;
    }
    let mass_inv = spd_inverse(&moment_mass).ok_or(Error::IllConditioned { cell: geom.index, degree: p })?;
    let pi0 = &mass_inv * &select;

    let s = stabilization_matrix(&geom, &layout, &mass_inv, stab);
    let r = DMatrix::identity(nd, nd) - &d * &pi_nabla;
    let k_stab = symmetrize(r.transpose() * s * r);
    let k_local = &k_consistency + &k_stab;

    Ok(LocalVemOperators {
        geometry: geom,
        layout,
        basis,
        rule,
        stabilization: stab,
        d,
        b,
        g,
        pi_nabla,
        pi0,
        moment_mass,
        k_consistency,
        k_stab,
        k_local,
    })
}

/// Matrix of the stabilization form on dof vectors (before the `I - Π∇` filter).
fn stabilization_matrix(
    geom: &CellGeometry,
    layout: &DofLayout,
    mass_inv: &DMatrix<f64>,
    stab: Stabilization,
) -> DMatrix<f64> {
    let nd = layout.n_dofs();
    if stab.kind == StabilizationKind::DofiDofi {
        return DMatrix::identity(nd, nd);
    }
    let p = layout.degree as f64;
    let h = geom.diameter;
    let wb = stab.boundary_weight * p / h;
    let mut s = DMatrix::zeros(nd, nd);
    for e in 0..layout.n_vertices() {
        let (pa, pb) = geom.edge(e);
        let half = 0.5 * pa.dist(pb);
        let pe = layout.edge_degrees[e];
        let gll = gauss_lobatto_1d::<f64>(pe);
        let trace = layout.edge_trace_dofs(e);
        match stab.kind {
            StabilizationKind::GllBoundaryPlusMoments => {
                for (k, &dof) in trace.iter().enumerate() {
                    s[(dof, dof)] += wb * half * gll.weights[k];
                }
            }
            _ => {
                let gauss = gauss_for_degree::<f64>(2 * pe);
                for (&t, &w) in gauss.nodes.iter().zip(&gauss.weights) {
                    let ell = lagrange_values(&gll.nodes, t);
                    for (k, &dk) in trace.iter().enumerate() {
                        for (l, &dl) in trace.iter().enumerate() {
                            s[(dk, dl)] += wb * half * w * ell[k] * ell[l];
                        }
                    }
                }
            }
        }
    }
    // (Π⁰u, Π⁰v)_{0,E} = |E| mᵤᵀ M⁻¹ m_v in terms of the moment dofs m
    let nb = layout.n_boundary_dofs();
    let nm = layout.n_moments();
    let scale = p * p / (h * h) * geom.area;
    for i in 0..nm {
        for j in 0..nm {
            s[(nb + i, nb + j)] += scale * mass_inv[(i, j)];
        }
    }
    s
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&m + m.transpose())
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    let inv = m.clone().cholesky()?.inverse();
    Some(symmetrize(inv))
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if m.nrows() == 0 {
        return Some(rhs.clone());
    }
    Some(m.clone().cholesky()?.solve(rhs))
}
