//! Quadrature rules, Legendre / Gauss–Lobatto machinery and polynomial bases.

mod basis;
mod legendre;
mod rules;

pub use basis::{
    dim_moments, dim_p, exponent_index, exponents, BasisKind, PolyBasis, ORTHONORMAL_FROM_DEGREE,
};
pub use legendre::{
    gauss_for_degree, gauss_legendre, gauss_lobatto_1d, lagrange_derivatives, lagrange_values,
    legendre_eval, legendre_table, Rule1d,
};
pub use rules::{
    map_triangle, polygon_rule, polygon_rule_graded, rule_on_triangles, triangle_rule, QuadratureRule,
};
