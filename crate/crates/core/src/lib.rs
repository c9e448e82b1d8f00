//! hp-version virtual element method for the Poisson problem on geometrically
//! graded polygonal meshes of the L-shaped domain.
//!
//! Geometry, quadrature and mesh construction are generic over the scalar type
//! (`f32` or `f64`, see [`num::Real`]); the discretization and solver layers work
//! in `f64`. The aliases below fix the scalar to `f64`.

pub mod analysis;
pub mod assemble;
pub mod cli;
pub mod error;
pub mod fem_quad;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod num;
pub mod oracle;
pub mod polyquad;
pub mod vem_local;

pub use error::{Error, Result};

pub type Point = geometry::Point2<f64>;
pub type Mesh = mesh::PolygonalMesh<f64>;
pub type Cell = mesh::PolygonCell<f64>;
pub type Rule = polyquad::QuadratureRule<f64>;
pub type Rule1d = polyquad::Rule1d<f64>;
pub type Basis = polyquad::PolyBasis<f64>;
