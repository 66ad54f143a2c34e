//! Dirichlet eigenvalues and the fundamental gap of Euclidean triangles.

pub mod deformation;
pub mod eigensolver;
pub mod error;
pub mod geometry;
pub mod lame;
pub mod quadrature;
pub mod study;
pub mod sweep;

pub use error::{GapError, Result};
