//! Numerical experiments for two-dimensional neohookean energies
//! `∫ |Dh|^p + (det Dh)^{-q}`: closed-form non-injective maps, Cantor-type
//! gluing, quadrature of the energy, a constrained gradient descent on
//! piecewise linear maps and numerical checks of injectivity.

pub mod cantor;
pub mod energy;
pub mod geometry;
pub mod maps;
pub mod minimizer;
pub mod reduce;
pub mod verify;

pub use geometry::{Mat2, PLMap, Point2, Rect, Sides, TriangleMesh};
pub use maps::{AnalyticMap, Domain, MapError, PinchParams};
