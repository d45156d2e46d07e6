//! Volumes of representations of hyperbolic lattices.
//!
//! The crate computes signed volumes of geodesic simplices in the closed
//! hyperbolic n-ball, evaluates `Vol(rho)` for representations into SO(n,1)
//! over labeled triangulations of coned-off cusped manifolds, and checks the
//! Schläfli identities, degree integrality and Milnor-Wood bounds numerically.

pub mod lorentz;
pub mod simplex;
pub mod schlafli;
pub mod complex;
pub mod repvol;
pub mod cli;
