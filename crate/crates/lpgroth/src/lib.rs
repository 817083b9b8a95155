//! Numerical toolkit for the vector-spin `ℓ^p` Gaussian Grothendieck problem:
//! finite-N ground states and Lagrangians, Parisi-type functionals at zero and
//! positive temperature, and exact identities used as verification checks.

pub mod asymptotics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod parisi;
pub mod quadrature;
pub mod rng;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
