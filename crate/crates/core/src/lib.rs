//! Boundary layers of the steady linear transport equation in smooth convex
//! planar domains: the half-space problem with geometric correction, the
//! asymptotic expansion in the Knudsen number, and a full 2D kinetic solver
//! used as ground truth.

pub mod anderson;
pub mod decomposition;
pub mod discretization;
pub mod error;
pub mod expansion;
pub mod geometry;
pub mod milne;
pub mod norms;
pub mod transport2d;
pub mod verify;

pub use error::{Error, Result};
