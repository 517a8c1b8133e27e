//! Structure-preserving finite-difference solver for the parabolic-parabolic
//! Patlak-Keller-Segel chemotaxis system on a cell-centered Neumann grid.
//!
//! The density step is the minimizer of a strictly convex functional, so the
//! discrete solution stays inside the admissible set of the entropy model,
//! conserves mass and dissipates the free energy.

pub mod diagnostics;
pub mod elliptic;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod krylov;
pub mod ops;
pub mod params;
pub mod snapshot;
pub mod spectral;
pub mod stepper;

pub use entropy::EntropyModel;
pub use error::{EllipticError, EntropyError, GridError, StepError};
pub use grid::{CellField, FaceField, Grid};
pub use params::{SchemeParams, Stabilization};
