//! Configuration-driven runs of the chemotaxis solver: manufactured-solution
//! convergence sweeps and blow-up simulations, with CSV and snapshot output.

pub mod config;
pub mod convergence;
pub mod ic;
pub mod manufactured;
pub mod runner;

pub use config::{ConfigError, RunConfig};
pub use runner::{run, sweep, RunError};
