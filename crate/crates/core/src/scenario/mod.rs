//! Filtered stochastic structure: exact finite lattices and seeded Monte Carlo
//! path samples, with conditional expectations under the base measure and
//! under measures given by one-step density factors.

pub mod io;
pub mod lattice;
pub mod paths;
pub mod process;
pub mod stopping;

pub use lattice::{Node, NodeId, NodeInfo, ScenarioLattice};
pub use paths::{simulate_paths, Column, Innovation, InnovationSpec, PathSample};
pub use process::{check_density_steps, cond_expectation, AdaptedProcess};
pub use stopping::StoppingTime;
