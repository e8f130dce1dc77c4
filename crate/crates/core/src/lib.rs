//! Simulation and verification laboratory for the nearest-neighbour
//! ferromagnetic Ising model on hypercubic lattices.
//!
//! Exact solvers (enumeration, transfer matrices, low/high-temperature
//! expansions, closed forms), Monte Carlo samplers (Glauber, Swendsen–Wang),
//! graphical representations (FK percolation, random currents) and
//! checkers for the classical correlation inequalities.

pub mod cluster;
pub mod currents;
pub mod error;
pub mod exact;
pub mod fermionic;
pub mod fit;
pub mod fk;
pub mod inequalities;
pub mod mc;
pub mod lattice;
pub mod model;
pub mod scaling;

pub use error::{Error, Result};
pub use lattice::{Lattice, Topology};
pub use model::{BoundaryCondition, Couplings, SpinConfig};
