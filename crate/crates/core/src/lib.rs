//! Storage-phase dynamics of dimeric dissipative spin-lattice quantum batteries.

pub mod analysis;
pub mod cumulant;
pub mod error;
pub mod integrator;
pub mod lattice;
pub mod oracle;
pub mod single_excitation;

pub use error::{Error, Result};
pub use lattice::{Engine, LatticeSpec, Observable, Trajectory};
