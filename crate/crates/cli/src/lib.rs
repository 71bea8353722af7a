//! Configuration-driven front end for the `qbattery` engines.
//!
//! Subcommands: `spectrum` writes the decay-band table of a lattice, `run`
//! writes a trajectory, `compare` turns two trajectories into an energy
//! excess report and `verify` runs the cross-engine equivalence suite.
//!
//! Exit codes: 0 success, 1 failed verification, 2 parse error,
//! 3 validation error, 4 engine failure, 5 comparison failure.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod verify;

pub use error::{CliError, Result};
