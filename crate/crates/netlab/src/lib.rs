//! Coupled-cell network analysis: typed coloured digraphs, balanced
//! colourings and quotients, feedforward lifts (including phase-shifted
//! travelling-wave lifts), admissible ODE assembly and integration,
//! periodic-orbit location, and Floquet / transverse stability
//! certification for lifted orbits.

pub mod eigen;
pub mod error;
pub mod expr;
pub mod files;
pub mod fixtures;
pub mod integrate;
pub mod monodromy;
pub mod lift;
pub mod model;
pub mod network;
pub mod orbit;
pub mod phase;
pub mod report;
pub mod stability;
pub mod system;

pub use error::{Error, Result};
