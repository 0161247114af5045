//! Shared model vocabulary: potentials, Sigma maps, grids, phase points.

pub mod grid;
pub mod phase;
pub mod potential;
pub mod sigma;

pub use grid::{Boundary, GridSpec, TimeLattice, TimeMode};
pub use phase::{PhasePoint, PhaseRegion};
pub use potential::Potential;
pub use sigma::SigmaMap;
