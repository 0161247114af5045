//! A numerical laboratory for families of one-dimensional Lagrangians that
//! share their classical trajectories without differing by a total time
//! derivative.
//!
//! Starting from a base Lagrangian L = v^2/2 - V(x), the crate builds the
//! derived family L' whose velocity Hessian is rescaled by a function of
//! the energy, follows both systems through the classical equations of
//! motion, quantizes each on a spatial grid, and assembles time-sliced
//! transfer matrices so the two quantizations can be compared kernel by
//! kernel.
//!
//! Module map:
//!
//! * [`model`]: potentials, grids, phase-space regions, the energy maps.
//! * [`lagrangian`]: construction and calculus of the derived Lagrangians,
//!   plus the Hessian-based equivalence test.
//! * [`momentum`]: the cubic momentum map of the worked quartic family,
//!   its inversion, series, and large-momentum forms.
//! * [`classical`]: explicit Runge-Kutta integration of the shared normal
//!   form and trajectory comparison.
//! * [`quantum`]: grid Hamiltonians, spectral decompositions, reference
//!   propagators.
//! * [`lattice`]: time-sliced kernels, their composition into finite-time
//!   amplitudes, and convergence studies against the spectral references.
//!
//! Units are natural throughout: hbar = m = 1.

pub mod classical;
pub mod error;
pub mod lagrangian;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod momentum;
pub mod quad;
pub mod quantum;

pub use error::{Error, Result};
pub use lagrangian::{
    build_sprime_lagrangian, equivalence_test, hessian, legendre_energy, DerivedChannels,
    EquivalenceOutcome, EquivalenceReport, Gauge, HamiltonianForm, HessianField, Lagrangian,
};
pub use model::{
    Boundary, GridSpec, PhasePoint, PhaseRegion, Potential, SigmaMap, TimeLattice, TimeMode,
};
