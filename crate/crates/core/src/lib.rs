//! Simulation of atomic Raman and Bragg diffraction from one (single
//! diffraction) or two counterpropagating (double diffraction) optical
//! gratings.
//!
//! The crate integrates the coupled momentum-ladder equations for Gaussian
//! light pulses, assembles momentum-space transition functions from them,
//! and derives resonance widths, diffraction efficiencies, loss channels and
//! Mach-Zehnder interferometer signals.
//!
//! Units are dimensionless throughout: momenta in ħK, frequencies in the
//! recoil frequency ω_K and times in 1/ω_K.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod interferometer;
pub mod physics;
pub mod solver;
pub mod transition;

pub use error::{Error, Result};
