//! Simulation and analysis of a single NV-centre electron spin (S = 1)
//! coupled to a bath of spin-1/2 ¹³C nuclei in diamond.
//!
//! * [`spinsys`]: spin Hamiltonian, exact diagonalization and ESR spectra.
//! * [`lattice`]: diamond lattice around the vacancy, shells, random ¹³C baths.
//! * [`linewidth`]: inhomogeneous linewidth versus ¹³C concentration.
//! * [`decoherence`]: FID / echo models and fits, Bell-state rate rules,
//!   bath-induced FID and the T₂ ∝ 1/n fit.
//! * [`pulses`]: density-matrix simulation of selective MW/RF pulse sequences.

pub mod constants;
pub mod csvio;
pub mod decoherence;
pub mod error;
pub mod lattice;
pub mod linewidth;
pub mod numeric;
pub mod pulses;
pub mod spinsys;

pub use error::{Error, Result};
