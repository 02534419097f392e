//! Collisional frequency shifts of a Rabi-interrogated lattice clock modelled
//! as a driven, interacting N-spin system, with the supporting lattice and
//! frequency-record statistics tooling.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod lineshape;
pub mod modes;
pub mod perturbative;
pub mod physunits;
pub mod spinmodel;
pub mod tunneling;

pub(crate) mod numeric;

pub use error::{Error, Result};
