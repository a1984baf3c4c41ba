//! Driven, decaying qubit: Liouvillian spectra, exceptional points, loop
//! protocols in the `(Δ, γ)` plane and their thermodynamics.

pub mod analysis;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod io;
pub mod liouvillian;
pub mod protocol;
pub mod state;
pub mod surface;
pub mod thermo;

pub use error::{Error, Result};
