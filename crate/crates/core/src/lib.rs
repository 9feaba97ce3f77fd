pub mod dynamics;
pub mod error;
pub mod gate;
pub mod hamiltonian;
pub mod hilbert;
#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod experiments;
mod par;
pub mod tomography;

pub use error::{Error, Result};
