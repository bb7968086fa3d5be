//! Hybrid quantum-classical subspace estimation of spectral functions.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod eigen;
pub mod emulator;
pub mod error;
pub mod fcidump;
pub mod fock;
pub mod parallel;
pub mod pipeline;
pub mod spectrum;

pub use error::{Error, Result};
