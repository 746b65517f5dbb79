//! Binary computer-generated holograms for truncated-Bessel electron vortex
//! modes: synthesis, far-field simulation and higher-order mode analysis.

pub mod analysis;
pub mod config;
pub mod error;
pub mod fft;
pub mod field;
pub mod hologram;
pub mod io;
pub mod modes;
pub mod optics;
pub mod pipeline;
pub mod specfun;

pub use error::{Error, Result};
