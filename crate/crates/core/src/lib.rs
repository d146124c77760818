//! Spectral solvers for PDEs on domains embedded in a periodic box.
//!
//! The forcing is extended from the physical domain Ω to the rest of the box
//! by a trigonometric polynomial chosen so that the extended problem is
//! smooth; the extended problem is then solved by FFT on the torus.

pub mod boundary;
pub mod eigen;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod export;
pub mod extension;
pub mod geometry;
pub mod jet;
pub mod min_norm;
pub mod spectral;

pub use error::{Result, SfeError};
