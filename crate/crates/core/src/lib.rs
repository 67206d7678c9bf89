//! Beating solutions of a coupled cubic Schrodinger system on the circle:
//! resonance bookkeeping, the reduced pendulum, a split-step Fourier
//! simulator, and the linear norm-inflation experiment built on it.

pub mod cli;
pub mod cnls;
pub mod config;
pub mod error;
pub mod linear;
pub mod manifest;
pub mod par;
pub mod pendulum;
pub mod quadrature;
pub mod resonance;
pub mod spectral;
mod splitting;
pub mod validation;

pub use error::{Error, Result};
pub use par::Execution;
pub use spectral::ModeVector;
