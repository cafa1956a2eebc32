//! Informational completeness of truncated continuous-variable measurements.
//!
//! Builds quadrature and photon-counting POVMs on finite Fock subspaces,
//! counts how many linearly independent elements a set of measurement
//! settings induces, and checks completeness end to end with simulated
//! homodyne data and maximum-likelihood reconstruction.

pub mod completeness;
pub mod error;
pub mod fock;
pub mod povm;
pub mod quadrature;
pub mod support;
pub mod tomo;

pub use error::{Error, Result};
pub use fock::{CMatrix, DensityMatrix, FockVector, QuadraturePoint};
pub use support::SupportSet;
