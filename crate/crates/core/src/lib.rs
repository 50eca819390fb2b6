//! Numerical laboratory for Bergman kernels of successor domains over
//! complete Reinhardt domains.

pub mod config;
pub mod domain;
pub mod error;
pub mod estimates;
pub mod jet;
pub mod kernel;
pub mod projection;
pub mod quadrature;
pub mod report;
pub mod stats;
pub mod suites;

pub use error::{LabError, Result};
pub use num_complex::Complex64 as C64;
