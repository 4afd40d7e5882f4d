//! Stokes data and tt* metrics over C*.
//!
//! The crate covers the whole loop: Stokes ray geometry for a spectrum,
//! exact braid-group bookkeeping on unitriangular Stokes matrices, ADE
//! detection, positivity certificates for the Riemann-Hilbert jumps, a
//! numerical Riemann-Hilbert solver producing the metric `G(x)`, and an ODE
//! integrator that recovers the Stokes matrix from `G` again.

pub mod ade;
pub mod braid;
pub mod cli;
pub mod error;
pub mod io;
pub mod isomonodromy;
pub mod linalg;
pub mod ode;
pub mod rational;
pub mod rh_kernel;
pub mod rh_solver;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
