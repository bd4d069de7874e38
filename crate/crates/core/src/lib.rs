//! Numerical laboratory for Lagrangian versus Eulerian analyticity radii of
//! incompressible Euler flows.

pub mod closed_form;
pub mod counterexample;
pub mod error;
pub mod euler2d;
pub mod experiments;
pub mod gevrey;
pub mod lagrangian;
pub mod majorant;
pub mod quadrature;
pub mod spectral;
pub mod strip;

pub use error::{Error, Result};
