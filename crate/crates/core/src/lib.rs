//! Numerical laboratory for self-similar and discretely self-similar Leray
//! profiles of the 3D MHD equations and the damped viscoelastic
//! Navier–Stokes equations.

pub mod background;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod field;
pub mod galerkin;
pub mod grid;
pub mod norms;
pub mod orbit;
pub mod pipeline;
pub mod physical;
pub mod pressure;
pub mod quadrature;
pub mod radial;
pub mod report;
pub mod similarity;
pub mod smooth;
pub mod spectral;
pub mod stationary;

pub use error::{LabError, Result};
