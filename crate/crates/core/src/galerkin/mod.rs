//! Galerkin truncation of the perturbed Leray systems.

pub mod basis;
pub mod system;
pub mod tables;

use serde::{Deserialize, Serialize};

pub use basis::{build_basis, BasisSettings, GalerkinBasis, Layout, Mollifier};
pub use system::{forcing_constant, rhs, rhs_into, CoeffState, EnergyTerms, ForcingNorms};
pub use tables::{CoeffTables, FieldBlocks, GalerkinSystem};

/// Which Leray system is truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// Velocity only.
    NavierStokes,
    /// Velocity and one magnetic field.
    Mhd,
    /// Velocity and the three columns of the deformation tensor.
    Viscoelastic,
}

impl SystemKind {
    /// Number of magnetic-type fields.
    pub fn columns(self) -> usize {
        match self {
            SystemKind::NavierStokes => 0,
            SystemKind::Mhd => 1,
            SystemKind::Viscoelastic => 3,
        }
    }

    /// Decay rate of the energy inequality.
    pub fn decay_rate(self) -> f64 {
        match self {
            SystemKind::NavierStokes | SystemKind::Mhd => 1.0 / 16.0,
            SystemKind::Viscoelastic => 1.0 / 64.0,
        }
    }

    /// Prefactor of the forcing constant.
    pub fn forcing_prefactor(self) -> f64 {
        match self {
            SystemKind::NavierStokes | SystemKind::Mhd => 8.0,
            SystemKind::Viscoelastic => 32.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::NavierStokes => "navier_stokes",
            SystemKind::Mhd => "mhd",
            SystemKind::Viscoelastic => "vnsed",
        }
    }
}
