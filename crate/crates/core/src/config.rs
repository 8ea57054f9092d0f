//! Run configuration: TOML on disk, validated before any stage runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::galerkin::{Layout, SystemKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Discretely self-similar: periodic orbit in `s`.
    Dss,
    /// Self-similar: stationary profile.
    Ss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub fixed_point: f64,
    pub stationary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { fixed_point: 1e-10, stationary: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub trap: u64,
    pub certificate: u64,
    pub bumps: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { data: 0, trap: 11, certificate: 23, bumps: 37 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemKind,
    pub mode: Mode,
    pub lambda: f64,
    /// Half width `L` of the box `[-L, L)³`.
    pub half_width: f64,
    /// Points per axis.
    pub n: usize,
    pub k: usize,
    pub layout: Layout,
    /// Mollifier width; `None` means two grid spacings.
    pub epsilon: Option<f64>,
    /// Cutoff smallness target; `None` means 1/4 (MHD, NS) or 1/8 (vNSEd).
    pub delta: Option<f64>,
    /// Pointwise bound of the velocity data, `|v₀(x)| ≤ c₀/|x|`.
    pub amplitude: f64,
    /// Amplitude of each further field relative to `amplitude`.
    pub column_amplitudes: Vec<f64>,
    /// Log-periodic modulation depth of DSS data.
    pub depth: f64,
    pub steps: usize,
    /// Heat-background samples per period.
    pub slices: usize,
    pub padding: usize,
    pub trap_starts: usize,
    pub certificate_samples: usize,
    pub tolerances: Tolerances,
    pub seeds: Seeds,
    /// Skip the physical-space audits (reconstruction, local energy).
    pub skip_physical: bool,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Mhd,
            mode: Mode::Dss,
            lambda: 2.0,
            half_width: 6.0,
            n: 48,
            k: 12,
            layout: Layout::Cubic,
            epsilon: None,
            delta: None,
            amplitude: 0.05,
            column_amplitudes: vec![0.5, 0.3, 0.2],
            depth: 0.3,
            steps: 256,
            slices: 16,
            padding: 2,
            trap_starts: 100,
            certificate_samples: 200,
            tolerances: Tolerances::default(),
            seeds: Seeds::default(),
            skip_physical: false,
            output: PathBuf::from("out"),
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Config(msg.into()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Dss && !(self.lambda > 1.0) {
            return invalid(format!("DSS runs need lambda > 1, got {}", self.lambda));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return invalid(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return invalid(format!("delta must lie in (0, 1), got {d}"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0) || !e.is_finite() {
                return invalid(format!("epsilon must be non-negative, got {e}"));
            }
        }
        if !(self.tolerances.fixed_point > 0.0) || !(self.tolerances.stationary > 0.0) {
            return invalid("all tolerances must be positive");
        }
        if !(self.half_width > 0.0) || self.n < 8 || self.n % 2 != 0 {
            return invalid(format!("grid needs L > 0 and an even n >= 8, got L = {}, n = {}", self.half_width, self.n));
        }
        if self.k == 0 {
            return invalid("at least one basis mode is required");
        }
        if self.steps < 16 {
            return invalid(format!("at least 16 steps per period required, got {}", self.steps));
        }
        if self.slices == 0 {
            return invalid("at least one background slice is required");
        }
        if self.padding < 2 || !self.padding.is_power_of_two() {
            return invalid(format!("padding must be a power of two >= 2, got {}", self.padding));
        }
        if !(self.amplitude >= 0.0) || self.column_amplitudes.iter().any(|a| !(*a >= 0.0)) {
            return invalid("amplitudes must be non-negative");
        }
        if self.column_amplitudes.len() < self.system.columns() {
            return invalid(format!("{} needs {} column amplitudes", self.system.name(), self.system.columns()));
        }
        if !(0.0..1.0).contains(&self.depth) {
            return invalid(format!("modulation depth must lie in [0, 1), got {}", self.depth));
        }
        if self.certificate_samples == 0 {
            return invalid("certificate needs at least one sample");
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(match self.system {
            SystemKind::Viscoelastic => 0.125,
            _ => 0.25,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(2.0 * 2.0 * self.half_width / self.n as f64)
    }

    /// Hex SHA-256 of the canonical JSON form (output directory excluded).
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("configuration serializes");
        hex_digest(&bytes)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
