//! Time series shared by the engines.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::spectral::SpectralParams;

/// Which engine produced a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineTag {
    Analytic,
    Exact,
    FcsCheck,
}

impl EngineTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineTag::Analytic => "analytic",
            EngineTag::Exact => "exact",
            EngineTag::FcsCheck => "fcs_check",
        }
    }
}

impl fmt::Display for EngineTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EngineTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "analytic" => Ok(EngineTag::Analytic),
            "exact" => Ok(EngineTag::Exact),
            "fcs_check" | "fcs" => Ok(EngineTag::FcsCheck),
            other => Err(format!("unknown engine '{other}'")),
        }
    }
}

/// Energy bookkeeping along a trajectory. All energies are changes since t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub t: Vec<f64>,
    /// Energy flow into the environment per unit time.
    pub theta: Vec<f64>,
    /// ⟨ΔE_S⟩
    pub system: Vec<f64>,
    /// ⟨Δq⟩, the energy transferred to the environment.
    pub environment: Vec<f64>,
    /// ⟨ΔH_I⟩
    pub interaction: Vec<f64>,
    pub engine: EngineTag,
    pub params: SpectralParams,
    pub temp_sys: f64,
}
