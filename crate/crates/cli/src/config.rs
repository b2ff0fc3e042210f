//! Run configuration, read from TOML.
//!
//! ```toml
//! engine = "exact"
//! compare = ["analytic"]
//! temp_sys = 1.0
//! n_modes = 150
//! t_max = 50.0
//! t_step = 0.01
//! outputs = ["theta", "backflow"]
//!
//! [spectral]
//! lambda = 0.01
//! omega_c = 0.25
//! temp_env = 1.0
//!
//! [sweep]
//! parameter = "lambda"
//! values = [0.01, 0.05, 0.1]
//! ```

use std::path::Path;

use qbm_core::backflow::{TailPolicy, TAIL_TOLERANCE};
use qbm_core::gip::PhaseSide;
use qbm_core::{EngineTag, SpectralParams, ThresholdConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Theta,
    Energies,
    Phi,
    Backflow,
    Gip,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    OmegaC,
    TempEnv,
    TempSys,
    NModes,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::Lambda => "lambda",
            SweepParameter::OmegaC => "omega_c",
            SweepParameter::TempEnv => "temp_env",
            SweepParameter::TempSys => "temp_sys",
            SweepParameter::NModes => "n_modes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GipSettings {
    /// Thermal excitation ν of both families (k = ν + ½).
    pub nu: f64,
    pub r_mts: f64,
    pub r_sts: f64,
    /// Use every `stride`-th grid time.
    pub stride: usize,
    pub side: PhaseSide,
}

impl Default for GipSettings {
    fn default() -> Self {
        Self {
            nu: 0.5,
            r_mts: 0.658,
            r_sts: 0.658,
            stride: 1,
            side: PhaseSide::Ancilla,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackflowSettings {
    /// Initial system temperatures; defaults to T_E(1 + k/4), k = 0..8.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temps: Option<Vec<f64>>,
    pub policy: TailPolicy,
    pub tail_tolerance: f64,
}

impl Default for BackflowSettings {
    fn default() -> Self {
        Self {
            temps: None,
            policy: TailPolicy::Warn,
            tail_tolerance: TAIL_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSettings {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub bracket_width: f64,
    pub eps_zero: f64,
    pub n_modes: usize,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        let d = ThresholdConfig::default();
        Self {
            lambda_lo: d.lambda_lo,
            lambda_hi: d.lambda_hi,
            bracket_width: d.bracket_width,
            eps_zero: d.eps_zero,
            n_modes: d.n_modes,
        }
    }
}

fn default_engine() -> EngineTag {
    EngineTag::Analytic
}
fn default_n_modes() -> usize {
    150
}
fn default_t_max() -> f64 {
    50.0
}
fn default_t_step() -> f64 {
    0.01
}
fn default_outputs() -> Vec<Output> {
    vec![Output::Theta]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_engine")]
    pub engine: EngineTag,
    /// Further engines whose θ(t) is reported next to the primary one.
    #[serde(default)]
    pub compare: Vec<EngineTag>,
    /// Initial system temperature; T_E when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temp_sys: Option<f64>,
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_step")]
    pub t_step: f64,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    pub spectral: SpectralParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
    #[serde(default)]
    pub gip: GipSettings,
    #[serde(default)]
    pub backflow: BackflowSettings,
    #[serde(default)]
    pub threshold: ThresholdSettings,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn nonneg(name: &str, v: f64) -> CliResult<()> {
    check(v.is_finite() && v >= 0.0, || {
        format!("{name} must be finite and >= 0, got {v}")
    })
}

impl SimulationConfig {
    pub fn new(spectral: SpectralParams) -> Self {
        Self {
            engine: default_engine(),
            compare: Vec::new(),
            temp_sys: None,
            n_modes: default_n_modes(),
            omega_max: None,
            t_max: default_t_max(),
            t_step: default_t_step(),
            outputs: default_outputs(),
            spectral,
            sweep: None,
            gip: GipSettings::default(),
            backflow: BackflowSettings::default(),
            threshold: ThresholdSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn temp_sys(&self) -> f64 {
        self.temp_sys.unwrap_or(self.spectral.temp_env)
    }

    pub fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }

    pub fn threshold_config(&self) -> ThresholdConfig {
        ThresholdConfig {
            lambda_lo: self.threshold.lambda_lo,
            lambda_hi: self.threshold.lambda_hi,
            bracket_width: self.threshold.bracket_width,
            eps_zero: self.threshold.eps_zero,
            n_modes: self.threshold.n_modes,
            omega_max: self.omega_max,
            t_max: self.t_max,
            t_step: self.t_step,
            temps: self.backflow.temps.clone(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let s = &self.spectral;
        nonneg("spectral.lambda", s.lambda)?;
        check(s.omega_c.is_finite() && s.omega_c > 0.0, || {
            format!("spectral.omega_c must be > 0, got {}", s.omega_c)
        })?;
        nonneg("spectral.temp_env", s.temp_env)?;
        if let Some(t) = self.temp_sys {
            nonneg("temp_sys", t)?;
        }
        check(self.n_modes >= 2, || {
            format!("n_modes must be >= 2, got {}", self.n_modes)
        })?;
        if let Some(w) = self.omega_max {
            check(w.is_finite() && w > 0.0, || format!("omega_max must be > 0, got {w}"))?;
        }
        check(self.t_step.is_finite() && self.t_step > 0.0, || {
            format!("t_step must be > 0, got {}", self.t_step)
        })?;
        check(self.t_max.is_finite() && self.t_max >= 4.0 * self.t_step, || {
            format!("t_max must cover at least 4 steps, got {}", self.t_max)
        })?;
        check(!self.outputs.is_empty(), || "outputs must not be empty".into())?;
        if let Some(sw) = &self.sweep {
            check(!sw.values.is_empty(), || "sweep.values must not be empty".into())?;
            check(sw.values.iter().all(|v| v.is_finite()), || {
                "sweep.values must be finite".into()
            })?;
            check(sw.values.windows(2).all(|w| w[0] < w[1]), || {
                "sweep.values must be sorted in increasing order".into()
            })?;
            for &v in &sw.values {
                self.with_axis_value(sw.parameter, v)?.validate()?;
            }
        }
        nonneg("gip.nu", self.gip.nu)?;
        check(self.gip.r_mts.is_finite() && self.gip.r_sts.is_finite(), || {
            "gip squeezing must be finite".into()
        })?;
        check(self.gip.stride >= 1, || "gip.stride must be >= 1".into())?;
        if let Some(t) = &self.backflow.temps {
            check(!t.is_empty(), || "backflow.temps must not be empty".into())?;
            for &v in t {
                nonneg("backflow.temps", v)?;
            }
        }
        check(self.backflow.tail_tolerance > 0.0, || {
            "backflow.tail_tolerance must be > 0".into()
        })?;
        let th = &self.threshold;
        check(th.lambda_lo >= 0.0 && th.lambda_lo < th.lambda_hi, || {
            format!("threshold bracket [{}, {}] is empty", th.lambda_lo, th.lambda_hi)
        })?;
        check(th.bracket_width > 0.0, || "threshold.bracket_width must be > 0".into())?;
        check(th.n_modes >= 2, || "threshold.n_modes must be >= 2".into())?;
        Ok(())
    }

    /// The single-run configuration for one sweep value.
    pub fn with_axis_value(&self, param: SweepParameter, value: f64) -> CliResult<Self> {
        let mut c = self.clone();
        c.sweep = None;
        match param {
            SweepParameter::Lambda => c.spectral.lambda = value,
            SweepParameter::OmegaC => c.spectral.omega_c = value,
            SweepParameter::TempEnv => c.spectral.temp_env = value,
            SweepParameter::TempSys => c.temp_sys = Some(value),
            SweepParameter::NModes => {
                check(value.fract() == 0.0 && value >= 2.0, || {
                    format!("n_modes sweep values must be integers >= 2, got {value}")
                })?;
                c.n_modes = value as usize;
            }
        }
        Ok(c)
    }
}
