//! Energy backflow: the integrated negative part of θ(t), its maximisation
//! over thermal initial states and the coupling above which it vanishes.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::ExactRun;
use crate::fcs::{fcs_first_moment, FcsConfig};
use crate::quadrature::{self, cubic_on_interval, interval_integral};
use crate::spectral::{coefficient_table, default_omega_max, KernelTable, SpectralParams};
use crate::trace::EngineTag;
use crate::weak::WeakCouplingRun;

/// Sampled energy flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSeries {
    pub t_grid: Vec<f64>,
    pub theta: Vec<f64>,
    pub engine: EngineTag,
    pub params: SpectralParams,
    pub temp_sys: f64,
}

impl FlowSeries {
    pub fn horizon(&self) -> f64 {
        *self.t_grid.last().unwrap_or(&0.0)
    }
}

/// Root of the local cubic on interval `i` between `a` and `b`, where it changes sign.
fn refine_root(grid: &[f64], vals: &[f64], i: usize, mut a: f64, mut b: f64) -> f64 {
    let mut fa = cubic_on_interval(grid, vals, i, a);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = cubic_on_interval(grid, vals, i, m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// ∫ max(−θ, 0) dt over the series. Sign changes are located on the local
/// cubic interpolant before the negative pieces are integrated.
pub fn backflow_integral(f: &FlowSeries) -> f64 {
    negative_part_integral(&f.t_grid, &f.theta)
}

pub fn negative_part_integral(grid: &[f64], vals: &[f64]) -> f64 {
    assert_eq!(grid.len(), vals.len());
    if grid.len() < 4 {
        // too short for the cubic rule; trapezoid on the clipped values
        return grid
            .windows(2)
            .zip(vals.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * ((-v[0]).max(0.0) + (-v[1]).max(0.0)))
            .sum();
    }
    let mut total = 0.0;
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let (fa, fb) = (vals[i], vals[i + 1]);
        if fa >= 0.0 && fb >= 0.0 {
            continue;
        }
        if fa < 0.0 && fb < 0.0 {
            total -= interval_integral(grid, vals, i, a, b);
        } else {
            let r = refine_root(grid, vals, i, a, b);
            if fa < 0.0 {
                total -= interval_integral(grid, vals, i, a, r);
            } else {
                total -= interval_integral(grid, vals, i, r, b);
            }
        }
    }
    total.max(0.0)
}

/// What to do when the flow has not settled by the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Fail with a truncation error.
    Strict,
    /// Log and record the bound.
    #[default]
    Warn,
}

/// Tail tolerance on the negative flow over the last tenth of the horizon.
pub const TAIL_TOLERANCE: f64 = 1e-7;

/// Largest negative excursion of θ over [0.9·t_max, t_max].
pub fn tail_bound(f: &FlowSeries) -> f64 {
    let t_max = f.horizon();
    f.t_grid
        .iter()
        .zip(&f.theta)
        .filter(|(t, _)| **t >= 0.9 * t_max)
        .map(|(_, v)| (-v).max(0.0))
        .fold(0.0, f64::max)
}

/// Applies the tail rule; returns the bound and whether it was exceeded.
pub fn check_tail(f: &FlowSeries, policy: TailPolicy, tolerance: f64) -> Result<(f64, bool)> {
    let tail = tail_bound(f);
    let exceeded = tail > tolerance;
    if exceeded {
        let horizon = f.horizon();
        match policy {
            TailPolicy::Strict => {
                return Err(Error::Truncation {
                    tail,
                    tolerance,
                    horizon,
                    suggested_horizon: 2.0 * horizon,
                })
            }
            TailPolicy::Warn => debug!(
                "negative flow {tail:e} near horizon {horizon} exceeds {tolerance:e} ({} engine, T_S = {})",
                f.engine, f.temp_sys
            ),
        }
    }
    Ok((tail, exceeded))
}

/// Anything that produces θ(t) for a thermal initial system state.
pub trait FlowEngine: Sync {
    fn tag(&self) -> EngineTag;
    fn params(&self) -> SpectralParams;
    fn flow(&self, temp_sys: f64) -> Result<FlowSeries>;
}

/// Weak-coupling closed form.
#[derive(Debug, Clone)]
pub struct AnalyticEngine {
    pub kernels: Arc<KernelTable>,
}

impl AnalyticEngine {
    pub fn new(params: &SpectralParams, t_grid: &[f64]) -> Result<Self> {
        Ok(Self {
            kernels: Arc::new(coefficient_table(params, t_grid)?),
        })
    }
}

impl FlowEngine for AnalyticEngine {
    fn tag(&self) -> EngineTag {
        EngineTag::Analytic
    }
    fn params(&self) -> SpectralParams {
        self.kernels.params
    }
    fn flow(&self, temp_sys: f64) -> Result<FlowSeries> {
        let run = WeakCouplingRun::new(self.kernels.clone(), temp_sys)?;
        Ok(FlowSeries {
            t_grid: self.kernels.t_grid.clone(),
            theta: run.energy_flow(),
            engine: EngineTag::Analytic,
            params: self.kernels.params,
            temp_sys,
        })
    }
}

/// Counting-field finite differences.
#[derive(Debug, Clone)]
pub struct FcsEngine {
    pub kernels: Arc<KernelTable>,
    pub config: FcsConfig,
}

impl FlowEngine for FcsEngine {
    fn tag(&self) -> EngineTag {
        EngineTag::FcsCheck
    }
    fn params(&self) -> SpectralParams {
        self.kernels.params
    }
    fn flow(&self, temp_sys: f64) -> Result<FlowSeries> {
        let run = WeakCouplingRun::new(self.kernels.clone(), temp_sys)?;
        let m = fcs_first_moment(&run, self.config)?;
        Ok(FlowSeries {
            t_grid: m.t,
            theta: m.theta,
            engine: EngineTag::FcsCheck,
            params: self.kernels.params,
            temp_sys,
        })
    }
}

/// Finite-bath exact dynamics.
#[derive(Debug, Clone)]
pub struct ExactEngine {
    pub params: SpectralParams,
    pub n_modes: usize,
    pub omega_max: f64,
    pub t_grid: Vec<f64>,
}

impl ExactEngine {
    /// Uses the given grid up to min(t_max, half the recurrence time).
    pub fn new(params: &SpectralParams, n_modes: usize, omega_max: Option<f64>, t_grid: &[f64]) -> Result<Self> {
        quadrature::validate_grid(t_grid)?;
        let omega_max = omega_max.unwrap_or_else(|| default_omega_max(params));
        if n_modes < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 bath modes, got {n_modes}"
            )));
        }
        let t_rec = 2.0 * std::f64::consts::PI * n_modes as f64 / omega_max;
        let limit = 0.5 * t_rec;
        let grid: Vec<f64> = t_grid.iter().copied().take_while(|t| *t <= limit).collect();
        if grid.len() < t_grid.len() {
            warn!("exact-engine horizon cut to {limit:.3} (half the recurrence time)");
        }
        quadrature::validate_grid(&grid)?;
        Ok(Self {
            params: *params,
            n_modes,
            omega_max,
            t_grid: grid,
        })
    }
}

impl FlowEngine for ExactEngine {
    fn tag(&self) -> EngineTag {
        EngineTag::Exact
    }
    fn params(&self) -> SpectralParams {
        self.params
    }
    fn flow(&self, temp_sys: f64) -> Result<FlowSeries> {
        let run = ExactRun::new(&self.params, temp_sys, self.n_modes, self.omega_max)?;
        Ok(FlowSeries {
            t_grid: self.t_grid.clone(),
            theta: run.energy_flow(&self.t_grid),
            engine: EngineTag::Exact,
            params: self.params,
            temp_sys,
        })
    }
}

/// Backflow maximised over initial system temperatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackflowResult {
    pub value: f64,
    pub maximizer_temp: f64,
    pub truncation_time: f64,
    /// Largest tail bound over the temperature grid.
    pub tail_bound: f64,
    pub tail_exceeded: bool,
    /// (T_S, backflow) for every grid temperature, in grid order.
    pub per_temperature: Vec<(f64, f64)>,
    pub engine: EngineTag,
}

/// {T_E} ∪ {T_E(1 + k/4), k = 1..8}.
pub fn default_temperature_grid(temp_env: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=8).map(|k| temp_env * (1.0 + k as f64 / 4.0)).collect();
    v.dedup();
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackflowOptions {
    pub policy: TailPolicy,
    pub tail_tolerance: f64,
}

impl Default for BackflowOptions {
    fn default() -> Self {
        Self {
            policy: TailPolicy::Warn,
            tail_tolerance: TAIL_TOLERANCE,
        }
    }
}

pub fn backflow_measure(engine: &dyn FlowEngine, temps: &[f64], opts: BackflowOptions) -> Result<BackflowResult> {
    let temp_env = engine.params().temp_env;
    if temps.is_empty() {
        return Err(Error::InvalidParameter("empty system temperature grid".into()));
    }
    if let Some(t) = temps.iter().find(|t| !(**t >= temp_env) || !t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "system temperature {t} below bath temperature {temp_env}"
        )));
    }
    let rows: Vec<Result<(f64, f64, f64, bool)>> = temps
        .par_iter()
        .map(|&ts| {
            let f = engine.flow(ts)?;
            let (tail, exceeded) = check_tail(&f, opts.policy, opts.tail_tolerance)?;
            Ok((backflow_integral(&f), tail, f.horizon(), exceeded))
        })
        .collect();
    let mut per_temperature = Vec::with_capacity(temps.len());
    let mut best = (f64::NEG_INFINITY, temps[0]);
    let mut tail_max: f64 = 0.0;
    let mut exceeded_any = false;
    let mut horizon = 0.0;
    for (ts, row) in temps.iter().zip(rows) {
        let (value, tail, h, exceeded) = row?;
        per_temperature.push((*ts, value));
        if value > best.0 {
            best = (value, *ts);
        }
        tail_max = tail_max.max(tail);
        exceeded_any |= exceeded;
        horizon = h;
    }
    Ok(BackflowResult {
        value: best.0,
        maximizer_temp: best.1,
        truncation_time: horizon,
        tail_bound: tail_max,
        tail_exceeded: exceeded_any,
        per_temperature,
        engine: engine.tag(),
    })
}

/// Settings for the coupling-threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub bracket_width: f64,
    pub eps_zero: f64,
    pub n_modes: usize,
    pub omega_max: Option<f64>,
    pub t_max: f64,
    pub t_step: f64,
    /// Initial system temperatures; `None` uses T_S = T_E.
    pub temps: Option<Vec<f64>>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            lambda_lo: 0.1,
            lambda_hi: 1.8,
            bracket_width: 0.01,
            eps_zero: 1e-8,
            n_modes: 300,
            omega_max: None,
            t_max: 50.0,
            t_step: 0.01,
            temps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// Largest coupling seen with backflow above ε_zero.
    pub lower: f64,
    /// Smallest coupling seen with backflow below ε_zero.
    pub upper: f64,
    pub estimate: f64,
    /// Every (λ, backflow) evaluation in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Bisects λ with the exact engine for the coupling above which the backflow
/// drops below ε_zero.
pub fn threshold_coupling(omega_c: f64, temp_env: f64, cfg: &ThresholdConfig) -> Result<ThresholdResult> {
    let grid = quadrature::uniform_grid(cfg.t_max, cfg.t_step)?;
    let temps = cfg.temps.clone().unwrap_or_else(|| vec![temp_env]);
    let eval = |lambda: f64| -> Result<f64> {
        let p = SpectralParams::new(lambda, omega_c, temp_env)?;
        let engine = ExactEngine::new(&p, cfg.n_modes, cfg.omega_max, &grid)?;
        Ok(backflow_measure(&engine, &temps, BackflowOptions::default())?.value)
    };
    let (mut lo, mut hi) = (cfg.lambda_lo, cfg.lambda_hi);
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("empty coupling bracket [{lo}, {hi}]")));
    }
    let (v_lo, v_hi) = rayon::join(|| eval(lo), || eval(hi));
    let (v_lo, v_hi) = (v_lo?, v_hi?);
    let mut evaluations = vec![(lo, v_lo), (hi, v_hi)];
    if !(v_lo >= cfg.eps_zero && v_hi < cfg.eps_zero) {
        return Err(Error::Bracket {
            lo,
            hi,
            value_lo: v_lo,
            value_hi: v_hi,
        });
    }
    while hi - lo > cfg.bracket_width {
        let mid = 0.5 * (lo + hi);
        let v = eval(mid)?;
        evaluations.push((mid, v));
        if v < cfg.eps_zero {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult {
        lower: lo,
        upper: hi,
        estimate: 0.5 * (lo + hi),
        evaluations,
    })
}
