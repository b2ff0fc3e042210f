//! Single runs and sweeps.

use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{info, warn};
use qbm_core::backflow::{default_temperature_grid, tail_bound, BackflowOptions};
use qbm_core::exact::ExactRun;
use qbm_core::gip::{gip_trajectory, mts_state, sts_state, GipOptions};
use qbm_core::quadrature::uniform_grid;
use qbm_core::weak::WEAK_COUPLING_LIMIT;
use qbm_core::{
    backflow_measure, coefficient_table, fcs_first_moment, threshold_coupling, AnalyticEngine, BackflowResult,
    EnergyTrace, EngineTag, ExactEngine, FcsConfig, FcsEngine, FlowEngine, GipTrajectory, KernelTable, ThresholdResult,
    WeakCouplingRun,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Output, SimulationConfig, SweepParameter};
use crate::error::{CliError, CliResult};

/// Number of evenly spaced times at which the exact-engine uncertainty
/// relation is checked.
const UNCERTAINTY_SAMPLES: usize = 11;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub engine: Option<EngineTag>,
    /// Last time actually simulated by the primary engine.
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recurrence_time: Option<f64>,
    /// True when the exact-engine horizon was cut at half the recurrence time.
    pub horizon_cut: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
    pub tail_exceeded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub markov_drift: Option<f64>,
    /// Smallest eigenvalue of σ + (i/2)Ω seen along the primary trajectory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fcs_residue: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub config: SimulationConfig,
    /// Primary engine first, then the comparison engines.
    pub traces: Vec<EnergyTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backflow: Option<BackflowResult>,
    pub gip: Vec<GipTrajectory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdResult>,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ResultBundle {
    pub fn primary(&self) -> Option<&EnergyTrace> {
        self.traces.first()
    }
}

fn numeric(cfg: &SimulationConfig, what: &str) -> impl Fn(qbm_core::Error) -> CliError {
    let ctx = format!(
        "{what} (engine {}, lambda {}, omega_c {}, temp_env {}, temp_sys {})",
        cfg.engine,
        cfg.spectral.lambda,
        cfg.spectral.omega_c,
        cfg.spectral.temp_env,
        cfg.temp_sys()
    );
    move |e| CliError::numeric(ctx.clone(), e)
}

struct Context {
    grid: Vec<f64>,
    kernels: Option<Arc<KernelTable>>,
}

impl Context {
    fn kernels(&mut self, cfg: &SimulationConfig) -> CliResult<Arc<KernelTable>> {
        if let Some(k) = &self.kernels {
            return Ok(k.clone());
        }
        let k = Arc::new(coefficient_table(&cfg.spectral, &self.grid).map_err(numeric(cfg, "coefficient table"))?);
        self.kernels = Some(k.clone());
        Ok(k)
    }
}

fn engine_trace(
    cfg: &SimulationConfig,
    tag: EngineTag,
    ctx: &mut Context,
    diag: &mut Diagnostics,
    primary: bool,
) -> CliResult<EnergyTrace> {
    let temp_sys = cfg.temp_sys();
    match tag {
        EngineTag::Analytic => {
            let run = WeakCouplingRun::new(ctx.kernels(cfg)?, temp_sys).map_err(numeric(cfg, "weak-coupling run"))?;
            if primary {
                let margin = run
                    .covariance_trajectory()
                    .iter()
                    .fold(f64::INFINITY, |m, s| m.min(s - 0.5));
                diag.uncertainty_margin = Some(margin);
                if let Ok(m) = run.markov_limit() {
                    diag.markov_drift = Some(m.drift);
                }
            }
            Ok(run.trace())
        }
        EngineTag::FcsCheck => {
            let run = WeakCouplingRun::new(ctx.kernels(cfg)?, temp_sys).map_err(numeric(cfg, "weak-coupling run"))?;
            let m = fcs_first_moment(&run, FcsConfig::default()).map_err(numeric(cfg, "counting-field moment"))?;
            if primary {
                diag.fcs_residue = Some(m.residue);
            }
            let (system, _) = run.system_energy();
            let interaction = system.iter().zip(&m.mean_transfer).map(|(s, q)| -(s + q)).collect();
            Ok(EnergyTrace {
                t: m.t,
                theta: m.theta,
                system,
                environment: m.mean_transfer,
                interaction,
                engine: EngineTag::FcsCheck,
                params: cfg.spectral,
                temp_sys,
            })
        }
        EngineTag::Exact => {
            let engine = ExactEngine::new(&cfg.spectral, cfg.n_modes, cfg.omega_max, &ctx.grid)
                .map_err(numeric(cfg, "exact engine"))?;
            let run = ExactRun::new(&cfg.spectral, temp_sys, cfg.n_modes, engine.omega_max)
                .map_err(numeric(cfg, "exact engine"))?;
            let times = &engine.t_grid;
            if primary {
                diag.recurrence_time = Some(run.recurrence_time());
                diag.horizon_cut = times.len() < ctx.grid.len();
                let n = times.len();
                let margin = (0..UNCERTAINTY_SAMPLES)
                    .into_par_iter()
                    .map(|k| {
                        run.covariance_at(times[k * (n - 1) / (UNCERTAINTY_SAMPLES - 1)])
                            .uncertainty_margin()
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                diag.uncertainty_margin = Some(margin);
            }
            if cfg.wants(Output::Energies) || cfg.wants(Output::Phi) {
                Ok(run.trace(times))
            } else {
                // energy columns are left empty when only θ was requested
                Ok(EnergyTrace {
                    t: times.clone(),
                    theta: run.energy_flow(times),
                    system: Vec::new(),
                    environment: Vec::new(),
                    interaction: Vec::new(),
                    engine: EngineTag::Exact,
                    params: cfg.spectral,
                    temp_sys,
                })
            }
        }
    }
}

/// Second-order finite differences of a sampled series.
fn derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            (y[b] - y[a]) / (t[b] - t[a])
        })
        .collect()
}

fn flow_engine(cfg: &SimulationConfig, ctx: &mut Context) -> CliResult<Box<dyn FlowEngine>> {
    Ok(match cfg.engine {
        EngineTag::Analytic => Box::new(AnalyticEngine {
            kernels: ctx.kernels(cfg)?,
        }),
        EngineTag::FcsCheck => Box::new(FcsEngine {
            kernels: ctx.kernels(cfg)?,
            config: FcsConfig::default(),
        }),
        EngineTag::Exact => Box::new(
            ExactEngine::new(&cfg.spectral, cfg.n_modes, cfg.omega_max, &ctx.grid)
                .map_err(numeric(cfg, "exact engine"))?,
        ),
    })
}

/// Runs every requested output for one configuration.
pub fn run(cfg: &SimulationConfig) -> CliResult<ResultBundle> {
    cfg.validate()?;
    if cfg.sweep.is_some() {
        return Err(CliError::Config("configuration has a sweep axis; use sweep".into()));
    }
    let start = Instant::now();
    let grid = uniform_grid(cfg.t_max, cfg.t_step).map_err(numeric(cfg, "time grid"))?;
    let mut ctx = Context { grid, kernels: None };
    let mut diag = Diagnostics {
        engine: Some(cfg.engine),
        ..Default::default()
    };
    if cfg.spectral.lambda > WEAK_COUPLING_LIMIT && cfg.engine != EngineTag::Exact {
        diag.warnings.push(format!(
            "lambda = {} is outside the weak-coupling regime (> {WEAK_COUPLING_LIMIT})",
            cfg.spectral.lambda
        ));
    }

    let mut traces = Vec::new();
    let needs_trace = cfg.wants(Output::Theta) || cfg.wants(Output::Energies) || cfg.wants(Output::Phi);
    if needs_trace {
        traces.push(engine_trace(cfg, cfg.engine, &mut ctx, &mut diag, true)?);
        for &tag in cfg.compare.iter().filter(|t| **t != cfg.engine) {
            traces.push(engine_trace(cfg, tag, &mut ctx, &mut diag, false)?);
        }
        diag.horizon = *traces[0].t.last().unwrap_or(&0.0);
    } else {
        diag.horizon = cfg.t_max;
    }

    let phi = if cfg.wants(Output::Phi) {
        let tr = &traces[0];
        Some(if cfg.engine == EngineTag::Exact {
            derivative(&tr.t, &tr.system)
        } else {
            let run =
                WeakCouplingRun::new(ctx.kernels(cfg)?, cfg.temp_sys()).map_err(numeric(cfg, "weak-coupling run"))?;
            run.system_energy().1
        })
    } else {
        None
    };

    let backflow = if cfg.wants(Output::Backflow) {
        let engine = flow_engine(cfg, &mut ctx)?;
        let temps = cfg
            .backflow
            .temps
            .clone()
            .unwrap_or_else(|| default_temperature_grid(cfg.spectral.temp_env));
        let opts = BackflowOptions {
            policy: cfg.backflow.policy,
            tail_tolerance: cfg.backflow.tail_tolerance,
        };
        let res = backflow_measure(engine.as_ref(), &temps, opts).map_err(numeric(cfg, "backflow measure"))?;
        if res.tail_exceeded {
            diag.warnings.push(format!(
                "flow tail {:.3e} above tolerance {:.1e} at the horizon",
                res.tail_bound, cfg.backflow.tail_tolerance
            ));
        }
        diag.tail_bound = Some(res.tail_bound);
        diag.tail_exceeded = res.tail_exceeded;
        if !needs_trace {
            diag.horizon = res.truncation_time;
        }
        Some(res)
    } else {
        if let Some(tr) = traces.first() {
            let series = qbm_core::FlowSeries {
                t_grid: tr.t.clone(),
                theta: tr.theta.clone(),
                engine: tr.engine,
                params: tr.params,
                temp_sys: tr.temp_sys,
            };
            diag.tail_bound = Some(tail_bound(&series));
        }
        None
    };

    let gip = if cfg.wants(Output::Gip) {
        let kernels = ctx.kernels(cfg)?;
        let opts = GipOptions {
            side: cfg.gip.side,
            ..Default::default()
        };
        let states = [
            mts_state(cfg.gip.nu, cfg.gip.r_mts).map_err(numeric(cfg, "MTS state"))?,
            sts_state(cfg.gip.nu, cfg.gip.r_sts).map_err(numeric(cfg, "STS state"))?,
        ];
        states
            .iter()
            .map(|s| gip_trajectory(s, kernels.as_ref(), cfg.gip.stride, &opts).map_err(numeric(cfg, "GIP trajectory")))
            .collect::<CliResult<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let threshold = if cfg.wants(Output::Threshold) {
        Some(
            threshold_coupling(cfg.spectral.omega_c, cfg.spectral.temp_env, &cfg.threshold_config())
                .map_err(numeric(cfg, "threshold search"))?,
        )
    } else {
        None
    };

    for w in &diag.warnings {
        warn!("{w}");
    }
    let wall_time = start.elapsed();
    info!("run finished in {:.3} s", wall_time.as_secs_f64());
    Ok(ResultBundle {
        config: cfg.clone(),
        traces,
        phi,
        backflow,
        gip,
        threshold,
        diagnostics: diag,
        wall_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<ResultBundle, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config: SimulationConfig,
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// One run per axis value, in parallel, merged in axis order. Failed rows are
/// recorded and do not stop the sweep.
pub fn sweep(cfg: &SimulationConfig) -> CliResult<SweepTable> {
    cfg.validate()?;
    let axis = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep requires a [sweep] axis".into()))?;
    let rows: Vec<SweepRow> = axis
        .values
        .par_iter()
        .map(|&value| {
            let outcome = cfg
                .with_axis_value(axis.parameter, value)
                .and_then(|c| run(&c))
                .map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                warn!("{} = {value}: {e}", axis.parameter.as_str());
            }
            SweepRow { value, outcome }
        })
        .collect();
    Ok(SweepTable {
        config: cfg.clone(),
        parameter: axis.parameter,
        rows,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(pool.install(f))
}
