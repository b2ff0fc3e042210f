//! Energy exchange statistics for quantum Brownian motion.

pub mod backflow;
pub mod error;
pub mod exact;
pub mod fcs;
pub mod gip;
pub mod ode;
pub mod quadrature;
pub mod special;
pub mod spectral;
pub mod trace;
pub mod weak;

pub use backflow::{
    backflow_measure, threshold_coupling, AnalyticEngine, BackflowOptions, BackflowResult, ExactEngine, FcsEngine,
    FlowEngine, FlowSeries, TailPolicy, ThresholdConfig, ThresholdResult,
};
pub use error::{Error, Result};
pub use exact::ExactRun;
pub use fcs::{fcs_first_moment, FcsConfig, FcsMoment};
pub use gip::{gip, gip_trajectory, GaussianChannel, GipOptions, GipTrajectory, PhaseSide, StateFamily, TwoModeState};
pub use spectral::{coefficient_table, KernelTable, MasterRates, SemigroupRates, SpectralParams};
pub use trace::{EnergyTrace, EngineTag};
pub use weak::WeakCouplingRun;
