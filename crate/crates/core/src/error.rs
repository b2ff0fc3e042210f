use thiserror::Error;

/// Errors raised by the simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("time {requested} outside table range [0, {available}]")]
    Range { requested: f64, available: f64 },

    #[error(
        "quadrature did not converge on [{a}, {b}]: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions"
    )]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("trigamma undefined at pole z = {re} + {im}i")]
    TrigammaPole { re: f64, im: f64 },

    #[error("ODE stepper failed at t = {t}: {reason}")]
    Stepper { t: f64, reason: String },

    #[error("counting-field moment has imaginary residue {residue:e} (threshold {threshold:e})")]
    ImaginaryResidue { residue: f64, threshold: f64 },

    #[error(
        "star Hamiltonian unstable (min eigenvalue {min_eigenvalue:e}) at lambda = {lambda}, omega_c = {omega_c}, n_modes = {n_modes}; reduce lambda or refine the discretization"
    )]
    Instability {
        lambda: f64,
        omega_c: f64,
        n_modes: usize,
        min_eigenvalue: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("coefficients not stabilized: {0}")]
    Convergence(String),

    #[error(
        "backflow tail not converged: negative flow {tail:e} near horizon {horizon} exceeds {tolerance:e}; try a horizon of {suggested_horizon}"
    )]
    Truncation {
        tail: f64,
        tolerance: f64,
        horizon: f64,
        suggested_horizon: f64,
    },

    #[error("no sign change of backflow in [{lo}, {hi}] (values {value_lo:e}, {value_hi:e})")]
    Bracket {
        lo: f64,
        hi: f64,
        value_lo: f64,
        value_hi: f64,
    },

    #[error("Fock truncation not converged: symplectic eigenvalue {nu} needs cutoff above {max_cutoff}")]
    FockCutoff { nu: f64, max_cutoff: usize },

    #[error("invalid Gaussian state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, Error>;
