//! Fixtures shared by the benchmarks.

use qbm_core::quadrature::uniform_grid;
use qbm_core::SpectralParams;

pub fn weak_params() -> SpectralParams {
    SpectralParams::new(0.01, 0.25, 1.0).expect("valid parameters")
}

pub fn grid(t_max: f64) -> Vec<f64> {
    uniform_grid(t_max, 0.01).expect("valid grid")
}
