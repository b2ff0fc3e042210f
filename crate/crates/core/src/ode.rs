//! Adaptive Dormand–Prince 5(4) integration of small complex systems,
//! reporting the state on a prescribed output grid.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Stepper tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            min_step: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[Complex64; N], terms: &[(f64, &[Complex64; N])], h: f64) -> [Complex64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += k[i] * (h * c);
        }
    }
    out
}

/// Integrates `dy/dt = f(t, y)` from `grid[0]` and returns the state at every
/// grid point. Steps never cross an output point, so no dense output is needed.
pub fn integrate<const N: usize, F>(
    f: F,
    y0: [Complex64; N],
    grid: &[f64],
    cfg: StepperConfig,
) -> Result<Vec<[Complex64; N]>>
where
    F: Fn(f64, &[Complex64; N]) -> [Complex64; N],
{
    let mut out = Vec::with_capacity(grid.len());
    if grid.is_empty() {
        return Ok(out);
    }
    out.push(y0);
    let mut y = y0;
    let mut t = grid[0];
    let mut k1 = f(t, &y);
    let mut h = grid.get(1).map_or(1.0, |g| g - grid[0]);
    let mut steps = 0usize;

    for &target in &grid[1..] {
        while t < target {
            if steps >= cfg.max_steps {
                return Err(Error::Stepper {
                    t,
                    reason: format!("exceeded {} steps", cfg.max_steps),
                });
            }
            steps += 1;
            let remaining = target - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };

            let k2 = f(t + C2 * hs, &axpy(&y, &[(A21, &k1)], hs));
            let k3 = f(t + C3 * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs));
            let k4 = f(t + C4 * hs, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs));
            let k5 = f(
                t + C5 * hs,
                &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs),
            );
            let k6 = f(
                t + hs,
                &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs),
            );
            let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], hs);
            let k7 = f(t + hs, &y_new);

            let mut err_sq = 0.0;
            for i in 0..N {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs;
                let scale = cfg.abs_tol + cfg.rel_tol * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / scale).powi(2);
            }
            let err = (err_sq / N as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Stepper {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y = y_new;
                k1 = k7;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // a step shortened to hit the grid says little about the natural step size
            if !(last && err <= 1.0) || factor < 1.0 {
                h = hs * factor;
            }
            if h < cfg.min_step {
                return Err(Error::Stepper {
                    t,
                    reason: format!("step size {h:e} below minimum"),
                });
            }
        }
        out.push(y);
    }
    Ok(out)
}
