//! Counting-field route to the transferred energy: integrates the Gaussian
//! parameters of the dressed characteristic function at finite η and
//! differentiates numerically in iη.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, StepperConfig};
use crate::quadrature;
use crate::spectral::{correlation_closed_form, dissipation_kernel, noise_kernel, SpectralParams};
use crate::weak::WeakCouplingRun;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Counting-field-shifted kernels at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedKernels {
    pub d1: Complex64,
    pub d2: Complex64,
    pub delta_d1: Complex64,
    pub delta_d2: Complex64,
}

/// D1^η(t) = Φ(t−η) + Φ(−t−η), D2^η(t) = i[Φ(t−η) − Φ(−t−η)] and their
/// differences from the unshifted kernels.
pub fn shifted_kernels(eta: f64, t: f64, p: &SpectralParams) -> Result<ShiftedKernels> {
    let a = correlation_closed_form(t - eta, p)?;
    let b = correlation_closed_form(-t - eta, p)?;
    let d1 = a + b;
    let d2 = I * (a - b);
    Ok(ShiftedKernels {
        d1,
        d2,
        delta_d1: d1 - noise_kernel(t, p)?,
        delta_d2: d2 - dissipation_kernel(t, p),
    })
}

/// g±(η,t) and V_{1,2}(η,t) tabulated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingCoefficients {
    pub eta: f64,
    pub t_grid: Vec<f64>,
    pub g_plus: Vec<Complex64>,
    pub g_minus: Vec<Complex64>,
    pub v1: Vec<Complex64>,
    pub v2: Vec<Complex64>,
}

// 5-point Gauss–Legendre on [-1, 1]
const GL5: [(f64, f64); 5] = [
    (
        -0.906179845938663992797626878299393,
        0.236926885056189087514264040719918,
    ),
    (
        -0.538469310105683091036314420700208,
        0.478628670499366468041291514835639,
    ),
    (0.0, 0.568888888888888888888888888888889),
    (0.538469310105683091036314420700208, 0.478628670499366468041291514835639),
    (0.906179845938663992797626878299393, 0.236926885056189087514264040719918),
];

/// g±(η,t) = ½∫₀ᵗ [ΔD1^η cos s ± ΔD2^η sin s] ds, V1 = ½(g₋ + g₊), V2 = ½(g₋ − g₊).
pub fn g_coefficients(eta: f64, p: &SpectralParams, t_grid: &[f64]) -> Result<CountingCoefficients> {
    quadrature::validate_grid(t_grid)?;
    let n = t_grid.len();
    let mut g_plus = Vec::with_capacity(n);
    let mut g_minus = Vec::with_capacity(n);
    let zero = Complex64::new(0.0, 0.0);
    g_plus.push(zero);
    g_minus.push(zero);
    let (mut acc_p, mut acc_m) = (zero, zero);
    if eta == 0.0 {
        g_plus.resize(n, zero);
        g_minus.resize(n, zero);
    } else {
        for w in t_grid.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            let (mut sp, mut sm) = (zero, zero);
            for (x, wt) in GL5 {
                let s = mid + half * x;
                let k = shifted_kernels(eta, s, p)?;
                let (sn, cs) = s.sin_cos();
                let c = k.delta_d1 * cs;
                let d = k.delta_d2 * sn;
                sp += (c + d) * wt;
                sm += (c - d) * wt;
            }
            acc_p += sp * (0.5 * half);
            acc_m += sm * (0.5 * half);
            g_plus.push(acc_p);
            g_minus.push(acc_m);
        }
    }
    let v1 = g_minus.iter().zip(&g_plus).map(|(m, p)| (m + p) * 0.5).collect();
    let v2 = g_minus.iter().zip(&g_plus).map(|(m, p)| (m - p) * 0.5).collect();
    Ok(CountingCoefficients {
        eta,
        t_grid: t_grid.to_vec(),
        g_plus,
        g_minus,
        v1,
        v2,
    })
}

/// ln Ψ(η,t) and σ(η,t) along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CgfTrajectory {
    pub eta: f64,
    pub t: Vec<f64>,
    pub log_psi: Vec<Complex64>,
    pub sigma: Vec<Complex64>,
    /// ∂_t ln Ψ = 2V₁σ + V₂ at the grid points.
    pub log_psi_rate: Vec<Complex64>,
}

struct ComplexSeries {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexSeries {
    fn new(v: &[Complex64]) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    fn at(&self, grid: &[f64], i: usize, t: f64) -> Complex64 {
        Complex64::new(
            quadrature::cubic_on_interval(grid, &self.re, i, t),
            quadrature::cubic_on_interval(grid, &self.im, i, t),
        )
    }
}

/// Integrates ∂_t ln Ψ = 2V₁σ + V₂ and ∂_tσ = ½(2Δ + V₁) + 2(V₂ − γ)σ + 2V₁σ²
/// from ln Ψ = 0, σ = σ(0,0).
pub fn cgf_trajectory(eta: f64, run: &WeakCouplingRun, cfg: StepperConfig) -> Result<CgfTrajectory> {
    if !eta.is_finite() || eta.abs() > 1e-2 {
        return Err(Error::InvalidParameter(format!(
            "counting field must satisfy |eta| <= 1e-2, got {eta}"
        )));
    }
    let k = &run.kernels;
    let grid = &k.t_grid;
    let coeffs = g_coefficients(eta, &k.params, grid)?;
    let v1 = ComplexSeries::new(&coeffs.v1);
    let v2 = ComplexSeries::new(&coeffs.v2);
    let rhs = |t: f64, y: &[Complex64; 2]| {
        let i = quadrature::locate(grid, t);
        let delta = quadrature::cubic_on_interval(grid, &k.delta, i, t);
        let gamma = quadrature::cubic_on_interval(grid, &k.gamma, i, t);
        let a = v1.at(grid, i, t);
        let b = v2.at(grid, i, t);
        let s = y[1];
        [
            a * s * 2.0 + b,
            (a + 2.0 * delta) * 0.5 + (b - gamma) * s * 2.0 + a * s * s * 2.0,
        ]
    };
    let start = [Complex64::new(0.0, 0.0), Complex64::new(run.sigma0, 0.0)];
    let states = ode::integrate(rhs, start, grid, cfg)?;
    let log_psi: Vec<Complex64> = states.iter().map(|y| y[0]).collect();
    let sigma: Vec<Complex64> = states.iter().map(|y| y[1]).collect();
    let log_psi_rate = (0..grid.len())
        .map(|i| coeffs.v1[i] * sigma[i] * 2.0 + coeffs.v2[i])
        .collect();
    Ok(CgfTrajectory {
        eta,
        t: grid.clone(),
        log_psi,
        sigma,
        log_psi_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcsConfig {
    pub delta_eta: f64,
    /// Combine δη and δη/2 stencils to cancel the O(δη²) error.
    pub richardson: bool,
    pub residue_threshold: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for FcsConfig {
    fn default() -> Self {
        Self {
            delta_eta: 1e-3,
            richardson: true,
            residue_threshold: 1e-8,
            abs_tol: 1e-10,
            rel_tol: 1e-9,
        }
    }
}

/// First moment of the transferred energy and its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FcsMoment {
    pub t: Vec<f64>,
    /// ⟨Δq⟩_t
    pub mean_transfer: Vec<f64>,
    /// θ(t)
    pub theta: Vec<f64>,
    /// Largest discarded imaginary part.
    pub residue: f64,
}

fn central_difference(run: &WeakCouplingRun, delta: f64, cfg: &FcsConfig) -> Result<FcsMoment> {
    let stepper = StepperConfig {
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol,
        ..StepperConfig::default()
    };
    let (plus, minus) = rayon::join(
        || cgf_trajectory(delta, run, stepper),
        || cgf_trajectory(-delta, run, stepper),
    );
    let (plus, minus) = (plus?, minus?);
    let mut residue: f64 = 0.0;
    // d/d(iη) = −i d/dη
    let mut stencil = |a: &[Complex64], b: &[Complex64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let v = -I * (x - y) / (2.0 * delta);
                residue = residue.max(v.im.abs());
                v.re
            })
            .collect()
    };
    let mean_transfer = stencil(&plus.log_psi, &minus.log_psi);
    let theta = stencil(&plus.log_psi_rate, &minus.log_psi_rate);
    Ok(FcsMoment {
        t: plus.t,
        mean_transfer,
        theta,
        residue,
    })
}

/// ⟨Δq⟩_t = −i[ln Ψ(δη,t) − ln Ψ(−δη,t)]/(2δη) and θ by the same stencil on
/// Ψ̇/Ψ, optionally Richardson-refined.
pub fn fcs_first_moment(run: &WeakCouplingRun, cfg: FcsConfig) -> Result<FcsMoment> {
    if !(1e-5..=1e-2).contains(&cfg.delta_eta) {
        return Err(Error::InvalidParameter(format!(
            "delta_eta must lie in [1e-5, 1e-2], got {}",
            cfg.delta_eta
        )));
    }
    let coarse = central_difference(run, cfg.delta_eta, &cfg)?;
    let out = if cfg.richardson {
        let fine = central_difference(run, 0.5 * cfg.delta_eta, &cfg)?;
        let extrapolate =
            |f: &[f64], c: &[f64]| -> Vec<f64> { f.iter().zip(c).map(|(f, c)| (4.0 * f - c) / 3.0).collect() };
        FcsMoment {
            mean_transfer: extrapolate(&fine.mean_transfer, &coarse.mean_transfer),
            theta: extrapolate(&fine.theta, &coarse.theta),
            residue: fine.residue.max(coarse.residue),
            t: coarse.t,
        }
    } else {
        coarse
    };
    if out.residue > cfg.residue_threshold {
        return Err(Error::ImaginaryResidue {
            residue: out.residue,
            threshold: cfg.residue_threshold,
        });
    }
    Ok(out)
}
