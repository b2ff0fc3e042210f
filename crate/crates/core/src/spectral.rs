//! Ohmic bath with exponential cut-off: spectral density, correlation
//! function, noise and dissipation kernels, master-equation coefficients and
//! the finite-mode discretisation used by the exact engine.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::special::trigamma;

/// Bath parameters in units of the system frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    /// Coupling strength λ.
    pub lambda: f64,
    /// Exponential cut-off Ω.
    pub omega_c: f64,
    /// Bath temperature T_E.
    pub temp_env: f64,
}

impl SpectralParams {
    pub fn new(lambda: f64, omega_c: f64, temp_env: f64) -> Result<Self> {
        let p = Self {
            lambda,
            omega_c,
            temp_env,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.omega_c > 0.0) || !self.omega_c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "omega_c must be > 0, got {}",
                self.omega_c
            )));
        }
        if !(self.temp_env >= 0.0) || !self.temp_env.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "temp_env must be >= 0, got {}",
                self.temp_env
            )));
        }
        Ok(())
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }
}

/// J(ω) = λω e^{−ω/Ω}.
pub fn spectral_density(omega: f64, p: &SpectralParams) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!("spectral density needs omega >= 0, got {omega}")));
    }
    Ok(p.lambda * omega * (-omega / p.omega_c).exp())
}

/// coth(ω/2T), with the zero-temperature value 1.
pub fn thermal_factor(omega: f64, temp: f64) -> f64 {
    if temp == 0.0 {
        1.0
    } else {
        1.0 / (omega / (2.0 * temp)).tanh()
    }
}

/// ω·coth(ω/2T), finite at ω = 0.
fn omega_coth(omega: f64, temp: f64) -> f64 {
    if temp == 0.0 {
        return omega;
    }
    let x = omega / (2.0 * temp);
    if x < 1e-4 {
        2.0 * temp * (1.0 + x * x / 3.0)
    } else {
        omega / x.tanh()
    }
}

/// Thermal occupation 1/(e^{ω/T} − 1).
pub fn bose_occupation(omega: f64, temp: f64) -> f64 {
    if temp == 0.0 {
        0.0
    } else {
        1.0 / (omega / temp).exp_m1()
    }
}

/// Upper frequency at which the bath integrals are truncated; e^{-60} is far
/// below double precision relative to the integrals' scale.
fn frequency_cutoff(p: &SpectralParams) -> f64 {
    60.0 * p.omega_c
}

/// Environment correlation function
/// Φ(t) = ∫₀^∞ J(ω)[coth(ω/2T_E) cos ωt − i sin ωt] dω, by adaptive quadrature.
pub fn correlation_function(t: f64, p: &SpectralParams) -> Result<Complex64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("correlation function at non-finite t = {t}")));
    }
    let upper = frequency_cutoff(p);
    let tol = Tolerance {
        abs: 1e-16,
        rel: 1e-11,
        max_subdivisions: 2000,
    };
    let lambda = p.lambda;
    let wc = p.omega_c;
    let temp = p.temp_env;
    let re = quadrature::integrate_oscillatory(
        |w| lambda * (-w / wc).exp() * omega_coth(w, temp) * (w * t).cos(),
        upper,
        t,
        tol,
    )?;
    let im = quadrature::integrate_oscillatory(|w| lambda * w * (-w / wc).exp() * (w * t).sin(), upper, t, tol)?;
    Ok(Complex64::new(re.value, -im.value))
}

/// Noise kernel D1(t) = Φ(t) + Φ(−t) in closed form.
pub fn noise_kernel(t: f64, p: &SpectralParams) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("noise kernel at non-finite t = {t}")));
    }
    let wc = p.omega_c;
    let x = wc * t;
    let q = 1.0 + x * x;
    let vacuum = wc * wc * (1.0 - x * x) / (q * q);
    if p.temp_env == 0.0 {
        return Ok(2.0 * p.lambda * vacuum);
    }
    let temp = p.temp_env;
    let z = Complex64::new(1.0 + temp / wc, -temp * x / wc);
    let psi1 = trigamma(z)?;
    Ok(2.0 * p.lambda * (vacuum + 2.0 * temp * temp * psi1.re))
}

/// Dissipation kernel D2(t) = i[Φ(t) − Φ(−t)] = 4λΩ³t/(1 + Ω²t²)².
pub fn dissipation_kernel(t: f64, p: &SpectralParams) -> f64 {
    let x = p.omega_c * t;
    let q = 1.0 + x * x;
    4.0 * p.lambda * p.omega_c.powi(3) * t / (q * q)
}

/// dD2/dt = 4λΩ³(1 − 3Ω²t²)/(1 + Ω²t²)³.
pub fn dissipation_kernel_derivative(t: f64, p: &SpectralParams) -> f64 {
    let x = p.omega_c * t;
    let q = 1.0 + x * x;
    4.0 * p.lambda * p.omega_c.powi(3) * (1.0 - 3.0 * x * x) / (q * q * q)
}

/// Φ(t) = ½D1(|t|) − (i/2)D2(t) via the closed-form kernels; valid for any real t.
pub fn correlation_closed_form(t: f64, p: &SpectralParams) -> Result<Complex64> {
    Ok(Complex64::new(
        0.5 * noise_kernel(t.abs(), p)?,
        -0.5 * dissipation_kernel(t, p),
    ))
}

/// Time-dependent coefficients of the weak-coupling master equation.
pub trait MasterRates {
    fn times(&self) -> &[f64];
    /// Diffusion Δ(t).
    fn delta(&self) -> &[f64];
    /// Damping γ(t).
    fn gamma(&self) -> &[f64];
    /// Γ(t) = ∫₀ᵗ γ.
    fn big_gamma(&self) -> &[f64];

    /// n(t) = e^{−2Γ(t)} ∫₀ᵗ Δ(s) e^{2Γ(s)} ds, the noise added to a single
    /// mode by time t.
    fn added_noise(&self) -> Vec<f64> {
        let weighted: Vec<f64> = self
            .delta()
            .iter()
            .zip(self.big_gamma())
            .map(|(d, g)| d * (2.0 * g).exp())
            .collect();
        let acc = quadrature::cumulative_sampled(self.times(), &weighted);
        acc.iter()
            .zip(self.big_gamma())
            .map(|(a, g)| a * (-2.0 * g).exp())
            .collect()
    }

    /// Index of the grid point equal to `t` (within rounding), or a range error.
    fn index_of(&self, t: f64) -> Result<usize> {
        let times = self.times();
        let last = *times.last().unwrap_or(&0.0);
        if !(t >= 0.0) || t > last * (1.0 + 1e-12) {
            return Err(Error::Range {
                requested: t,
                available: last,
            });
        }
        let i = quadrature::locate(times, t);
        let j = if (times[i + 1] - t).abs() < (t - times[i]).abs() {
            i + 1
        } else {
            i
        };
        let h = times[i + 1] - times[i];
        if (times[j] - t).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::Grid(format!("t = {t} is not a grid point")));
        }
        Ok(j)
    }
}

/// Kernels and master-equation coefficients tabulated on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub t_grid: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub big_gamma: Vec<f64>,
    pub params: SpectralParams,
}

impl MasterRates for KernelTable {
    fn times(&self) -> &[f64] {
        &self.t_grid
    }
    fn delta(&self) -> &[f64] {
        &self.delta
    }
    fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    fn big_gamma(&self) -> &[f64] {
        &self.big_gamma
    }
}

impl KernelTable {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.t_grid.last().unwrap_or(&0.0)
    }

    /// Copy restricted to the first `n` grid points.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n < 4 || n > self.len() {
            return Err(Error::Grid(format!(
                "cannot truncate table of {} points to {n}",
                self.len()
            )));
        }
        Ok(Self {
            t_grid: self.t_grid[..n].to_vec(),
            d1: self.d1[..n].to_vec(),
            d2: self.d2[..n].to_vec(),
            delta: self.delta[..n].to_vec(),
            gamma: self.gamma[..n].to_vec(),
            big_gamma: self.big_gamma[..n].to_vec(),
            params: self.params,
        })
    }
}

/// Tabulates D1, D2, Δ(t) = ½∫₀ᵗ D1 cos s, γ(t) = ½∫₀ᵗ D2 sin s and Γ = ∫γ.
pub fn coefficient_table(p: &SpectralParams, t_grid: &[f64]) -> Result<KernelTable> {
    p.validate()?;
    quadrature::validate_grid(t_grid)?;
    let d1 = t_grid.iter().map(|&t| noise_kernel(t, p)).collect::<Result<Vec<_>>>()?;
    let d2: Vec<f64> = t_grid.iter().map(|&t| dissipation_kernel(t, p)).collect();
    let delta: Vec<f64> = quadrature::try_cumulative_closed_form(|s| Ok(0.5 * noise_kernel(s, p)? * s.cos()), t_grid)?;
    let gamma = quadrature::cumulative_closed_form(|s| 0.5 * dissipation_kernel(s, p) * s.sin(), t_grid);
    let big_gamma = quadrature::cumulative_sampled(t_grid, &gamma);
    Ok(KernelTable {
        t_grid: t_grid.to_vec(),
        d1,
        d2,
        delta,
        gamma,
        big_gamma,
        params: *p,
    })
}

/// Asymptotic rates γ∞ = (π/2)J(ω0) and Δ∞ = γ∞ coth(ω0/2T_E).
pub fn asymptotic_rates(p: &SpectralParams) -> (f64, f64) {
    let gamma_inf = 0.5 * PI * p.lambda * (-1.0 / p.omega_c).exp();
    (gamma_inf * thermal_factor(1.0, p.temp_env), gamma_inf)
}

/// Constant-coefficient (Born–Markov semigroup) rates on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupRates {
    t_grid: Vec<f64>,
    delta: Vec<f64>,
    gamma: Vec<f64>,
    big_gamma: Vec<f64>,
    pub delta_inf: f64,
    pub gamma_inf: f64,
}

impl SemigroupRates {
    pub fn new(delta_inf: f64, gamma_inf: f64, t_grid: &[f64]) -> Result<Self> {
        quadrature::validate_grid(t_grid)?;
        Ok(Self {
            t_grid: t_grid.to_vec(),
            delta: vec![delta_inf; t_grid.len()],
            gamma: vec![gamma_inf; t_grid.len()],
            big_gamma: t_grid.iter().map(|t| gamma_inf * t).collect(),
            delta_inf,
            gamma_inf,
        })
    }

    pub fn from_params(p: &SpectralParams, t_grid: &[f64]) -> Result<Self> {
        let (d, g) = asymptotic_rates(p);
        Self::new(d, g, t_grid)
    }
}

impl MasterRates for SemigroupRates {
    fn times(&self) -> &[f64] {
        &self.t_grid
    }
    fn delta(&self) -> &[f64] {
        &self.delta
    }
    fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    fn big_gamma(&self) -> &[f64] {
        &self.big_gamma
    }
    fn added_noise(&self) -> Vec<f64> {
        self.t_grid
            .iter()
            .map(|t| {
                if self.gamma_inf == 0.0 {
                    self.delta_inf * t
                } else {
                    self.delta_inf / (2.0 * self.gamma_inf) * -(-2.0 * self.gamma_inf * t).exp_m1()
                }
            })
            .collect()
    }
}

/// Discretised bath: ω_i = iΔω, g_i = √(2ω_iΔω J(ω_i)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathModes {
    pub freqs: Vec<f64>,
    pub couplings: Vec<f64>,
    pub spacings: Vec<f64>,
    pub params: SpectralParams,
}

impl BathModes {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Σ g_i²/(2ω_i), the discrete counterpart of ∫J dω.
    pub fn sum_rule(&self) -> f64 {
        self.couplings
            .iter()
            .zip(&self.freqs)
            .map(|(g, w)| g * g / (2.0 * w))
            .sum()
    }
}

/// Default discretisation band max(8, 8Ω).
pub fn default_omega_max(p: &SpectralParams) -> f64 {
    8f64.max(8.0 * p.omega_c)
}

pub fn discretize_bath(p: &SpectralParams, n_modes: usize, omega_max: f64) -> Result<BathModes> {
    p.validate()?;
    if n_modes < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 bath modes, got {n_modes}"
        )));
    }
    if !(omega_max > 0.0) || !omega_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "omega_max must be > 0, got {omega_max}"
        )));
    }
    let dw = omega_max / n_modes as f64;
    let freqs: Vec<f64> = (1..=n_modes).map(|i| i as f64 * dw).collect();
    let couplings = freqs
        .iter()
        .map(|&w| Ok((2.0 * w * dw * spectral_density(w, p)?).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    Ok(BathModes {
        freqs,
        couplings,
        spacings: vec![dw; n_modes],
        params: *p,
    })
}
