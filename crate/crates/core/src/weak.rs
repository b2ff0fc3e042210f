//! Weak-coupling engine: closed-form covariance of the secular master
//! equation and the first moment of the transferred energy.

use log::warn;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::spectral::{
    asymptotic_rates, dissipation_kernel_derivative, noise_kernel, thermal_factor, KernelTable, MasterRates,
};
use crate::trace::{EnergyTrace, EngineTag};

/// Couplings above this are outside the weak-coupling regime.
pub const WEAK_COUPLING_LIMIT: f64 = 0.1;

/// Single-mode thermal variance ½coth(ω0/2T) = ½(1 + 2N(T)).
pub fn thermal_variance(temp: f64) -> f64 {
    0.5 * thermal_factor(1.0, temp)
}

/// A weak-coupling run: shared coefficient table plus the initial system temperature.
#[derive(Debug, Clone)]
pub struct WeakCouplingRun {
    pub kernels: Arc<KernelTable>,
    pub temp_sys: f64,
    pub sigma0: f64,
}

impl WeakCouplingRun {
    pub fn new(kernels: Arc<KernelTable>, temp_sys: f64) -> Result<Self> {
        if !(temp_sys >= 0.0) || !temp_sys.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "temp_sys must be >= 0, got {temp_sys}"
            )));
        }
        if kernels.params.lambda > WEAK_COUPLING_LIMIT {
            warn!(
                "lambda = {} exceeds the weak-coupling range (<= {WEAK_COUPLING_LIMIT})",
                kernels.params.lambda
            );
        }
        Ok(Self {
            kernels,
            temp_sys,
            sigma0: thermal_variance(temp_sys),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.kernels.t_grid
    }

    /// σ(0,t) = e^{−2Γ}(σ(0,0) + ∫₀ᵗ Δ e^{2Γ}).
    pub fn covariance_trajectory(&self) -> Vec<f64> {
        let k = &self.kernels;
        k.added_noise()
            .iter()
            .zip(&k.big_gamma)
            .map(|(n, g)| self.sigma0 * (-2.0 * g).exp() + n)
            .collect()
    }

    /// σ(0,t) at a single grid time.
    pub fn covariance_at(&self, t: f64) -> Result<f64> {
        let i = self.kernels.index_of(t)?;
        Ok(self.covariance_trajectory()[i])
    }

    /// θ(t) = 2σ(½D2 cos t + γ) + ½D1 sin t − Δ.
    pub fn energy_flow(&self) -> Vec<f64> {
        self.energy_flow_from(&self.covariance_trajectory())
    }

    fn energy_flow_from(&self, sigma: &[f64]) -> Vec<f64> {
        let k = &self.kernels;
        (0..k.len())
            .map(|i| {
                let t = k.t_grid[i];
                let (s, c) = t.sin_cos();
                2.0 * sigma[i] * (0.5 * k.d2[i] * c + k.gamma[i]) + 0.5 * k.d1[i] * s - k.delta[i]
            })
            .collect()
    }

    /// ⟨ΔE_S⟩ = σ(0,t) − σ(0,0) and its rate φ = Δ − 2γσ.
    pub fn system_energy(&self) -> (Vec<f64>, Vec<f64>) {
        let sigma = self.covariance_trajectory();
        let k = &self.kernels;
        let change = sigma.iter().map(|s| s - self.sigma0).collect();
        let rate = (0..k.len()).map(|i| k.delta[i] - 2.0 * k.gamma[i] * sigma[i]).collect();
        (change, rate)
    }

    /// ⟨Δq⟩ = ∫₀ᵗ θ.
    pub fn environment_energy(&self) -> Vec<f64> {
        quadrature::cumulative_sampled(self.times(), &self.energy_flow())
    }

    /// Full energy bookkeeping. The interaction energy closes the balance,
    /// which holds to first order in λ.
    pub fn trace(&self) -> EnergyTrace {
        let sigma = self.covariance_trajectory();
        let theta = self.energy_flow_from(&sigma);
        let environment = quadrature::cumulative_sampled(self.times(), &theta);
        let system: Vec<f64> = sigma.iter().map(|s| s - self.sigma0).collect();
        let interaction = system.iter().zip(&environment).map(|(s, q)| -(s + q)).collect();
        EnergyTrace {
            t: self.times().to_vec(),
            theta,
            system,
            environment,
            interaction,
            engine: EngineTag::Analytic,
            params: self.kernels.params,
            temp_sys: self.temp_sys,
        }
    }

    /// Long-time rates and the constant-coefficient flow, using the default
    /// stabilisation tolerance.
    pub fn markov_limit(&self) -> Result<MarkovLimit> {
        self.markov_limit_with(MarkovTolerance::default())
    }

    pub fn markov_limit_with(&self, tol: MarkovTolerance) -> Result<MarkovLimit> {
        let k = &self.kernels;
        let n = k.len();
        let t_end = k.horizon();
        let j = quadrature::locate(&k.t_grid, 0.8 * t_end);
        // Boundary terms of the remaining oscillatory integrals, from two
        // integrations by parts.
        let est = |i: usize| -> Result<(f64, f64)> {
            let t = k.t_grid[i];
            let (s, c) = t.sin_cos();
            let h = 1e-3;
            let d1_prime = (noise_kernel(t + h, &k.params)? - noise_kernel(t - h, &k.params)?) / (2.0 * h);
            let d2_prime = dissipation_kernel_derivative(t, &k.params);
            Ok((
                k.delta[i] - 0.5 * (k.d1[i] * s + d1_prime * c),
                k.gamma[i] + 0.5 * (k.d2[i] * c - d2_prime * s),
            ))
        };
        let (d_end, g_end) = est(n - 1)?;
        let (d_mid, g_mid) = est(j)?;
        let drift = (d_end - d_mid).abs().max((g_end - g_mid).abs());
        let allowed = tol.abs + tol.rel * d_end.abs().max(g_end.abs());
        if drift > allowed {
            return Err(Error::Convergence(format!(
                "rates drift by {drift:e} between t = {} and t = {t_end} (allowed {allowed:e})",
                k.t_grid[j]
            )));
        }
        let (delta_ref, gamma_ref) = asymptotic_rates(&k.params);
        let semigroup_theta = k
            .t_grid
            .iter()
            .map(|t| semigroup_flow(self.sigma0, delta_ref, gamma_ref, *t))
            .collect();
        Ok(MarkovLimit {
            delta_inf: d_end,
            gamma_inf: g_end,
            delta_reference: delta_ref,
            gamma_reference: gamma_ref,
            drift,
            semigroup_theta,
        })
    }
}

/// θ(t) = (2γσ(0) − Δ)e^{−2γt} for constant rates.
pub fn semigroup_flow(sigma0: f64, delta: f64, gamma: f64, t: f64) -> f64 {
    (2.0 * gamma * sigma0 - delta) * (-2.0 * gamma * t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for MarkovTolerance {
    fn default() -> Self {
        Self { abs: 1e-6, rel: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovLimit {
    /// Δ(t→∞) estimated from the table.
    pub delta_inf: f64,
    /// γ(t→∞) estimated from the table.
    pub gamma_inf: f64,
    /// (π/2)J(ω0)coth(ω0/2T_E).
    pub delta_reference: f64,
    /// (π/2)J(ω0).
    pub gamma_reference: f64,
    /// Change of the estimates over the last fifth of the table.
    pub drift: f64,
    /// Flow under the constant reference rates.
    pub semigroup_theta: Vec<f64>,
}
