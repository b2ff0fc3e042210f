//! Exact dynamics of the system oscillator coupled to a finite bath, through
//! the normal modes of the quadratic star Hamiltonian.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{discretize_bath, thermal_factor, BathModes, SpectralParams};
use crate::trace::{EnergyTrace, EngineTag};

/// H = ½ Σ P_k² + Xᵀ M X with the system as the last coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct StarHamiltonian {
    pub m_matrix: DMatrix<f64>,
    pub modes: BathModes,
    pub omega_sys: f64,
}

impl StarHamiltonian {
    /// Number of oscillators including the system.
    pub fn dim(&self) -> usize {
        self.modes.len() + 1
    }

    pub fn system_index(&self) -> usize {
        self.modes.len()
    }
}

pub fn assemble(modes: &BathModes, omega_sys: f64) -> StarHamiltonian {
    let n = modes.len();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for (i, (w, g)) in modes.freqs.iter().zip(&modes.couplings).enumerate() {
        m[(i, i)] = 0.5 * w * w;
        m[(i, n)] = -0.5 * g;
        m[(n, i)] = -0.5 * g;
    }
    m[(n, n)] = 0.5 * omega_sys * omega_sys;
    StarHamiltonian {
        m_matrix: m,
        modes: modes.clone(),
        omega_sys,
    }
}

/// M = O diag(d²/2) Oᵀ with ascending normal-mode frequencies d.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeBasis {
    pub orth: DMatrix<f64>,
    pub freqs: DVector<f64>,
}

pub fn normal_modes(h: &StarHamiltonian) -> Result<NormalModeBasis> {
    let eig = SymmetricEigen::new(h.m_matrix.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let min = eig.eigenvalues[order[0]];
    if !(min > 0.0) {
        return Err(Error::Instability {
            lambda: h.modes.params.lambda,
            omega_c: h.modes.params.omega_c,
            n_modes: h.modes.len(),
            min_eigenvalue: min,
        });
    }
    let orth = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let freqs = DVector::from_iterator(n, order.iter().map(|&k| (2.0 * eig.eigenvalues[k]).sqrt()));
    Ok(NormalModeBasis { orth, freqs })
}

/// Phase-space propagator (X(t), P(t)) = S(t)(X, P) in block form, with M^{PP} = M^{XX}.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticPropagator {
    pub xx: DMatrix<f64>,
    pub xp: DMatrix<f64>,
    pub px: DMatrix<f64>,
    pub t: f64,
}

impl SymplecticPropagator {
    pub fn dim(&self) -> usize {
        self.xx.nrows()
    }

    /// Full 2n×2n matrix acting on (X₁..X_n, P₁..P_n).
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        s.view_mut((0, 0), (n, n)).copy_from(&self.xx);
        s.view_mut((0, n), (n, n)).copy_from(&self.xp);
        s.view_mut((n, 0), (n, n)).copy_from(&self.px);
        s.view_mut((n, n), (n, n)).copy_from(&self.xx);
        s
    }
}

/// O f(d) Oᵀ for a scalar function of the normal-mode frequencies.
fn spectral_map(basis: &NormalModeBasis, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let o = &basis.orth;
    let mut scaled = o.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= f(basis.freqs[j]);
    }
    &scaled * o.transpose()
}

/// M^{XX} = O cos(dt) Oᵀ, M^{XP} = O sin(dt)/d Oᵀ, M^{PX} = −O d sin(dt) Oᵀ.
pub fn propagator(basis: &NormalModeBasis, t: f64) -> SymplecticPropagator {
    SymplecticPropagator {
        xx: spectral_map(basis, |d| (d * t).cos()),
        xp: spectral_map(basis, |d| (d * t).sin() / d),
        px: spectral_map(basis, |d| -d * (d * t).sin()),
        t,
    }
}

/// Ṡ(t) as a full 2n×2n matrix.
pub fn propagator_derivative(basis: &NormalModeBasis, t: f64) -> DMatrix<f64> {
    let n = basis.freqs.len();
    let dxx = spectral_map(basis, |d| -d * (d * t).sin());
    let dxp = spectral_map(basis, |d| (d * t).cos());
    let dpx = spectral_map(basis, |d| -d * d * (d * t).cos());
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    s.view_mut((0, 0), (n, n)).copy_from(&dxx);
    s.view_mut((0, n), (n, n)).copy_from(&dxp);
    s.view_mut((n, 0), (n, n)).copy_from(&dpx);
    s.view_mut((n, n), (n, n)).copy_from(&dxx);
    s
}

/// Symplectic form [[0, I], [−I, 0]] in (X, P) ordering.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = 1.0;
        j[(n + k, k)] = -1.0;
    }
    j
}

/// Second moments ordered (X₁..X_n, P₁..P_n), symmetrised.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCovariance {
    pub sigma: DMatrix<f64>,
}

impl FullCovariance {
    pub fn modes(&self) -> usize {
        self.sigma.nrows() / 2
    }

    /// Smallest eigenvalue of σ + (i/2)Ω through its real embedding; the
    /// uncertainty relation holds when this is ≥ 0.
    pub fn uncertainty_margin(&self) -> f64 {
        let m = 2 * self.modes();
        let b = symplectic_form(self.modes()) * 0.5;
        let mut emb = DMatrix::zeros(2 * m, 2 * m);
        emb.view_mut((0, 0), (m, m)).copy_from(&self.sigma);
        emb.view_mut((m, m), (m, m)).copy_from(&self.sigma);
        emb.view_mut((0, m), (m, m)).copy_from(&(-&b));
        emb.view_mut((m, 0), (m, m)).copy_from(&b);
        SymmetricEigen::new(emb).eigenvalues.min()
    }
}

/// ⟨X²⟩ = coth(ω/2T)/(2ω), ⟨P²⟩ = (ω/2)coth(ω/2T).
fn thermal_moments(omega: f64, temp: f64) -> (f64, f64) {
    let c = thermal_factor(omega, temp);
    (c / (2.0 * omega), 0.5 * omega * c)
}

/// Factorised thermal state of system (temperature T_S) and bath (T_E).
pub fn initial_covariance(temp_sys: f64, temp_env: f64, modes: &BathModes, omega_sys: f64) -> FullCovariance {
    let n = modes.len() + 1;
    let mut sigma = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        let (w, temp) = if k < modes.len() {
            (modes.freqs[k], temp_env)
        } else {
            (omega_sys, temp_sys)
        };
        let (x2, p2) = thermal_moments(w, temp);
        sigma[(k, k)] = x2;
        sigma[(n + k, n + k)] = p2;
    }
    FullCovariance { sigma }
}

/// σ(t) = S σ₀ Sᵀ.
pub fn evolve(sigma0: &FullCovariance, s: &SymplecticPropagator) -> Result<FullCovariance> {
    if sigma0.sigma.nrows() != 2 * s.dim() {
        return Err(Error::Dimension {
            expected: 2 * s.dim(),
            got: sigma0.sigma.nrows(),
        });
    }
    let m = s.to_matrix();
    Ok(FullCovariance {
        sigma: &m * &sigma0.sigma * m.transpose(),
    })
}

/// Energies of system, bath and interaction for one covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    pub system: f64,
    pub bath: f64,
    pub interaction: f64,
}

pub fn energies(sigma: &FullCovariance, h: &StarHamiltonian) -> Energies {
    let n = h.dim();
    let s = h.system_index();
    let cov = &sigma.sigma;
    let system = 0.5 * cov[(n + s, n + s)] + 0.5 * h.omega_sys * h.omega_sys * cov[(s, s)];
    let mut bath = 0.0;
    let mut interaction = 0.0;
    for (i, (w, g)) in h.modes.freqs.iter().zip(&h.modes.couplings).enumerate() {
        bath += 0.5 * cov[(n + i, n + i)] + 0.5 * w * w * cov[(i, i)];
        interaction -= g * cov[(i, s)];
    }
    Energies {
        system,
        bath,
        interaction,
    }
}

/// Changes (⟨ΔE_S⟩, ⟨Δq⟩, ⟨ΔH_I⟩) between two covariances.
pub fn energy_partition(
    sigma_t: &FullCovariance,
    sigma_0: &FullCovariance,
    h: &StarHamiltonian,
) -> Result<(f64, f64, f64)> {
    if sigma_t.sigma.shape() != sigma_0.sigma.shape() || sigma_t.modes() != h.dim() {
        return Err(Error::Dimension {
            expected: 2 * h.dim(),
            got: sigma_t.sigma.nrows(),
        });
    }
    let a = energies(sigma_t, h);
    let b = energies(sigma_0, h);
    Ok((a.system - b.system, a.bath - b.bath, a.interaction - b.interaction))
}

/// Poincaré recurrence time 2π/Δω of a uniform bath grid.
pub fn recurrence_time(modes: &BathModes) -> f64 {
    match modes.spacings.first() {
        Some(&dw) if dw > 0.0 => 2.0 * PI / dw,
        _ => f64::INFINITY,
    }
}

/// Initial moments expressed in the normal-mode frame X̃ = OᵀX, P̃ = OᵀP, and
/// the observable weights needed to evaluate energies in O(N²) per time.
#[derive(Debug, Clone)]
struct NormalFrame {
    a: DMatrix<f64>,
    b: Option<DMatrix<f64>>,
    c: DMatrix<f64>,
    sys_row: DVector<f64>,
    coupling_row: DVector<f64>,
    // Hadamard products of observable weights with the initial moments
    xb_a: DMatrix<f64>,
    xb_c: DMatrix<f64>,
    pb_a: DMatrix<f64>,
    pb_c: DMatrix<f64>,
    int_a: DMatrix<f64>,
    int_c: DMatrix<f64>,
    xb_b: Option<DMatrix<f64>>,
    pb_b: Option<DMatrix<f64>>,
    int_b: Option<DMatrix<f64>>,
}

/// An exact-engine run: Hamiltonian, its normal modes and the initial state.
#[derive(Debug, Clone)]
pub struct ExactRun {
    pub hamiltonian: StarHamiltonian,
    pub basis: NormalModeBasis,
    pub initial: FullCovariance,
    pub temp_sys: f64,
    frame: NormalFrame,
}

/// Time-dependent scalings of normal-mode coordinates.
struct Phases {
    c: DVector<f64>,
    s_over_d: DVector<f64>,
    d_s: DVector<f64>,
}

impl Phases {
    fn at(freqs: &DVector<f64>, t: f64) -> Self {
        let n = freqs.len();
        let mut c = DVector::zeros(n);
        let mut s_over_d = DVector::zeros(n);
        let mut d_s = DVector::zeros(n);
        for k in 0..n {
            let d = freqs[k];
            let (s, co) = (d * t).sin_cos();
            c[k] = co;
            s_over_d[k] = s / d;
            d_s[k] = d * s;
        }
        Self { c, s_over_d, d_s }
    }
}

fn quad(u: &DVector<f64>, k: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    u.dot(&(k * v))
}

impl ExactRun {
    /// Discretises the bath and builds the run for a thermal product state.
    pub fn new(params: &SpectralParams, temp_sys: f64, n_modes: usize, omega_max: f64) -> Result<Self> {
        let modes = discretize_bath(params, n_modes, omega_max)?;
        let initial = initial_covariance(temp_sys, params.temp_env, &modes, 1.0);
        Self::from_state(assemble(&modes, 1.0), initial, temp_sys)
    }

    /// Builds a run from an arbitrary zero-mean initial covariance.
    pub fn from_state(hamiltonian: StarHamiltonian, initial: FullCovariance, temp_sys: f64) -> Result<Self> {
        if !(temp_sys >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "temp_sys must be >= 0, got {temp_sys}"
            )));
        }
        let n = hamiltonian.dim();
        if initial.modes() != n {
            return Err(Error::Dimension {
                expected: 2 * n,
                got: initial.sigma.nrows(),
            });
        }
        let basis = normal_modes(&hamiltonian)?;
        let frame = NormalFrame::new(&hamiltonian, &basis, &initial);
        Ok(Self {
            hamiltonian,
            basis,
            initial,
            temp_sys,
            frame,
        })
    }

    pub fn recurrence_time(&self) -> f64 {
        recurrence_time(&self.hamiltonian.modes)
    }

    /// Warns when the horizon exceeds half the recurrence time.
    pub fn check_horizon(&self, t_max: f64) -> bool {
        let ok = t_max <= 0.5 * self.recurrence_time();
        if !ok {
            warn!(
                "horizon {t_max} exceeds half the recurrence time {:.3}; finite-bath revivals may contaminate results",
                self.recurrence_time()
            );
        }
        ok
    }

    pub fn propagator(&self, t: f64) -> SymplecticPropagator {
        propagator(&self.basis, t)
    }

    /// Full covariance at time t (O(N³)).
    pub fn covariance_at(&self, t: f64) -> FullCovariance {
        evolve(&self.initial, &self.propagator(t)).expect("dimensions fixed at construction")
    }

    /// θ(t) = Σ g_i⟨sym(P_i X_S)⟩_t, the rate of change of the bath energy.
    pub fn energy_flow_at(&self, t: f64) -> f64 {
        let f = &self.frame;
        let ph = Phases::at(&self.basis.freqs, t);
        let u = &f.coupling_row;
        let o = &f.sys_row;
        // P̃ = −d s X̃ + c P̃,  X̃ = c X̃ + (s/d) P̃
        let mut v = -quad(&u.component_mul(&ph.d_s), &f.a, &o.component_mul(&ph.c))
            + quad(&u.component_mul(&ph.c), &f.c, &o.component_mul(&ph.s_over_d));
        if let Some(b) = &f.b {
            // b[(a, k)] = ⟨sym(X̃_a P̃_k)⟩
            v += -quad(&u.component_mul(&ph.d_s), b, &o.component_mul(&ph.s_over_d))
                + quad(&o.component_mul(&ph.c), b, &u.component_mul(&ph.c));
        }
        v
    }

    /// θ(t) from the derivative of the propagator: θ = 2 Tr(Q_B Ṡ σ₀ Sᵀ),
    /// with Q_B the bath-energy quadratic form. O(N³); used as a cross-check.
    pub fn energy_flow_from_propagator(&self, t: f64) -> f64 {
        let n = self.hamiltonian.dim();
        let s = self.propagator(t).to_matrix();
        let ds = propagator_derivative(&self.basis, t);
        let prod = ds * &self.initial.sigma * s.transpose();
        let mut v = 0.0;
        for (i, w) in self.hamiltonian.modes.freqs.iter().enumerate() {
            v += 0.5 * w * w * prod[(i, i)] + 0.5 * prod[(n + i, n + i)];
        }
        2.0 * v
    }

    /// Absolute energies at time t in O(N²).
    pub fn energies_at(&self, t: f64) -> Energies {
        let f = &self.frame;
        let ph = Phases::at(&self.basis.freqs, t);
        let (c, sd, ds) = (&ph.c, &ph.s_over_d, &ph.d_s);
        let o = &f.sys_row;
        let w0 = self.hamiltonian.omega_sys;

        let oc = o.component_mul(c);
        let osd = o.component_mul(sd);
        let ods = o.component_mul(ds);
        let mut x_s = quad(&oc, &f.a, &oc) + quad(&osd, &f.c, &osd);
        let mut p_s = quad(&ods, &f.a, &ods) + quad(&oc, &f.c, &oc);
        let mut bath = quad(ds, &f.pb_a, ds) + quad(c, &f.pb_c, c) + quad(c, &f.xb_a, c) + quad(sd, &f.xb_c, sd);
        let mut interaction = quad(c, &f.int_a, c) + quad(sd, &f.int_c, sd);
        if let Some(b) = &f.b {
            x_s += 2.0 * quad(&oc, b, &osd);
            p_s -= 2.0 * quad(&ods, b, &oc);
            let (xb, pb, ib) = (
                f.xb_b.as_ref().unwrap(),
                f.pb_b.as_ref().unwrap(),
                f.int_b.as_ref().unwrap(),
            );
            bath += 2.0 * (quad(c, xb, sd) - quad(ds, pb, c));
            interaction += 2.0 * quad(c, ib, sd);
        }
        Energies {
            system: 0.5 * p_s + 0.5 * w0 * w0 * x_s,
            bath,
            interaction,
        }
    }

    /// θ on a grid (θ-only fast path).
    pub fn energy_flow(&self, times: &[f64]) -> Vec<f64> {
        times.par_iter().map(|&t| self.energy_flow_at(t)).collect()
    }

    /// Full energy bookkeeping on a grid.
    pub fn trace(&self, times: &[f64]) -> EnergyTrace {
        let rows: Vec<(f64, Energies)> = times
            .par_iter()
            .map(|&t| (self.energy_flow_at(t), self.energies_at(t)))
            .collect();
        let e0 = self.energies_at(0.0);
        EnergyTrace {
            t: times.to_vec(),
            theta: rows.iter().map(|r| r.0).collect(),
            system: rows.iter().map(|r| r.1.system - e0.system).collect(),
            environment: rows.iter().map(|r| r.1.bath - e0.bath).collect(),
            interaction: rows.iter().map(|r| r.1.interaction - e0.interaction).collect(),
            engine: EngineTag::Exact,
            params: self.hamiltonian.modes.params,
            temp_sys: self.temp_sys,
        }
    }
}

impl NormalFrame {
    fn new(h: &StarHamiltonian, basis: &NormalModeBasis, initial: &FullCovariance) -> Self {
        let n = h.dim();
        let nb = h.modes.len();
        let o = &basis.orth;
        let ot = o.transpose();
        let sig = &initial.sigma;
        let xx = sig.view((0, 0), (n, n));
        let pp = sig.view((n, n), (n, n));
        let xp = sig.view((0, n), (n, n));
        let a = &ot * xx * o;
        let c = &ot * pp * o;
        let b_raw = &ot * xp * o;
        let b = if b_raw.iter().all(|v| *v == 0.0) {
            None
        } else {
            Some(b_raw)
        };

        let sys_row = o.row(h.system_index()).transpose();
        let bath_rows = o.rows(0, nb);
        let g = DVector::from_column_slice(&h.modes.couplings);
        let coupling_row = bath_rows.transpose() * &g;

        let w2 = DVector::from_iterator(nb, h.modes.freqs.iter().map(|w| 0.5 * w * w));
        let mut scaled = bath_rows.clone_owned();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= w2[i];
        }
        let w_xb = bath_rows.transpose() * &scaled;
        let w_pb = (bath_rows.transpose() * bath_rows) * 0.5;
        // Tr(G XXᵀ) with G_{iS} = G_{Si} = −g_i/2 gives −Σ g_i⟨X_i X_S⟩
        let w_int = {
            let cr = &coupling_row;
            let sr = &sys_row;
            (cr * sr.transpose() + sr * cr.transpose()) * -0.5
        };
        let had = |w: &DMatrix<f64>, k: &DMatrix<f64>| w.component_mul(k);
        Self {
            xb_a: had(&w_xb, &a),
            xb_c: had(&w_xb, &c),
            pb_a: had(&w_pb, &a),
            pb_c: had(&w_pb, &c),
            int_a: had(&w_int, &a),
            int_c: had(&w_int, &c),
            xb_b: b.as_ref().map(|b| had(&w_xb, b)),
            pb_b: b.as_ref().map(|b| had(&w_pb, b)),
            int_b: b.as_ref().map(|b| had(&w_int, b)),
            a,
            b,
            c,
            sys_row,
            coupling_row,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_run(lambda: f64, n: usize) -> ExactRun {
        let p = SpectralParams::new(lambda, 0.25, 1.0).unwrap();
        ExactRun::new(&p, 1.0, n, 8.0).unwrap()
    }

    #[test]
    fn assemble_layout() {
        let p = SpectralParams::new(0.0, 0.25, 1.0).unwrap();
        let modes = discretize_bath(&p, 2, 4.0).unwrap();
        let h = assemble(&modes, 1.0);
        assert_eq!(h.m_matrix[(0, 0)], 2.0);
        assert_eq!(h.m_matrix[(1, 1)], 8.0);
        assert_eq!(h.m_matrix[(2, 2)], 0.5);
        assert_eq!(h.m_matrix[(0, 2)], 0.0);
        let basis = normal_modes(&h).unwrap();
        let d: Vec<f64> = basis.freqs.iter().copied().collect();
        for (a, b) in d.iter().zip([1.0, 2.0, 4.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_oscillator_propagator() {
        let p = SpectralParams::new(0.0, 0.25, 1.0).unwrap();
        let modes = discretize_bath(&p, 2, 4.0).unwrap();
        let basis = normal_modes(&assemble(&modes, 1.0)).unwrap();
        let s = propagator(&basis, 0.7);
        // system mode, ω = 1
        assert_abs_diff_eq!(s.xx[(2, 2)], 0.7f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.xp[(2, 2)], 0.7f64.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.px[(2, 2)], -0.7f64.sin(), epsilon = 1e-12);
        // bath mode ω = 2
        assert_abs_diff_eq!(s.xp[(0, 0)], (1.4f64).sin() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn instability_is_reported() {
        let p = SpectralParams::new(50.0, 1.0, 1.0).unwrap();
        let r = ExactRun::new(&p, 1.0, 50, 8.0);
        assert!(matches!(r, Err(Error::Instability { .. })));
    }

    #[test]
    fn thermal_initial_state() {
        let p = SpectralParams::new(0.01, 0.25, 1.0).unwrap();
        let modes = discretize_bath(&p, 4, 8.0).unwrap();
        let vac = initial_covariance(0.0, 1.0, &modes, 1.0);
        assert_eq!(vac.sigma[(4, 4)], 0.5);
        assert_eq!(vac.sigma[(9, 9)], 0.5);
        let h = assemble(&modes, 1.0);
        let hot = initial_covariance(2.0, 1.0, &modes, 1.0);
        let e = energies(&hot, &h);
        assert_abs_diff_eq!(e.system, 1.0 / (0.5f64.exp() - 1.0) + 0.5, epsilon = 1e-14);
        assert_eq!(e.interaction, 0.0);
        assert!(hot.uncertainty_margin() > -1e-12);
    }

    #[test]
    fn fast_energies_match_dense_evolution() {
        let run = small_run(0.3, 12);
        for t in [0.0, 0.9, 7.3] {
            let sigma = run.covariance_at(t);
            let dense = energies(&sigma, &run.hamiltonian);
            let fast = run.energies_at(t);
            assert_abs_diff_eq!(dense.system, fast.system, epsilon = 1e-12);
            assert_abs_diff_eq!(dense.bath, fast.bath, epsilon = 1e-11);
            assert_abs_diff_eq!(dense.interaction, fast.interaction, epsilon = 1e-12);
        }
    }

    #[test]
    fn flow_routes_agree() {
        let run = small_run(0.3, 12);
        for t in [0.3, 2.0, 9.1] {
            let a = run.energy_flow_at(t);
            let b = run.energy_flow_from_propagator(t);
            let h = 1e-4;
            let fd = (run.energies_at(t + h).bath - run.energies_at(t - h).bath) / (2.0 * h);
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            assert_abs_diff_eq!(a, fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn correlated_initial_state_uses_cross_terms() {
        let run = small_run(0.3, 6);
        // squeeze-like XP correlation on the system mode keeps the state physical
        let mut init = run.initial.clone();
        let n = run.hamiltonian.dim();
        let s = run.hamiltonian.system_index();
        init.sigma[(s, n + s)] = 0.2;
        init.sigma[(n + s, s)] = 0.2;
        init.sigma[(s, s)] += 0.2;
        init.sigma[(n + s, n + s)] += 0.2;
        let run = ExactRun::from_state(run.hamiltonian.clone(), init, 1.0).unwrap();
        for t in [0.4, 3.3] {
            let dense = energies(&run.covariance_at(t), &run.hamiltonian);
            let fast = run.energies_at(t);
            assert_abs_diff_eq!(dense.system, fast.system, epsilon = 1e-12);
            assert_abs_diff_eq!(dense.bath, fast.bath, epsilon = 1e-11);
            assert_abs_diff_eq!(dense.interaction, fast.interaction, epsilon = 1e-12);
            assert_abs_diff_eq!(
                run.energy_flow_at(t),
                run.energy_flow_from_propagator(t),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn recurrence() {
        let p = SpectralParams::new(0.01, 0.25, 1.0).unwrap();
        let m = discretize_bath(&p, 150, 8.0).unwrap();
        assert_abs_diff_eq!(recurrence_time(&m), 2.0 * PI * 150.0 / 8.0, epsilon = 1e-12);
        let m2 = discretize_bath(&p, 300, 8.0).unwrap();
        assert_abs_diff_eq!(recurrence_time(&m2), 2.0 * recurrence_time(&m), epsilon = 1e-12);
    }
}
