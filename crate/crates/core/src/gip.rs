//! Gaussian interferometric power of a system–ancilla pair driven by the
//! weak-coupling channel, and the non-Markovianity witness built from it.
//!
//! Two-mode covariances use the ordering (X_S, P_S, X_A, P_A) and the
//! symplectic form ⊕[[0, 1], [−1, 0]].

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::backflow::negative_part_integral;
use crate::error::{Error, Result};
use crate::spectral::MasterRates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    Mts,
    Sts,
    Custom,
}

impl StateFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateFamily::Mts => "mts",
            StateFamily::Sts => "sts",
            StateFamily::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    pub cm: Matrix4<f64>,
    pub family: StateFamily,
    /// k = ν + ½
    pub k: f64,
    pub r: f64,
}

fn single_mode_form() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// ⊕[[0, 1], [−1, 0]] for two modes.
pub fn two_mode_form() -> Matrix4<f64> {
    let mut o = Matrix4::zeros();
    o.fixed_view_mut::<2, 2>(0, 0).copy_from(&single_mode_form());
    o.fixed_view_mut::<2, 2>(2, 2).copy_from(&single_mode_form());
    o
}

fn family_params(nu: f64, r: f64) -> Result<(f64, f64, f64)> {
    if !(nu >= 0.0) || !nu.is_finite() || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need nu >= 0 and finite r, got nu = {nu}, r = {r}"
        )));
    }
    Ok((nu + 0.5, (2.0 * r).cosh(), (2.0 * r).sinh()))
}

/// Mixed thermal state k e^{2r}[[x I, y I], [y I, x I]].
pub fn mts_state(nu: f64, r1: f64) -> Result<TwoModeState> {
    let (k, x, y) = family_params(nu, r1)?;
    let s = k * (2.0 * r1).exp();
    let mut cm = Matrix4::zeros();
    for i in 0..4 {
        cm[(i, i)] = s * x;
    }
    for i in 0..2 {
        cm[(i, i + 2)] = s * y;
        cm[(i + 2, i)] = s * y;
    }
    Ok(TwoModeState {
        cm,
        family: StateFamily::Mts,
        k,
        r: r1,
    })
}

/// Squeezed thermal state k[[x I, Y], [Y, x I]] with Y = diag(y, −y).
pub fn sts_state(nu: f64, r2: f64) -> Result<TwoModeState> {
    let (k, x, y) = family_params(nu, r2)?;
    let mut cm = Matrix4::zeros();
    for i in 0..4 {
        cm[(i, i)] = k * x;
    }
    cm[(0, 2)] = k * y;
    cm[(2, 0)] = k * y;
    cm[(1, 3)] = -k * y;
    cm[(3, 1)] = -k * y;
    Ok(TwoModeState {
        cm,
        family: StateFamily::Sts,
        k,
        r: r2,
    })
}

impl TwoModeState {
    pub fn custom(cm: Matrix4<f64>) -> Result<Self> {
        let s = Self {
            cm,
            family: StateFamily::Custom,
            k: f64::NAN,
            r: f64::NAN,
        };
        if s.uncertainty_margin() < -1e-9 {
            return Err(Error::InvalidState(
                "covariance violates the uncertainty relation".into(),
            ));
        }
        Ok(s)
    }

    /// Smallest eigenvalue of σ + (i/2)Ω via its real embedding.
    pub fn uncertainty_margin(&self) -> f64 {
        let b = two_mode_form() * 0.5;
        let mut emb = DMatrix::zeros(8, 8);
        for i in 0..4 {
            for j in 0..4 {
                emb[(i, j)] = self.cm[(i, j)];
                emb[(i + 4, j + 4)] = self.cm[(i, j)];
                emb[(i, j + 4)] = -b[(i, j)];
                emb[(i + 4, j)] = b[(i, j)];
            }
        }
        SymmetricEigen::new(emb).eigenvalues.min()
    }

    pub fn ancilla_block(&self) -> Matrix2<f64> {
        self.cm.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn system_block(&self) -> Matrix2<f64> {
        self.cm.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

/// One-mode Gaussian channel σ ↦ KσKᵀ + N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianChannel {
    pub k_mat: Matrix2<f64>,
    pub n_mat: Matrix2<f64>,
    pub t: f64,
}

impl GaussianChannel {
    pub fn identity() -> Self {
        Self {
            k_mat: Matrix2::identity(),
            n_mat: Matrix2::zeros(),
            t: 0.0,
        }
    }

    pub fn apply(&self, sigma: &Matrix2<f64>) -> Matrix2<f64> {
        self.k_mat * sigma * self.k_mat.transpose() + self.n_mat
    }
}

/// Rotation [[cos ωt, sin ωt], [−sin ωt, cos ωt]] of the free oscillator.
fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, s, -s, c)
}

/// K_t = e^{−Γ(t)} R(ω0 t), N_t = n(t) I for every grid time.
pub fn channel_series(rates: &dyn MasterRates, omega_sys: f64) -> Vec<GaussianChannel> {
    let noise = rates.added_noise();
    rates
        .times()
        .iter()
        .zip(rates.big_gamma())
        .zip(noise)
        .map(|((&t, &g), n)| GaussianChannel {
            k_mat: rotation(omega_sys * t) * (-g).exp(),
            n_mat: Matrix2::identity() * n,
            t,
        })
        .collect()
}

/// The channel at one grid time.
pub fn channel_lift(rates: &dyn MasterRates, t: f64, omega_sys: f64) -> Result<GaussianChannel> {
    let i = rates.index_of(t)?;
    Ok(channel_series(rates, omega_sys)[i])
}

/// σ_SA(t) = (K⊕I)σ_SA(K⊕I)ᵀ + N⊕0.
pub fn evolve_joint(s: &TwoModeState, ch: &GaussianChannel) -> TwoModeState {
    let mut k = Matrix4::identity();
    k.fixed_view_mut::<2, 2>(0, 0).copy_from(&ch.k_mat);
    let mut n = Matrix4::zeros();
    n.fixed_view_mut::<2, 2>(0, 0).copy_from(&ch.n_mat);
    let out = TwoModeState {
        cm: k * s.cm * k.transpose() + n,
        ..s.clone()
    };
    let margin = out.uncertainty_margin();
    if margin < -1e-9 {
        warn!(
            "channel output at t = {} violates the uncertainty relation (margin {margin:e})",
            ch.t
        );
    }
    out
}

/// Which mode carries the unknown phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSide {
    System,
    #[default]
    Ancilla,
}

/// Generator matrix G (H = ½RᵀGR) of a phase shift on `side`, preceded by the
/// squeezing S = R(θ) diag(e^{−r}, e^{r}) R(−θ) of that mode.
pub fn phase_generator(side: PhaseSide, r: f64, theta: f64) -> Matrix4<f64> {
    let rot = rotation(-theta);
    let s = rot * Matrix2::new((-r).exp(), 0.0, 0.0, r.exp()) * rot.transpose();
    let block = s.transpose() * s;
    let mut g = Matrix4::zeros();
    let off = match side {
        PhaseSide::System => 0,
        PhaseSide::Ancilla => 2,
    };
    g.fixed_view_mut::<2, 2>(off, off).copy_from(&block);
    g
}

/// Closed-form QFI for unitary families on a fixed Gaussian state:
/// F = ½ vec(∂σ)ᵀ (σ⊗σ − ¼Ω⊗Ω)⁺ vec(∂σ), with ∂σ = ΩGσ − σGΩ.
#[derive(Debug, Clone)]
pub struct GaussianQfi {
    sigma: Matrix4<f64>,
    eigvecs: DMatrix<f64>,
    inv_eigs: DVector<f64>,
}

impl GaussianQfi {
    pub fn new(sigma: &Matrix4<f64>) -> Self {
        let s = DMatrix::from_column_slice(4, 4, sigma.as_slice());
        let om = DMatrix::from_column_slice(4, 4, two_mode_form().as_slice());
        let m = s.kronecker(&s) - om.kronecker(&om) * 0.25;
        let m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m);
        let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let inv_eigs = eig
            .eigenvalues
            .map(|l| if l.abs() > 1e-12 * scale { 1.0 / l } else { 0.0 });
        Self {
            sigma: *sigma,
            eigvecs: eig.eigenvectors,
            inv_eigs,
        }
    }

    pub fn qfi(&self, g: &Matrix4<f64>) -> f64 {
        let om = two_mode_form();
        let ds = om * g * self.sigma - self.sigma * g * om;
        let v = DVector::from_column_slice(ds.as_slice());
        let proj = self.eigvecs.transpose() * v;
        0.5 * proj
            .iter()
            .zip(self.inv_eigs.iter())
            .map(|(p, l)| p * p * l)
            .sum::<f64>()
    }
}

/// Williamson decomposition σ = S D Sᵀ with D = diag(ν₁, ν₁, ν₂, ν₂).
#[derive(Debug, Clone, PartialEq)]
pub struct Williamson {
    pub symplectic: Matrix4<f64>,
    pub nu: [f64; 2],
}

pub fn williamson(sigma: &Matrix4<f64>) -> Result<Williamson> {
    let eig = SymmetricEigen::new(*sigma);
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::InvalidState("covariance is not positive definite".into()));
    }
    let sqrt =
        eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
    let inv_sqrt = eig.eigenvectors
        * Matrix4::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let a = inv_sqrt * two_mode_form() * inv_sqrt;
    let a = (a - a.transpose()) * 0.5;
    // −A² is symmetric with eigenvalues a_j², each twice
    let sq = -(a * a);
    let sq = (sq + sq.transpose()) * 0.5;
    let e2 = SymmetricEigen::new(sq);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| e2.eigenvalues[j].total_cmp(&e2.eigenvalues[i]));
    let mut cols: Vec<nalgebra::Vector4<f64>> = Vec::with_capacity(4);
    let mut freqs = Vec::with_capacity(2);
    for &i in &order {
        if cols.len() == 4 {
            break;
        }
        let mut u: nalgebra::Vector4<f64> = e2.eigenvectors.column(i).into_owned();
        for c in &cols {
            u -= *c * c.dot(&u);
        }
        let norm = u.norm();
        if norm < 1e-6 {
            continue;
        }
        u /= norm;
        let aval = e2.eigenvalues[i].max(0.0).sqrt();
        let v = -(a * u) / aval;
        cols.push(u);
        cols.push(v);
        freqs.push(aval);
    }
    if cols.len() != 4 {
        return Err(Error::InvalidState("Williamson decomposition failed".into()));
    }
    let o = Matrix4::from_columns(&cols);
    let nu = [1.0 / freqs[0], 1.0 / freqs[1]];
    let d_inv_sqrt = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        nu[0].sqrt().recip(),
        nu[0].sqrt().recip(),
        nu[1].sqrt().recip(),
        nu[1].sqrt().recip(),
    ));
    Ok(Williamson {
        symplectic: sqrt * o * d_inv_sqrt,
        nu,
    })
}

/// Reference QFI from the state's Fock representation in its Williamson
/// modes, where it is a product of thermal states.
#[derive(Debug, Clone)]
pub struct FockQfi {
    pub decomposition: Williamson,
    pub cutoff: [usize; 2],
    pub tail_tolerance: f64,
}

pub const FOCK_TAIL_TOLERANCE: f64 = 1e-10;
pub const FOCK_MAX_CUTOFF: usize = 5000;

fn fock_cutoff(nu: f64, tol: f64, max: usize) -> Result<usize> {
    let nbar = (nu - 0.5).max(0.0);
    let q = nbar / (nbar + 1.0);
    let mut n = 4;
    // occupation tail beyond n, weighted by the growth of quadratic matrix elements
    while q.powi(n as i32 + 1) * ((n + 3) as f64).powi(2) >= tol {
        n += 1;
        if n > max {
            return Err(Error::FockCutoff { nu, max_cutoff: max });
        }
    }
    Ok(n)
}

fn thermal_weights(nu: f64, cutoff: usize) -> Vec<f64> {
    let nbar = (nu - 0.5).max(0.0);
    let q = nbar / (nbar + 1.0);
    let mut p = Vec::with_capacity(cutoff + 1);
    let mut w = 1.0 / (nbar + 1.0);
    for _ in 0..=cutoff {
        p.push(w);
        w *= q;
    }
    p
}

impl FockQfi {
    pub fn new(sigma: &Matrix4<f64>) -> Result<Self> {
        Self::with_tolerance(sigma, FOCK_TAIL_TOLERANCE, FOCK_MAX_CUTOFF)
    }

    pub fn with_tolerance(sigma: &Matrix4<f64>, tol: f64, max_cutoff: usize) -> Result<Self> {
        let decomposition = williamson(sigma)?;
        let cutoff = [
            fock_cutoff(decomposition.nu[0], tol, max_cutoff)?,
            fock_cutoff(decomposition.nu[1], tol, max_cutoff)?,
        ];
        Ok(Self {
            decomposition,
            cutoff,
            tail_tolerance: tol,
        })
    }

    /// F = 2 Σ_{jk} (p_j − p_k)²/(p_j + p_k) |⟨j|H|k⟩|² for H = ½RᵀGR.
    pub fn qfi(&self, g: &Matrix4<f64>) -> f64 {
        let s = self.decomposition.symplectic;
        let gp = s.transpose() * g * s;
        let [c1, c2] = self.cutoff;
        let p1 = thermal_weights(self.decomposition.nu[0], c1);
        let p2 = thermal_weights(self.decomposition.nu[1], c2);
        let h = 1.0 / 2f64.sqrt();
        // R_a = α a_m + β a_m†
        let ladder = |a: usize| -> (usize, Complex64, Complex64) {
            let mode = a / 2;
            if a.is_multiple_of(2) {
                (mode, Complex64::new(h, 0.0), Complex64::new(h, 0.0))
            } else {
                (mode, Complex64::new(0.0, -h), Complex64::new(0.0, h))
            }
        };
        let ops: Vec<(usize, Complex64, Complex64)> = (0..4).map(ladder).collect();
        let mut total = 0.0;
        for n1 in 0..=c1 {
            for n2 in 0..=c2 {
                let pk = p1[n1] * p2[n2];
                // ⟨n1 + d1, n2 + d2| H |n1, n2⟩ for d ∈ [−2, 2]²
                let mut elems = [[Complex64::new(0.0, 0.0); 5]; 5];
                for a in 0..4 {
                    for b in 0..4 {
                        let coef = 0.5 * gp[(a, b)];
                        if coef == 0.0 {
                            continue;
                        }
                        let (ma, aa, ba) = ops[a];
                        let (mb, ab, bb) = ops[b];
                        for (rb, cb) in [(false, ab), (true, bb)] {
                            let mut n = [n1 as i64, n2 as i64];
                            let f2 = ladder_apply(&mut n, mb, rb);
                            if f2 == 0.0 {
                                continue;
                            }
                            for (ra, ca) in [(false, aa), (true, ba)] {
                                let mut m = n;
                                let f1 = ladder_apply(&mut m, ma, ra);
                                if f1 == 0.0 {
                                    continue;
                                }
                                let d1 = (m[0] - n1 as i64 + 2) as usize;
                                let d2 = (m[1] - n2 as i64 + 2) as usize;
                                elems[d1][d2] += ca * cb * (coef * f1 * f2);
                            }
                        }
                    }
                }
                for (d1, row) in elems.iter().enumerate() {
                    for (d2, e) in row.iter().enumerate() {
                        if d1 == 2 && d2 == 2 {
                            continue;
                        }
                        let m1 = n1 as i64 + d1 as i64 - 2;
                        let m2 = n2 as i64 + d2 as i64 - 2;
                        if m1 < 0 || m2 < 0 || m1 as usize > c1 || m2 as usize > c2 {
                            continue;
                        }
                        let pj = p1[m1 as usize] * p2[m2 as usize];
                        let sum = pj + pk;
                        if sum > 0.0 {
                            total += (pj - pk).powi(2) / sum * e.norm_sqr();
                        }
                    }
                }
            }
        }
        // each unordered pair was visited from both ends
        2.0 * total
    }
}

/// Applies a ladder operator in place and returns its matrix element.
fn ladder_apply(n: &mut [i64; 2], mode: usize, raise: bool) -> f64 {
    if raise {
        n[mode] += 1;
        (n[mode] as f64).sqrt()
    } else {
        let v = n[mode];
        if v == 0 {
            return 0.0;
        }
        n[mode] -= 1;
        (v as f64).sqrt()
    }
}

/// Minimal Nelder–Mead simplex search in two dimensions.
fn nelder_mead(
    f: &dyn Fn([f64; 2]) -> f64,
    x0: [f64; 2],
    step: [f64; 2],
    ftol: f64,
    max_iter: usize,
) -> ([f64; 2], f64) {
    let mut pts = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut vals = pts.map(f);
    for _ in 0..max_iter {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.map(|i| pts[i]);
        vals = idx.map(|i| vals[i]);
        let size = (pts[1][0] - pts[0][0])
            .abs()
            .max((pts[1][1] - pts[0][1]).abs())
            .max((pts[2][0] - pts[0][0]).abs().max((pts[2][1] - pts[0][1]).abs()));
        if (vals[2] - vals[0]).abs() <= ftol && size < 1e-7 {
            break;
        }
        let c = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |k: f64| [c[0] + k * (pts[2][0] - c[0]), c[1] + k * (pts[2][1] - c[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                pts[2] = xe;
                vals[2] = fe;
            } else {
                pts[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = xr;
            vals[2] = fr;
        } else {
            let (xc, fc) = if fr < vals[2] {
                let x = along(-0.5);
                (x, f(x))
            } else {
                let x = along(0.5);
                (x, f(x))
            };
            if fc < vals[2].min(fr) {
                pts[2] = xc;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    pts[k] = [(pts[0][0] + pts[k][0]) / 2.0, (pts[0][1] + pts[k][1]) / 2.0];
                    vals[k] = f(pts[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (pts[best], vals[best])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QfiMethod {
    #[default]
    Gaussian,
    Fock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GipOptions {
    pub side: PhaseSide,
    pub method: QfiMethod,
    /// Coarse grid points per axis over r ∈ [0, r_max], θ ∈ [0, π).
    pub grid: usize,
    pub r_max: f64,
    pub tolerance: f64,
}

impl Default for GipOptions {
    fn default() -> Self {
        Self {
            side: PhaseSide::Ancilla,
            method: QfiMethod::Gaussian,
            grid: 8,
            r_max: 1.5,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GipValue {
    pub value: f64,
    /// Minimising pre-squeezing (r, θ).
    pub squeeze: [f64; 2],
}

/// ¼ · min over pre-squeezed phase generators of the QFI.
pub fn gip(s: &TwoModeState) -> Result<f64> {
    Ok(gip_with(s, &GipOptions::default())?.value)
}

pub fn gip_with(s: &TwoModeState, opts: &GipOptions) -> Result<GipValue> {
    let objective: Box<dyn Fn([f64; 2]) -> f64> = match opts.method {
        QfiMethod::Gaussian => {
            let q = GaussianQfi::new(&s.cm);
            let side = opts.side;
            Box::new(move |x: [f64; 2]| q.qfi(&phase_generator(side, x[0], x[1])))
        }
        QfiMethod::Fock => {
            let q = FockQfi::new(&s.cm)?;
            let side = opts.side;
            Box::new(move |x: [f64; 2]| q.qfi(&phase_generator(side, x[0], x[1])))
        }
    };
    let n = opts.grid.max(1);
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for i in 0..n {
        let r = if n == 1 {
            0.0
        } else {
            opts.r_max * i as f64 / (n - 1) as f64
        };
        for j in 0..n {
            let th = PI * j as f64 / n as f64;
            let v = objective([r, th]);
            if v < best.1 {
                best = ([r, th], v);
            }
        }
    }
    let step = [opts.r_max / n as f64, PI / n as f64];
    let (x, v) = nelder_mead(&*objective, best.0, step, opts.tolerance * 1e-6, 500);
    let (x, v) = if v < best.1 { (x, v) } else { best };
    Ok(GipValue {
        value: 0.25 * v.max(0.0),
        squeeze: x,
    })
}

/// 𝒬_G along the channel, its time derivative and the witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GipTrajectory {
    pub t: Vec<f64>,
    pub gip: Vec<f64>,
    pub derivative: Vec<f64>,
    /// ∫ max(𝒟, 0) dt
    pub nonmarkovianity: f64,
    /// Σ max(Δ𝒬, 0) over consecutive samples, above the noise floor.
    pub positive_variation: f64,
    pub family: StateFamily,
}

/// Increments of 𝒬_G smaller than this (relative to max 𝒬_G) are treated as
/// round-off from the minimisation.
pub const VARIATION_FLOOR: f64 = 1e-9;

pub fn gip_trajectory(
    s0: &TwoModeState,
    rates: &dyn MasterRates,
    stride: usize,
    opts: &GipOptions,
) -> Result<GipTrajectory> {
    let stride = stride.max(1);
    let channels = channel_series(rates, 1.0);
    let picked: Vec<&GaussianChannel> = channels.iter().step_by(stride).collect();
    if picked.len() < 3 {
        return Err(Error::Grid("GIP trajectory needs at least 3 sampled times".into()));
    }
    let values: Vec<f64> = picked
        .par_iter()
        .map(|ch| gip_with(&evolve_joint(s0, ch), opts).map(|g| g.value))
        .collect::<Result<_>>()?;
    let t: Vec<f64> = picked.iter().map(|c| c.t).collect();
    let n = t.len();
    let derivative: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] - values[0]) / (t[1] - t[0])
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / (t[n - 1] - t[n - 2])
            } else {
                (values[i + 1] - values[i - 1]) / (t[i + 1] - t[i - 1])
            }
        })
        .collect();
    let floor = VARIATION_FLOOR * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let positive_variation = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > floor)
        .fold(0.0, |acc, d| acc + d);
    let dfloor = floor / (t[1] - t[0]);
    let clipped: Vec<f64> = derivative
        .iter()
        .map(|d| if d.abs() <= dfloor { 0.0 } else { -d })
        .collect();
    let nonmarkovianity = negative_part_integral(&t, &clipped);
    Ok(GipTrajectory {
        t,
        gip: values,
        derivative,
        nonmarkovianity,
        positive_variation,
        family: s0.family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::uniform_grid;
    use crate::spectral::SemigroupRates;
    use approx::assert_abs_diff_eq;

    #[test]
    fn family_constructors() {
        let vac = mts_state(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(vac.cm, Matrix4::identity() * 0.5, epsilon = 1e-15);
        let pure = sts_state(0.0, 0.658).unwrap();
        assert_abs_diff_eq!(pure.cm.determinant(), 1.0 / 16.0, epsilon = 1e-12);
        for s in [mts_state(0.5, 0.658).unwrap(), sts_state(0.5, 0.658).unwrap()] {
            assert!(s.uncertainty_margin() > -1e-12);
        }
        assert!(mts_state(-0.1, 0.0).is_err());
    }

    #[test]
    fn thermal_qfi_closed_form() {
        // H = ½(X² − P²) on a thermal ancilla with σ_A = νI: F = 16ν²/(4ν² + 1)
        let s = mts_state(0.7, 0.0).unwrap();
        let g = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.0, 0.0, 1.0, -1.0));
        let a = GaussianQfi::new(&s.cm).qfi(&g);
        let b = FockQfi::new(&s.cm).unwrap().qfi(&g);
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        let nu = 1.2;
        assert_abs_diff_eq!(a, 16.0 * nu * nu / (4.0 * nu * nu + 1.0), epsilon = 1e-10);
    }

    #[test]
    fn williamson_reconstructs_state() {
        let s = sts_state(0.4, 0.5).unwrap();
        let w = williamson(&s.cm).unwrap();
        let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(w.nu[0], w.nu[0], w.nu[1], w.nu[1]));
        let sy = w.symplectic;
        assert_abs_diff_eq!(sy * d * sy.transpose(), s.cm, epsilon = 1e-10);
        assert_abs_diff_eq!(sy * two_mode_form() * sy.transpose(), two_mode_form(), epsilon = 1e-10);
        assert_abs_diff_eq!(w.nu[0], 0.9, epsilon = 1e-10);
        assert_abs_diff_eq!(w.nu[1], 0.9, epsilon = 1e-10);
    }

    #[test]
    fn product_states_have_no_gip() {
        let mut cm = Matrix4::zeros();
        cm.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&Matrix2::new(1.3, 0.2, 0.2, 0.9));
        cm.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&Matrix2::new(0.8, 0.0, 0.0, 0.7));
        let s = TwoModeState::custom(cm).unwrap();
        assert!(gip(&s).unwrap() < 1e-10);
    }

    #[test]
    fn pure_sts_matches_oracle() {
        let s = sts_state(0.0, 0.658).unwrap();
        let fast = gip(&s).unwrap();
        let oracle = gip_with(
            &s,
            &GipOptions {
                method: QfiMethod::Fock,
                ..Default::default()
            },
        )
        .unwrap()
        .value;
        assert!(fast > 0.0);
        assert_abs_diff_eq!(fast, oracle, epsilon = 1e-4);
        assert_abs_diff_eq!(fast, (2.0f64 * 0.658).sinh().powi(2) / 4.0, epsilon = 1e-8);
    }

    #[test]
    fn local_rotations_leave_gip_unchanged() {
        let s = mts_state(0.5, 0.658).unwrap();
        let base = gip(&s).unwrap();
        for (side, angle) in [(0usize, 0.4), (2usize, 1.1)] {
            let mut r = Matrix4::identity();
            r.fixed_view_mut::<2, 2>(side, side).copy_from(&rotation(angle));
            let rotated = TwoModeState::custom(r * s.cm * r.transpose()).unwrap();
            assert_abs_diff_eq!(gip(&rotated).unwrap(), base, epsilon = 1e-9);
        }
    }

    #[test]
    fn channel_basics() {
        let grid = uniform_grid(5.0, 0.01).unwrap();
        let rates = SemigroupRates::new(0.0, 0.0, &grid).unwrap();
        let ch = channel_lift(&rates, 0.0, 1.0).unwrap();
        assert_eq!(ch.k_mat, Matrix2::identity());
        assert_eq!(ch.n_mat, Matrix2::zeros());
        let ch = channel_lift(&rates, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(ch.k_mat, rotation(2.0), epsilon = 1e-15);
        let s = sts_state(0.5, 0.3).unwrap();
        let out = evolve_joint(&s, &ch);
        assert_eq!(out.ancilla_block(), s.ancilla_block());
        assert_eq!(evolve_joint(&s, &GaussianChannel::identity()).cm, s.cm);
        assert!(channel_lift(&rates, 6.0, 1.0).is_err());
    }

    #[test]
    fn semigroup_witness_vanishes() {
        let grid = uniform_grid(20.0, 0.01).unwrap();
        let rates = SemigroupRates::new(0.002, 0.001, &grid).unwrap();
        let s = mts_state(0.5, 0.658).unwrap();
        let tr = gip_trajectory(&s, &rates, 10, &GipOptions::default()).unwrap();
        assert_eq!(tr.nonmarkovianity, 0.0);
        assert_eq!(tr.positive_variation, 0.0);
        assert!(tr.gip.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
