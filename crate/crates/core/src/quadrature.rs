//! Adaptive Gauss–Kronrod quadrature, cumulative integration on time grids and
//! local cubic interpolation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208067292500,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

// 5-point Gauss–Legendre on [-1, 1]
const GL5_X: [f64; 5] = [
    -0.906179845938663992797626878299393,
    -0.538469310105683091036314420700208,
    0.0,
    0.538469310105683091036314420700208,
    0.906179845938663992797626878299393,
];
const GL5_W: [f64; 5] = [
    0.236926885056189087514264040719918,
    0.478628670499366468041291514835639,
    0.568888888888888888888888888888889,
    0.478628670499366468041291514835639,
    0.236926885056189087514264040719918,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-10,
            max_subdivisions: 400,
        }
    }
}

/// One application of the 21-point Kronrod rule. Returns (estimate, error).
pub fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = WGK[10] * fc.abs();
    let mut fv = [(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let result = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`, bisecting the interval
/// with the largest error estimate until the tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            abs_error: 0.0,
            subdivisions: 0,
        });
    }
    let (v, e) = gauss_kronrod_21(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut subdivisions = 1;
    loop {
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            break;
        }
        if subdivisions >= tol.max_subdivisions {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gauss_kronrod_21(&f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_21(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    Ok(Quadrature {
        value,
        abs_error,
        subdivisions,
    })
}

/// Integrates `f` over `[0, upper]` where `f` oscillates with angular
/// frequency `freq`: the range is split at every half period and each piece
/// is integrated adaptively.
pub fn integrate_oscillatory<F: Fn(f64) -> f64>(f: F, upper: f64, freq: f64, tol: Tolerance) -> Result<Quadrature> {
    let freq = freq.abs();
    let pieces = if freq > 0.0 {
        ((upper * freq / std::f64::consts::PI).ceil() as usize).max(1)
    } else {
        1
    };
    let width = upper / pieces as f64;
    let mut out = Quadrature {
        value: 0.0,
        abs_error: 0.0,
        subdivisions: 0,
    };
    // Each piece only needs a share of the absolute tolerance.
    let piece_tol = Tolerance {
        abs: tol.abs / pieces as f64,
        ..tol
    };
    for k in 0..pieces {
        let a = k as f64 * width;
        let b = if k + 1 == pieces { upper } else { a + width };
        let q = integrate(&f, a, b, piece_tol)?;
        out.value += q.value;
        out.abs_error += q.abs_error;
        out.subdivisions += q.subdivisions;
    }
    Ok(out)
}

/// Checks that `grid` starts at zero and is strictly increasing with at least
/// four points.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::Grid(format!("need at least 4 points, got {}", grid.len())));
    }
    if grid[0] != 0.0 {
        return Err(Error::Grid(format!("grid must start at 0, starts at {}", grid[0])));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::Grid(format!(
            "grid not strictly increasing at {} -> {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Uniform grid `0, h, 2h, ..., ≥ t_max` (the last point is exactly `n·h`).
pub fn uniform_grid(t_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(t_max > 0.0) || !step.is_finite() || !t_max.is_finite() {
        return Err(Error::Grid(format!("bad uniform grid t_max = {t_max}, step = {step}")));
    }
    let n = (t_max / step - 1e-9).ceil() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

/// Cumulative integral `∫₀^{t_i} f(s) ds` of a closed-form integrand, using
/// 5-point Gauss–Legendre on every grid interval.
pub fn cumulative_closed_form<F: Fn(f64) -> f64>(f: F, grid: &[f64]) -> Vec<f64> {
    try_cumulative_closed_form(|t| Ok(f(t)), grid).expect("infallible integrand")
}

/// Fallible variant of [`cumulative_closed_form`].
pub fn try_cumulative_closed_form<F: Fn(f64) -> Result<f64>>(f: F, grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    out.push(0.0);
    let mut acc = 0.0;
    for w in grid.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let half = 0.5 * (w[1] - w[0]);
        let mut piece = 0.0;
        for (x, wt) in GL5_X.iter().zip(GL5_W.iter()) {
            piece += wt * f(mid + half * x)?;
        }
        acc += piece * half;
        out.push(acc);
    }
    Ok(out)
}

/// Index of the first of four consecutive points used for a local cubic on
/// interval `[grid[i], grid[i+1]]`.
fn stencil_start(i: usize, n: usize) -> usize {
    if i == 0 {
        0
    } else if i + 2 >= n {
        n - 4
    } else {
        i - 1
    }
}

/// Value at `t` of the cubic through four samples.
fn lagrange4(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let mut sum = 0.0;
    for j in 0..4 {
        let mut basis = 1.0;
        for m in 0..4 {
            if m != j {
                basis *= (t - xs[m]) / (xs[j] - xs[m]);
            }
        }
        sum += ys[j] * basis;
    }
    sum
}

/// Cumulative integral of sampled values using, on each interval, the cubic
/// through the four nearest samples (fourth-order accurate; requires ≥ 4 points).
pub fn cumulative_sampled(grid: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(grid.len(), values.len());
    let n = grid.len();
    assert!(n >= 4, "cumulative_sampled needs at least 4 points");
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 0..n - 1 {
        acc += interval_integral(grid, values, i, grid[i], grid[i + 1]);
        out.push(acc);
    }
    out
}

/// Integral over `[a, b] ⊆ [grid[i], grid[i+1]]` of the local cubic for interval `i`.
pub fn interval_integral(grid: &[f64], values: &[f64], i: usize, a: f64, b: f64) -> f64 {
    let s = stencil_start(i, grid.len());
    let xs = &grid[s..s + 4];
    let ys = &values[s..s + 4];
    // two-point Gauss is exact for cubics
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let off = half / 3f64.sqrt();
    half * (lagrange4(xs, ys, mid - off) + lagrange4(xs, ys, mid + off))
}

/// Local-cubic interpolation of sampled values at `t` (clamped extrapolation
/// is not performed; `t` must lie within the grid).
pub fn interpolate_cubic(grid: &[f64], values: &[f64], t: f64) -> f64 {
    let n = grid.len();
    debug_assert!(n >= 4);
    let i = locate(grid, t);
    let s = stencil_start(i, n);
    lagrange4(&grid[s..s + 4], &values[s..s + 4], t)
}

/// Local cubic on interval `i` evaluated at `t`.
pub fn cubic_on_interval(grid: &[f64], values: &[f64], i: usize, t: f64) -> f64 {
    let s = stencil_start(i, grid.len());
    lagrange4(&grid[s..s + 4], &values[s..s + 4], t)
}

/// Interval index `i` with `grid[i] ≤ t ≤ grid[i+1]` (clamped to the ends).
pub fn locate(grid: &[f64], t: f64) -> usize {
    let n = grid.len();
    match grid.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(n - 2),
    }
}
