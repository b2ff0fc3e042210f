//! Special functions needed by the closed-form bath kernels.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Re z above which the asymptotic expansion is used directly.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

// B_{2k} for k = 1..8
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Complex trigamma function ψ′(z) = d²/dz² ln Γ(z).
///
/// Lifts the argument with ψ′(z) = ψ′(z+1) + 1/z² until Re z ≥ 10 and then
/// sums the Bernoulli asymptotic series. Arguments with Re z < 0 go through
/// the reflection formula first.
pub fn trigamma(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("trigamma of non-finite argument {z}")));
    }
    let nearest = z.re.round();
    if z.re <= 0.0 && z.im.abs() < 1e-12 && (z.re - nearest).abs() < 1e-12 {
        return Err(Error::TrigammaPole { re: z.re, im: z.im });
    }
    if z.re < 0.0 {
        // ψ′(z) = π²/sin²(πz) − ψ′(1 − z)
        let s = (z * PI).sin();
        let reflected = trigamma(Complex64::new(1.0, 0.0) - z)?;
        return Ok(PI * PI / (s * s) - reflected);
    }

    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < ASYMPTOTIC_THRESHOLD {
        acc += (z * z).inv();
        z += 1.0;
    }
    Ok(acc + asymptotic(z))
}

fn asymptotic(z: Complex64) -> Complex64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    // Horner over 1/z², innermost term first
    let mut series = Complex64::new(0.0, 0.0);
    for b in BERNOULLI_EVEN.iter().rev() {
        series = series * inv2 + b;
    }
    inv + inv2 * 0.5 + series * inv2 * inv
}
