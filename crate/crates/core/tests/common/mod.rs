#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix4, Vector4};

pub fn rot(a: f64) -> Matrix2<f64> {
    let (s, c) = a.sin_cos();
    Matrix2::new(c, s, -s, c)
}

pub fn local(a: Matrix2<f64>, b: Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
    m
}

pub fn squeeze(r: f64) -> Matrix2<f64> {
    Matrix2::new((-r).exp(), 0.0, 0.0, r.exp())
}

/// Beam splitter mixing the two modes with angle `a`.
pub fn beam_splitter(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    let mut m = Matrix4::zeros();
    for q in 0..2 {
        m[(q, q)] = c;
        m[(q + 2, q + 2)] = c;
        m[(q, q + 2)] = s;
        m[(q + 2, q)] = -s;
    }
    m
}

/// σ = S diag(ν₁, ν₁, ν₂, ν₂) Sᵀ with S a product of local and two-mode
/// Gaussian unitaries.
pub fn random_covariance(p: &[f64; 10]) -> Matrix4<f64> {
    let [nu1, nu2, r1, r2, a1, a2, bs, r3, r4, a3] = *p;
    let s = local(rot(a3) * squeeze(r3), squeeze(r4))
        * beam_splitter(bs)
        * local(squeeze(r1) * rot(a1), rot(a2) * squeeze(r2));
    let d = Matrix4::from_diagonal(&Vector4::new(nu1, nu1, nu2, nu2));
    s * d * s.transpose()
}
