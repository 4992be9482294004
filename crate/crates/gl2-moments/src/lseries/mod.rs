//! Smoothed Dirichlet series with explicit error budgets.
//!
//! Every evaluation uses the kernel e^{-m/X}; the Mellin dual is Gamma(w),
//! so a smoothed sum at scale X differs from the value by a series in
//! 1/X that is removed by extrapolation over a ladder of scales.

mod fixed;
mod twisted;

pub use fixed::{
    cf_derivative, euler_removed, rankin_L, rankin_L1, rankin_L1_coprime, rankin_residue_two_sided, stencil_derivative,
    symsq_L1, EulerKind,
};
pub use twisted::{twisted_central_value, ClassSums, LadderPolicy};

use crate::error::{Error, Result};
use crate::numeric::{zeta_real, KahanC};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothedEstimate {
    pub value: Complex64,
    pub error_bound: f64,
    pub x_ladder: Vec<f64>,
    pub truncation: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EulerProductEstimate {
    pub value: Complex64,
    pub prime_cutoff: u64,
    pub tail_bound: f64,
}

/// M = ceil(X (39 + ln X)): past M the kernel is below 1e-17.
pub fn truncation(x: f64) -> u64 {
    (x * (39.0 + x.ln())).ceil() as u64
}

/// Sum of c(m) m^{-s} e^{-m/X} for m <= M, increasing m, compensated.
pub fn smoothed_series<F>(mut c: F, s: Complex64, x: f64) -> Result<SmoothedEstimate>
where
    F: FnMut(u64) -> Result<Complex64>,
{
    if !(x >= 1.0) {
        return Err(Error::Domain(format!("smoothing scale X={x} must be >= 1")));
    }
    let m_max = truncation(x);
    let mut acc = KahanC::new();
    let mut cmax = 0.0f64;
    for m in 1..=m_max {
        let cm = c(m)?;
        if cm == Complex64::new(0.0, 0.0) {
            continue;
        }
        cmax = cmax.max(cm.norm());
        let lm = (m as f64).ln();
        acc.add(cm * (-s * lm).exp() * (-(m as f64) / x).exp());
    }
    let mf = m_max as f64;
    let tail = zeta_real(2.0) * cmax * (-mf / x).exp() * mf;
    Ok(SmoothedEstimate { value: acc.value(), error_bound: tail, x_ladder: vec![x], truncation: m_max })
}

/// Neville interpolation at h = 0 through the points (h_i, v_i).
pub fn neville_at_zero(h: &[f64], v: &[Complex64]) -> Complex64 {
    let n = h.len();
    let mut p = v.to_vec();
    for level in 1..n {
        for i in 0..n - level {
            let j = i + level;
            p[i] = (h[j] * p[i] - h[i] * p[i + 1]) / (h[j] - h[i]);
        }
    }
    p[0]
}

/// Extrapolate X -> infinity through estimates taken at increasing X.
///
/// The value interpolates all points in h = 1/X; the residual is its
/// disagreement with the interpolant that drops the smallest X. Input
/// error bounds are propagated through the Lagrange weights.
pub fn extrapolate(points: &[(f64, SmoothedEstimate)]) -> Result<SmoothedEstimate> {
    if points.len() < 3 {
        return Err(Error::LadderTooShort(points.len()));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Domain("ladder scales must increase".into()));
    }
    let h: Vec<f64> = points.iter().map(|(x, _)| 1.0 / x).collect();
    let v: Vec<Complex64> = points.iter().map(|(_, e)| e.value).collect();
    let full = neville_at_zero(&h, &v);
    let reduced = neville_at_zero(&h[1..], &v[1..]);
    let weights = crate::numeric::lagrange_weights_at_zero(&h);
    let propagated: f64 = weights.iter().zip(points).map(|(w, (_, e))| w.abs() * e.error_bound).sum();
    Ok(SmoothedEstimate {
        value: full,
        error_bound: (full - reduced).norm() + propagated,
        x_ladder: points.iter().map(|(x, _)| *x).collect(),
        truncation: points.iter().map(|(_, e)| e.truncation).max().unwrap_or(0),
    })
}
