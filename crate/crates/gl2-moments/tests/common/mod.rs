#![allow(dead_code)]

use gl2_moments::modforms::{level1_eigenforms, HeckeEigenform};
use std::path::PathBuf;

pub fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("coefficients")
}

pub fn level1(k: u32, bound: usize) -> Vec<HeckeEigenform> {
    level1_eigenforms(k, bound, Some(&cache_dir())).expect("level one eigenforms")
}

pub fn delta(bound: usize) -> HeckeEigenform {
    level1(12, bound).remove(0)
}

/// Closed-form central value for level one, root number +1:
/// L(1/2) = 2 sum A(n) n^{-1/2} Gamma(k/2, 2 pi n) / Gamma(k/2).
pub fn central_value_level1(f: &HeckeEigenform) -> f64 {
    let a = f.weight() / 2;
    let mut s = 0.0;
    for n in 1..60u64 {
        let x = 2.0 * std::f64::consts::PI * n as f64;
        let (mut term, mut acc) = (1.0, 1.0);
        for j in 1..a {
            term *= x / j as f64;
            acc += term;
        }
        s += f.coefficient(n).unwrap().re / (n as f64).sqrt() * (-x).exp() * acc;
    }
    2.0 * s
}
