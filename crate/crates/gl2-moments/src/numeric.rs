//! Floating-point kernels shared by the analytic modules: compensated sums,
//! zeta and gamma, polynomial extrapolation weights.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Kahan-Babuska (Neumaier) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct KahanC {
    re: Kahan,
    im: Kahan,
}

impl KahanC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut k = Kahan::new();
    for x in it {
        k.add(x);
    }
    k.value()
}

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_4;
// Stieltjes constants gamma_1, gamma_2
pub const STIELTJES_1: f64 = -0.072_815_845_483_676_724_860_586_375_874_901_3;
pub const STIELTJES_2: f64 = -0.009_690_363_192_872_318_484_530_386_035_217_5;

const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Riemann zeta for complex s != 1 (Euler-Maclaurin, 10 Bernoulli terms;
/// Laurent series within 1e-4 of the pole).
pub fn zeta(s: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let d = s - one;
    if d.norm() < 1e-4 {
        return one / d + EULER_GAMMA - STIELTJES_1 * d + 0.5 * STIELTJES_2 * d * d;
    }
    let n = 30.0 + 2.0 * s.im.abs() + 2.0 * (-s.re).max(0.0);
    let n = n.ceil() as u64;
    let mut acc = KahanC::new();
    for k in 1..n {
        acc.add(Complex64::new(k as f64, 0.0).powc(-s));
    }
    let nf = Complex64::new(n as f64, 0.0);
    let mut tail = nf.powc(one - s) / d + 0.5 * nf.powc(-s);
    // rising product s(s+1)...(s+2j-2) / (2j)!  times N^{-s-2j+1}
    let mut rise = s;
    let mut fact = 2.0;
    let mut npow = nf.powc(-s - one);
    for (j, b) in BERNOULLI.iter().enumerate() {
        tail += *b / fact * rise * npow;
        let j2 = 2.0 * (j as f64 + 1.0);
        rise *= (s + j2 - 1.0) * (s + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        npow /= nf * nf;
    }
    acc.value() + tail
}

pub fn zeta_real(s: f64) -> f64 {
    zeta(Complex64::new(s, 0.0)).re
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Complex Gamma (Lanczos, reflection for Re z < 1/2).
pub fn gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let pi = Complex64::new(PI, 0.0);
        return pi / ((pi * z).sin() * gamma(Complex64::new(1.0, 0.0) - z));
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// log Gamma for real x > 0 (Stirling after shifting to x >= 15).
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0;
    let mut y = x;
    while y < 15.0 {
        shift -= y.ln();
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    shift + (y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln() + series
}

/// Weights w_i with p(0) = sum w_i v_i for the interpolating polynomial
/// through (h_i, v_i).
pub fn lagrange_weights_at_zero(h: &[f64]) -> Vec<f64> {
    (0..h.len())
        .map(|i| {
            h.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &hj)| hj / (hj - h[i]))
                .product()
        })
        .collect()
}

pub fn harmonic(n: u64) -> f64 {
    kahan_sum((1..=n).map(|j| 1.0 / j as f64))
}

/// Least squares y ~ slope x + intercept; returns (slope, intercept, R^2).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Solve the small dense system `a x = b` by Gaussian elimination with
/// partial pivoting. `a` is row-major n x n.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c] == 0.0 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_known_values() {
        assert!((zeta_real(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta_real(0.0) + 0.5).abs() < 1e-13);
        assert!((zeta_real(-1.0) + 1.0 / 12.0).abs() < 1e-13);
        assert!((zeta_real(0.5) + 1.460_354_508_809_586_8).abs() < 1e-13);
        // either side of the Laurent switch, zeta(1 + d) - 1/d to 30 digits
        let a = zeta_real(1.0 + 0.99e-4) - 1.0 / 0.99e-4;
        let b = zeta_real(1.0 + 1.01e-4) - 1.0 / 1.01e-4;
        assert!((a - 0.577_222_866_352_143_998_674_665).abs() < 1e-11);
        assert!((b - 0.577_223_028_396_902_617_123_153).abs() < 1e-11);
        let z = zeta(Complex64::new(0.5, 14.134_725_141_734_693));
        assert!(z.norm() < 1e-9);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(Complex64::new(5.0, 0.0)).re - 24.0).abs() < 1e-11);
        assert!((gamma(Complex64::new(0.5, 0.0)).re - PI.sqrt()).abs() < 1e-14);
        assert!((ln_gamma(24.0) - (1..24).map(|j| (j as f64).ln()).sum::<f64>()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
    }
}
