//! Closed-form main terms of the second moment and the Euler products
//! that feed them.
//!
//! Everything linear in L(1, f x g) (or L(1, f, sym^2)) is computed as a
//! unit coefficient first, so the error of the L-value propagates exactly.

use crate::arith::{divisors, factor, gcd, is_squarefree, mobius, prime_omega, primes_up_to};
use crate::error::{Error, Result};
use crate::lseries::{
    cf_derivative, euler_removed, rankin_L, rankin_L1, symsq_L1, EulerKind, EulerProductEstimate, SmoothedEstimate,
};
use crate::modforms::{satake, HeckeEigenform};
use crate::numeric::{gamma, harmonic, zeta_real};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Default prime cutoff for the infinite Euler products.
pub const PRIME_CUTOFF: u64 = 100_000;
const LEHMER_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MainTerm {
    pub value: Complex64,
    pub error_bound: f64,
}

impl MainTerm {
    fn scaled(unit: Complex64, l: &SmoothedEstimate) -> Self {
        MainTerm { value: unit * l.value, error_bound: unit.norm() * l.error_bound }
    }

    fn add(self, other: MainTerm) -> Self {
        MainTerm { value: self.value + other.value, error_bound: self.error_bound + other.error_bound }
    }
}

/// A form pair with its cached L-values. For f = g the Rankin value is
/// replaced by L(1, f, sym^2) and the derivative of L(s, f, sym^2)/zeta(2s).
pub struct MainTermInputs<'a> {
    pub f: &'a HeckeEigenform,
    pub g: &'a HeckeEigenform,
    pub c2: Option<f64>,
    pub rankin: Option<SmoothedEstimate>,
    pub symsq: Option<SmoothedEstimate>,
    pub symsq_derivative: Option<SmoothedEstimate>,
}

impl<'a> MainTermInputs<'a> {
    pub fn pair(f: &'a HeckeEigenform, g: &'a HeckeEigenform) -> Result<Self> {
        let rankin = Some(rankin_L1(f, g)?);
        Ok(MainTermInputs { f, g, c2: None, rankin, symsq: None, symsq_derivative: None })
    }

    pub fn diagonal(f: &'a HeckeEigenform) -> Result<Self> {
        Ok(MainTermInputs {
            f,
            g: f,
            c2: None,
            rankin: None,
            symsq: Some(symsq_L1(f)?),
            symsq_derivative: Some(cf_derivative(f, 1, None)?),
        })
    }

    pub fn with_c2(mut self, c2: f64) -> Self {
        self.c2 = Some(c2);
        self
    }

    pub fn is_diagonal(&self) -> bool {
        self.f.label() == self.g.label()
    }

    pub fn level(&self) -> u64 {
        self.f.level()
    }

    fn rankin(&self) -> Result<&SmoothedEstimate> {
        self.rankin.as_ref().ok_or_else(|| Error::Domain("L(1, f x g) not available for a diagonal pair".into()))
    }

    fn symsq(&self) -> Result<&SmoothedEstimate> {
        self.symsq.as_ref().ok_or_else(|| Error::Domain("L(1, f, sym^2) not available for an off-diagonal pair".into()))
    }

    fn coprime(&self, q: u64) -> Result<()> {
        if q == 0 || gcd(q, self.level()) != 1 {
            return Err(Error::Domain(format!("modulus {q} must be positive and coprime to the level {}", self.level())));
        }
        Ok(())
    }
}

fn ln(p: u64) -> f64 {
    (p as f64).ln()
}

fn ppow(p: u64, e: u32) -> f64 {
    (p as f64).powi(e as i32)
}

fn squarefree_divisors(n: u64) -> Vec<u64> {
    divisors(n).into_iter().filter(|&d| mobius(d) != 0).collect()
}

/// H^{(2)}_{f,f}(q): the double divisor sum with A((d1,d2)) in the
/// denominator, minus the single sum with log d weights.
#[allow(non_snake_case)]
pub fn H2_ff(f: &HeckeEigenform, q: u64) -> Result<f64> {
    if q == 0 || gcd(q, f.level()) != 1 {
        return Err(Error::Domain(format!("modulus {q} must be coprime to the level {}", f.level())));
    }
    let fq = factor(q);
    let alpha = |p: u64| fq.valuation(p);
    let mut first = Complex64::new(0.0, 0.0);
    for d in squarefree_divisors(q) {
        let ad = f.coefficient_any(d)?;
        let mut inner = Complex64::new(0.0, 0.0);
        for d1 in divisors(d) {
            for d2 in divisors(d) {
                let g = gcd(d1, d2);
                let ag = f.coefficient_any(g)?;
                if ag.norm() < LEHMER_GUARD {
                    return Err(Error::Lehmer { m: g });
                }
                let lcm = d1 / g * d2;
                let mut prod = 1.0;
                for p in factor(lcm / g).primes() {
                    prod /= p as f64 + 1.0;
                }
                let mut brace = 0.0;
                for p in factor(g).primes() {
                    brace += ln(p) * (ppow(p, alpha(p)).recip() + 0.5);
                }
                for p in factor(lcm).primes() {
                    let pf = p as f64;
                    brace -= ln(p) * (2.0 * pf - 1.0) / (2.0 * (pf - 1.0));
                    brace += ln(p) * ppow(p, alpha(p)).recip() * (3.0 * pf - 1.0) / (pf - 1.0);
                }
                let sign = (mobius(d1) * mobius(d2)) as f64;
                inner += sign * prod * brace / (g as f64 * ag);
            }
        }
        first += mobius(d) as f64 * ad * ad / d as f64 * inner;
    }
    let mut second = Complex64::new(0.0, 0.0);
    for d in squarefree_divisors(q) {
        let fd = factor(d);
        let mut w = ln(d);
        let mut prod = Complex64::new(1.0, 0.0);
        for p in fd.primes() {
            let pf = p as f64;
            w -= 2.0 * ln(p) / pf;
            let a2 = f.coefficient_any(p)?.powu(2);
            prod *= (a2 + (1.0 - a2) / pf + 1.0 / (pf * pf)) / (1.0 + 1.0 / pf);
        }
        second += mobius(d) as f64 / d as f64 * w * prod;
    }
    Ok((0.5 * first - second).re)
}

/// The pieces of H_{f,f}(q). The whole expression is affine in C2:
/// value = fixed + c2_coefficient * C2.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HffBreakdown {
    pub q: u64,
    /// 2 prod(1 - 1/p) L^{(q)}(1, sym^2) / zeta^{(q)}(2)
    pub log_q_coefficient: f64,
    pub c2_coefficient: f64,
    /// brace without C2, times the same prefactor
    pub constant: f64,
    pub h2_term: f64,
    pub derivative_term: f64,
    pub fixed: f64,
    pub c2: Option<f64>,
    pub error_bound: f64,
}

impl HffBreakdown {
    pub fn value_with(&self, c2: f64) -> f64 {
        self.fixed + self.c2_coefficient * c2
    }

    /// Value at the attached C2, if one is attached.
    pub fn value(&self) -> Option<f64> {
        self.c2.map(|c| self.value_with(c))
    }
}

/// Local factor at s of L^{(q)}(s, sym^2)/zeta^{(q)}(2s) prod (1 - p^{-s})
/// relative to L(s, sym^2)/zeta(2s), and its logarithmic derivative.
fn cf_local(f: &HeckeEigenform, q: u64) -> Result<(f64, f64)> {
    let mut value = Complex64::new(1.0, 0.0);
    let mut dlog = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    for p in factor(q).primes() {
        let x = 1.0 / p as f64;
        let l = ln(p);
        let a = satake(f.coefficient(p)?).alpha;
        for c in [a * a, one, one / (a * a)] {
            value *= one - c * x;
            dlog += c * l * x / (one - c * x);
        }
        value *= (1.0 - x) / (1.0 - x * x);
        dlog += l * x / (1.0 - x) - 2.0 * l * x * x / (1.0 - x * x);
    }
    Ok((value.re, dlog.re))
}

/// H_{f,f}(q) for a level-1 form, split into its parts.
#[allow(non_snake_case)]
pub fn H_ff(inputs: &MainTermInputs<'_>, q: u64) -> Result<HffBreakdown> {
    inputs.coprime(q)?;
    let f = inputs.f;
    let sym = inputs.symsq()?;
    let deriv = inputs
        .symsq_derivative
        .as_ref()
        .ok_or_else(|| Error::Domain("derivative of L(s, sym^2)/zeta(2s) not cached".into()))?;
    let l = sym.value.re;
    let z2 = zeta_real(2.0);
    let one = Complex64::new(1.0, 0.0);
    let primes: Vec<u64> = factor(q).primes().collect();
    let fq = factor(q);
    let p_factor: f64 = primes.iter().map(|&p| 1.0 - 1.0 / p as f64).product();
    let loc_sym = euler_removed(EulerKind::Symsq(f), q, one)?.re;
    let loc_zeta = euler_removed(EulerKind::Zeta, q, Complex64::new(2.0, 0.0))?.re;
    let unit = p_factor * loc_sym / (z2 * loc_zeta);
    let mut brace = harmonic(f.weight() as u64 - 1) - (8.0 * PI).ln();
    for p in factor(f.level()).primes() {
        let pf = p as f64;
        brace += ln(p) * (4.0 * pf - 1.0) / (4.0 * (pf - 1.0));
    }
    for &(p, a) in &fq.factors {
        brace -= 2.0 * ln(p) * (1.0 - ppow(p, a).recip()) / (p as f64 - 1.0);
    }
    let h2 = H2_ff(f, q)?;
    let (loc1, dlog) = cf_local(f, q)?;
    let g1 = l / z2;
    let cq = deriv.value.re * loc1 + g1 * loc1 * dlog;
    let log_q_coefficient = 2.0 * unit * l;
    let constant = unit * l * brace;
    let h2_term = h2 * g1;
    let derivative_term = 2.0 * cq;
    let fixed = log_q_coefficient * (q as f64).ln() + constant + h2_term + derivative_term;
    let c2_coefficient = 2.0 * unit * l;
    // everything but the derivative part is proportional to L
    let c2 = inputs.c2.unwrap_or(0.0);
    let linear = (fixed - derivative_term + c2_coefficient * c2) / l;
    let error_bound = linear.abs() * sym.error_bound
        + 2.0 * (loc1.abs() * deriv.error_bound + (loc1 * dlog).abs() * sym.error_bound / z2);
    Ok(HffBreakdown {
        q,
        log_q_coefficient,
        c2_coefficient,
        constant,
        h2_term,
        derivative_term,
        fixed,
        c2: inputs.c2,
        error_bound,
    })
}

fn check_ells(n0: u64, l1: u64, l2: u64) -> Result<()> {
    for l in [l1, l2] {
        if l == 0 || !is_squarefree(l) || gcd(l, n0) != 1 {
            return Err(Error::Domain(format!("shift {l} must be square-free and coprime to the level {n0}")));
        }
    }
    Ok(())
}

/// H^{(1)}(Q; l1, l2) divided by L(1, f x g), with fa in the A-role and fb
/// in the B-role.
fn h1_unit(fa: &HeckeEigenform, fb: &HeckeEigenform, q: u64, l1: u64, l2: u64) -> Result<Complex64> {
    let n0 = fa.level();
    check_ells(n0, l1, l2)?;
    let g12 = gcd(l1, l2);
    let n = n0 * (l1 / g12) * l2;
    let r = prime_omega(n);
    let fq = factor(q);
    let outside: f64 = fq.factors.iter().filter(|&&(p, _)| n % p != 0).map(|&(p, a)| ppow(p, a)).product();
    let ell_primes: Vec<u64> = factor(l1 / g12 * l2).primes().collect();
    let mut sum = Complex64::new(0.0, 0.0);
    for a in divisors(n) {
        let inside: f64 = factor(a).primes().map(|p| ppow(p, fq.valuation(p)) - 1.0).product();
        let t = 0.5f64.powi(r as i32) + inside * outside / q as f64;
        let m = n0 / gcd(a, n0);
        let mut c = m as f64 * fa.coefficient_any(m)? * fb.coefficient_any(m)?.conj();
        for &p in &ell_primes {
            let (in1, in2, ina) = ((l1 % p == 0) as i32, (l2 % p == 0) as i32, (a % p == 0) as i32);
            let e1 = in1 + ina * in2 - in1 * in2 - ina * in1;
            let e2 = in2 + ina * in1 - in1 * in2 - ina * in2;
            let (pa, pb) = (fa.coefficient(p)?, fb.coefficient(p)?);
            let pf = p as f64;
            let den = 1.0 - 1.0 / (pf * pf);
            if e1 > 0 {
                c *= (pa - pb / pf) / den;
            }
            if e2 > 0 {
                c *= (pb - pa / pf) / den;
            }
        }
        sum += t * c;
    }
    Ok(0.25 * g12 as f64 / (l1 * l2) as f64 * sum)
}

fn off_diagonal(inputs: &MainTermInputs<'_>) -> Result<()> {
    if inputs.is_diagonal() {
        return Err(Error::Domain("this main term is defined for f != g".into()));
    }
    Ok(())
}

/// H^{(1)}_{f,g}(Q; l1, l2).
#[allow(non_snake_case)]
pub fn H1_fg(inputs: &MainTermInputs<'_>, q: u64, l1: u64, l2: u64) -> Result<MainTerm> {
    off_diagonal(inputs)?;
    inputs.coprime(q)?;
    Ok(MainTerm::scaled(h1_unit(inputs.f, inputs.g, q, l1, l2)?, inputs.rankin()?))
}

/// H^{(1)}_{g,f}(Q; l1, l2): roles exchanged, L(1, g x f) = conj L(1, f x g).
#[allow(non_snake_case)]
pub fn H1_gf(inputs: &MainTermInputs<'_>, q: u64, l1: u64, l2: u64) -> Result<MainTerm> {
    off_diagonal(inputs)?;
    inputs.coprime(q)?;
    let unit = h1_unit(inputs.g, inputs.f, q, l1, l2)?;
    let l = inputs.rankin()?;
    Ok(MainTerm { value: unit * l.value.conj(), error_bound: unit.norm() * l.error_bound })
}

fn sieved_unit(fa: &HeckeEigenform, fb: &HeckeEigenform, q: u64) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for d in squarefree_divisors(q) {
        let mut inner = Complex64::new(0.0, 0.0);
        for d1 in divisors(d) {
            for d2 in divisors(d) {
                let sign = (mobius(d1) * mobius(d2)) as f64;
                let c = fa.coefficient_any(d / d1)? * fb.coefficient_any(d / d2)?.conj();
                inner += sign * c * h1_unit(fa, fb, q / d, d1, d2)?;
            }
        }
        acc += mobius(d) as f64 / d as f64 * inner;
    }
    Ok(acc)
}

/// H^{(1)}_{f,g}(Q) = sum_{d|Q} mu(d)/d sum_{d1,d2|d} mu mu A(d/d1) conj B(d/d2) H^{(1)}_{f,g}(Q/d; d1, d2).
#[allow(non_snake_case)]
pub fn H1_fg_sieved(inputs: &MainTermInputs<'_>, q: u64) -> Result<MainTerm> {
    off_diagonal(inputs)?;
    inputs.coprime(q)?;
    Ok(MainTerm::scaled(sieved_unit(inputs.f, inputs.g, q)?, inputs.rankin()?))
}

#[allow(non_snake_case)]
pub fn H1_gf_sieved(inputs: &MainTermInputs<'_>, q: u64) -> Result<MainTerm> {
    off_diagonal(inputs)?;
    inputs.coprime(q)?;
    let unit = sieved_unit(inputs.g, inputs.f, q)?;
    let l = inputs.rankin()?;
    Ok(MainTerm { value: unit * l.value.conj(), error_bound: unit.norm() * l.error_bound })
}

/// L^{(Q)}(1, f x g) + H^{(1)}_{f,g}(Q) + H^{(1)}_{g,f}(Q).
pub fn prediction_fneq(inputs: &MainTermInputs<'_>, q: u64) -> Result<MainTerm> {
    off_diagonal(inputs)?;
    inputs.coprime(q)?;
    let local = euler_removed(EulerKind::Rankin(inputs.f, inputs.g), q, Complex64::new(1.0, 0.0))?;
    let lq = MainTerm::scaled(local, inputs.rankin()?);
    Ok(lq.add(H1_fg_sieved(inputs, q)?).add(H1_gf_sieved(inputs, q)?))
}

/// H_{f,f}(Q, C2); needs a calibrated C2.
pub fn prediction_ff(inputs: &MainTermInputs<'_>, q: u64) -> Result<MainTerm> {
    let c2 = inputs.c2.ok_or_else(|| Error::Domain("C2 has not been calibrated".into()))?;
    let h = H_ff(inputs, q)?;
    Ok(MainTerm { value: Complex64::new(h.value_with(c2), 0.0), error_bound: h.error_bound })
}

/// Which constant term the local factor E_p carries: the displayed
/// polynomial ends in p^{-4}; the generating-function identity for
/// sum L^{(q)}(1) q^{-v} needs p^{-4-v} there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EpForm {
    Displayed,
    Consistent,
}

/// E_p(v; f, g) as a polynomial in p^{-1} and p^{-v}. `b` and `b2` are
/// B(p) and B(p^2) (conjugated here).
pub fn e_p(p: u64, v: Complex64, a: Complex64, b: Complex64, a2: Complex64, b2: Complex64, form: EpForm) -> Complex64 {
    let pf = p as f64;
    let x = 1.0 / pf;
    let y = (-v * pf.ln()).exp();
    let ab = a * b.conj();
    let last = match form {
        EpForm::Displayed => Complex64::new(x.powi(4), 0.0),
        EpForm::Consistent => x.powi(4) * y,
    };
    1.0 - x * x + x * x * y - x * y * ab + x * x * y * (a2 + b2.conj()) - x.powi(3) * y * ab + last
}

/// sum_{p > P} C p^{-beta} <= C P^{1-beta} / ((beta - 1) log P).
fn prime_tail(c: f64, beta: f64, cutoff: u64) -> f64 {
    let p = cutoff as f64;
    c * p.powf(1.0 - beta) / ((beta - 1.0) * p.ln())
}

/// E^{(N0)}_{f,g}(v) = prod_{p not dividing N0, p <= P} E_p(v), with the
/// tail of the product bounded through |E_p - 1| <= 12 p^{-min(2, 1 + Re v)}.
#[allow(non_snake_case)]
pub fn E_N0(f: &HeckeEigenform, g: &HeckeEigenform, v: Complex64, form: EpForm, cutoff: u64) -> Result<EulerProductEstimate> {
    if v.re <= 0.0 {
        return Err(Error::Domain(format!("the product converges absolutely only for Re v > 0, got {v}")));
    }
    let n0 = f.level();
    let mut acc = Complex64::new(1.0, 0.0);
    for p in primes_up_to(cutoff as usize) {
        if n0 % p == 0 {
            continue;
        }
        acc *= e_p(p, v, f.coefficient(p)?, g.coefficient(p)?, f.prime_power(p, 2)?, g.prime_power(p, 2)?, form);
    }
    let beta = (1.0 + v.re).min(2.0);
    let t = prime_tail(12.0, beta, cutoff);
    Ok(EulerProductEstimate { value: acc, prime_cutoff: cutoff, tail_bound: acc.norm() * t.exp_m1() })
}

/// L(1, f x g) zeta^{(N0)}(v) / zeta^{(N0)}(2) E^{(N0)}(v), the claimed
/// value of sum_{(q,N0)=1} L^{(q)}(1, f x g) q^{-v}. With the consistent
/// local factor the correct normalization multiplies by zeta^{(N0)}(2)
/// instead, which is what `EpForm::Consistent` returns.
pub fn lq_dirichlet_series(inputs: &MainTermInputs<'_>, v: f64, form: EpForm, cutoff: u64) -> Result<MainTerm> {
    off_diagonal(inputs)?;
    let n0 = inputs.level();
    let zn0 = |s: f64| zeta_real(s) * factor(n0).primes().map(|p| 1.0 - (p as f64).powf(-s)).product::<f64>();
    let e = E_N0(inputs.f, inputs.g, Complex64::new(v, 0.0), form, cutoff)?;
    let norm = match form {
        EpForm::Displayed => zn0(v) / zn0(2.0),
        EpForm::Consistent => zn0(v) * zn0(2.0),
    };
    let l = inputs.rankin()?;
    let unit = norm * e.value;
    Ok(MainTerm { value: unit * l.value, error_bound: unit.norm() * l.error_bound + norm * e.tail_bound * l.value.norm() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThmMainRhs {
    pub y: f64,
    pub first_piece: Complex64,
    pub second_piece: Complex64,
    pub value: Complex64,
    pub error_bound: f64,
    pub prime_cutoff: u64,
    pub tail_bound: f64,
}

/// Right-hand side of the short-interval average for f != g, evaluated as
/// displayed. `y = f64::INFINITY` gives the limit form.
pub fn thm_main_rhs_fneq(inputs: &MainTermInputs<'_>, y: f64, cutoff: u64) -> Result<ThmMainRhs> {
    rhs_fneq(inputs, y, cutoff, EpForm::Displayed)
}

fn rhs_fneq(inputs: &MainTermInputs<'_>, y: f64, cutoff: u64, form: EpForm) -> Result<ThmMainRhs> {
    off_diagonal(inputs)?;
    if !(y >= 1.0) {
        return Err(Error::Domain(format!("y must be >= 1, got {y}")));
    }
    let (f, g) = (inputs.f, inputs.g);
    let l = inputs.rankin()?;
    let n0 = inputs.level();
    let bad: Vec<u64> = factor(n0).primes().collect();
    let ey = if y.is_infinite() { 1.0 } else { (PI / (y * y)).exp() };
    let res: f64 = bad.iter().map(|&p| 1.0 - 1.0 / p as f64).product();
    let z2: f64 = zeta_real(2.0) * bad.iter().map(|&p| 1.0 - 1.0 / (p * p) as f64).product::<f64>();
    let e1 = E_N0(f, g, Complex64::new(1.0, 0.0), form, cutoff)?;
    let first_unit = match form {
        EpForm::Displayed => ey * res / z2 * e1.value,
        EpForm::Consistent => ey * res * z2 * e1.value,
    };
    let first_tail = first_unit.norm() / e1.value.norm().max(f64::MIN_POSITIVE) * e1.tail_bound;

    let mut pref = Complex64::new(1.0, 0.0);
    for &p in &bad {
        let pf = p as f64;
        pref *= (pf * f.coefficient(p)? * g.coefficient(p)?.conj() + 1.0) * (1.0 - 1.0 / pf);
    }
    let (mut p1, mut p2) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    for p in primes_up_to(cutoff as usize) {
        if n0 % p == 0 {
            continue;
        }
        let pf = p as f64;
        let (a, b) = (f.coefficient(p)?, g.coefficient(p)?.conj());
        let x2 = 1.0 / (pf * pf);
        match form {
            EpForm::Displayed => {
                p1 *= 1.0 - x2 * (a * b - (a + b) * (a + b) / (1.0 + 1.0 / pf) + 1.0);
                p2 *= 1.0 - x2 * (a * b - (a * a + b * b) / (pf + 1.0) + 1.0 / pf);
            }
            EpForm::Consistent => {
                p1 *= 1.0 - x2 * (a * b - (a + b) * (a + b) / (2.0 * (pf + 1.0)) + 1.0 / pf);
                p2 *= 1.0 - x2 * (a * b * (pf - 1.0) / (pf + 1.0) + 1.0 / pf);
            }
        }
    }
    let t1 = prime_tail(21.0, 2.0, cutoff).exp_m1();
    let t2 = prime_tail(9.0, 2.0, cutoff).exp_m1();
    let r = 0.5f64.powi(bad.len() as i32);
    let second_unit = 0.5 * ey * pref * (r * p1 + p2);
    let second_tail = 0.5 * ey * pref.norm() * (r * p1.norm() * t1 + p2.norm() * t2);

    let unit = first_unit + second_unit;
    let tail = (first_tail + second_tail) * l.value.norm();
    Ok(ThmMainRhs {
        y,
        first_piece: first_unit * l.value,
        second_piece: second_unit * l.value,
        value: unit * l.value,
        error_bound: unit.norm() * l.error_bound + tail,
        prime_cutoff: cutoff,
        tail_bound: tail,
    })
}

/// The same right-hand side re-derived from its ingredients (level 1):
/// the first piece with the consistent E_p and zeta(2) normalization, the
/// second with the local factors that averaging H^{(1)} over q produces,
///   1 - p^{-2}(AB - (A + B)^2 / (2(p + 1)) + 1/p)   and
///   1 - p^{-2}(AB (p - 1)/(p + 1) + 1/p),
/// and both scaled by the 2 pi the Gaussian contour integral produces.
pub fn thm_main_rhs_fneq_rederived(inputs: &MainTermInputs<'_>, y: f64, cutoff: u64) -> Result<ThmMainRhs> {
    if inputs.level() != 1 {
        return Err(Error::Unsupported("the re-derived average is worked out for level 1".into()));
    }
    let mut r = rhs_fneq(inputs, y, cutoff, EpForm::Consistent)?;
    let tau = 2.0 * PI;
    r.first_piece *= tau;
    r.second_piece *= tau;
    r.value *= tau;
    r.error_bound *= tau;
    r.tail_bound *= tau;
    Ok(r)
}

/// e^{-y^2 (log(Q/q))^2 / (4 pi)}.
pub fn gaussian_weight(q: f64, big_q: f64, y: f64) -> f64 {
    let t = (big_q / q).ln();
    (-y * y * t * t / (4.0 * PI)).exp()
}

/// Largest q at which the Gaussian weight is still above 1e-18.
pub fn gaussian_support(big_q: f64, y: f64) -> f64 {
    let t = (4.0 * PI * 18.0 * std::f64::consts::LN_10).sqrt() / y;
    big_q * t.exp()
}

/// (y/Q) sum_{(q,N0)=1} prediction_fneq(q) w(q): the short-interval average
/// of the Z-free main terms, summed directly.
pub fn weighted_prediction_average(inputs: &MainTermInputs<'_>, big_q: f64, y: f64) -> Result<MainTerm> {
    off_diagonal(inputs)?;
    let top = gaussian_support(big_q, y).ceil() as u64;
    let n0 = inputs.level();
    let mut acc = MainTerm { value: Complex64::new(0.0, 0.0), error_bound: 0.0 };
    for q in 1..=top {
        if gcd(q, n0) != 1 {
            continue;
        }
        let w = gaussian_weight(q as f64, big_q, y);
        let p = prediction_fneq(inputs, q)?;
        acc.value += w * p.value;
        acc.error_bound += w * p.error_bound;
    }
    let s = y / big_q;
    Ok(MainTerm { value: acc.value * s, error_bound: acc.error_bound * s })
}

/// Res_{s=1} L(s, f x f; l1, l2) for level 1.
pub fn res_rankin(inputs: &MainTermInputs<'_>, l1: u64, l2: u64) -> Result<MainTerm> {
    let f = inputs.f;
    check_ells(f.level(), l1, l2)?;
    if f.level() != 1 {
        return Err(Error::Unsupported("the residue formula is wired for level 1".into()));
    }
    let g = gcd(l1, l2);
    let m = l1 / g * (l2 / g);
    let mut unit = f.coefficient_any(m)? / g as f64;
    for p in factor(m).primes() {
        unit /= p as f64 + 1.0;
    }
    unit /= zeta_real(2.0);
    Ok(MainTerm::scaled(unit, inputs.symsq()?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerProductMode {
    Value,
    /// residue at s = 1 of the right-hand side (f = g, level 1)
    Residue,
}

/// vol * conj <V_{l1,l2}, E_{1/a}(., s)> in closed form.
pub fn inner_product_rhs(
    f: &HeckeEigenform,
    g: &HeckeEigenform,
    s: f64,
    a: u64,
    l1: u64,
    l2: u64,
    mode: InnerProductMode,
) -> Result<MainTerm> {
    let n0 = f.level();
    check_ells(n0, l1, l2)?;
    let g12 = gcd(l1, l2);
    let n = n0 * (l1 / g12) * l2;
    if a == 0 || n % a != 0 {
        return Err(Error::Domain(format!("cusp parameter {a} must divide N = {n}")));
    }
    let k = f.weight() as f64;
    let m = n0 / gcd(a, n0);
    let mut unit = m as f64 * f.coefficient_any(m)? * g.coefficient_any(m)?.conj();
    unit *= ((l1 * l2) as f64).powf(-s - (k - 1.0) / 2.0)
        * (g12 as f64).powf(2.0 * s - 1.0)
        * (gcd(a, g12) as f64).powf(1.0 - s);
    for p in factor(l1 / g12 * l2).primes() {
        let (in1, in2, ina) = ((l1 % p == 0) as i32, (l2 % p == 0) as i32, (a % p == 0) as i32);
        let e1 = in1 + ina * in2 - in1 * in2 - ina * in1;
        let e2 = in2 + ina * in1 - in1 * in2 - ina * in2;
        let x = (p as f64).powf(-s);
        let (pa, pb) = (f.coefficient(p)?, g.coefficient(p)?);
        if e1 > 0 {
            unit *= (pa - pb * x) / (1.0 - x * x);
        }
        if e2 > 0 {
            unit *= (pb - pa * x) / (1.0 - x * x);
        }
    }
    let sg = s + k - 1.0;
    unit *= gamma(Complex64::new(sg, 0.0)).re / (4.0 * PI).powf(sg);
    let l = match mode {
        InnerProductMode::Value => rankin_L(f, g, s)?,
        InnerProductMode::Residue => {
            if f.label() != g.label() || s != 1.0 {
                return Err(Error::Domain("residue mode is for f = g at s = 1".into()));
            }
            let sym = symsq_L1(f)?;
            let z2 = zeta_real(2.0);
            SmoothedEstimate { value: sym.value / z2, error_bound: sym.error_bound / z2, ..sym }
        }
    };
    Ok(MainTerm::scaled(unit, &l))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct C2Fit {
    pub c2: f64,
    pub std_error: f64,
    pub points: usize,
    pub residual_rms: f64,
}

/// Least-squares C2 from measured moments: S(Q) - fixed(Q) = c2_coefficient(Q) C2.
pub fn calibrate_c2(samples: &[(HffBreakdown, f64)]) -> Result<C2Fit> {
    if samples.len() < 2 {
        return Err(Error::TooFewPoints { have: samples.len(), need: 2 });
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (h, s) in samples {
        sxx += h.c2_coefficient * h.c2_coefficient;
        sxy += h.c2_coefficient * (s - h.fixed);
    }
    let c2 = sxy / sxx;
    let ss: f64 = samples.iter().map(|(h, s)| (s - h.value_with(c2)).powi(2)).sum();
    let n = samples.len();
    let sigma2 = ss / (n - 1) as f64;
    Ok(C2Fit { c2, std_error: (sigma2 / sxx).sqrt(), points: n, residual_rms: (ss / n as f64).sqrt() })
}
