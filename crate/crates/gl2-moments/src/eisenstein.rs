//! Fourier coefficients of the Eisenstein series attached to the cusps of
//! Gamma_0(N), N square-free, and the Dirichlet series built from them.
//!
//! A cusp is labelled by a divisor a of N (the rational 1/a).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::arith::{factor, gcd, is_squarefree, ramanujan_sum};
use crate::numeric::zeta;
use crate::{Error, Result};

/// Distance to a pole of zeta below which `zeta_cusp_Q` refuses to evaluate.
pub const POLE_GUARD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CuspLabel {
    pub n: u64,
    pub a: u64,
}

impl CuspLabel {
    pub fn new(n: u64, a: u64) -> Result<Self> {
        if n == 0 || !is_squarefree(n) {
            return Err(Error::Domain(format!("level {n} is not square-free")));
        }
        if a == 0 || n % a != 0 {
            return Err(Error::Domain(format!("{a} does not divide {n}")));
        }
        Ok(CuspLabel { n, a })
    }

    /// All cusps of Gamma_0(N), ordered by a.
    pub fn all(n: u64) -> Result<Vec<Self>> {
        if n == 0 || !is_squarefree(n) {
            return Err(Error::Domain(format!("level {n} is not square-free")));
        }
        Ok(factor(n)
            .divisors()
            .into_iter()
            .map(|a| CuspLabel { n, a })
            .collect())
    }

    fn primes(&self) -> Vec<u64> {
        factor(self.n).factors.iter().map(|&(p, _)| p).collect()
    }
}

fn ppow(p: u64, z: Complex64) -> Complex64 {
    (z * (p as f64).ln()).exp()
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn valuation(p: u64, mut n: u64) -> u32 {
    let mut e = 0;
    while n % p == 0 {
        n /= p;
        e += 1;
    }
    e
}

/// rho_{1/a}(s, n) for n != 0 via the divisor formula. Re s > 1/2.
pub fn rho_cusp(cusp: CuspLabel, s: Complex64, n: i64) -> Result<Complex64> {
    if s.re <= 0.5 {
        return Err(Error::Domain(format!("Re s = {} <= 1/2", s.re)));
    }
    rho_cusp_continued(cusp, s, n)
}

/// Same formula without the half-plane check; it is the analytic
/// continuation of the Ramanujan-sum definition and is what the
/// h-series of `zeta_cusp_Q` is built from. Only ζ(2s) = 0 is refused.
pub fn rho_cusp_continued(cusp: CuspLabel, s: Complex64, n: i64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Domain("rho_cusp needs n != 0".into()));
    }
    let z2s = zeta(2.0 * s);
    if z2s.norm() < 1e-300 {
        return Err(Error::Domain(format!("zeta(2s) vanishes at s = {s}")));
    }
    let m = n.unsigned_abs();
    let one = c(1.0);
    let e = one - 2.0 * s;
    let mut div = one;
    for (p, k) in factor(m).factors {
        if cusp.n % p == 0 {
            continue;
        }
        let x = ppow(p, e);
        let mut t = one;
        let mut acc = one;
        for _ in 0..k {
            t *= x;
            acc += t;
        }
        div *= acc;
    }
    let mut v = ppow(cusp.n / cusp.a, -s) * div / z2s;
    for p in cusp.primes() {
        v /= one - ppow(p, -2.0 * s);
        if cusp.a % p == 0 {
            let alpha = valuation(p, m) as f64;
            let pf = p as f64;
            let local = pf - ppow(p, alpha * e + 1.0) - 1.0 + ppow(p, (alpha + 1.0) * e);
            v *= ppow(p, -2.0 * s) / (one - ppow(p, e)) * local;
        }
    }
    Ok(v)
}

/// Truncated Ramanujan-sum definition
///   (aN)^{-s} sum_{g <= gamma_max, (g, N/a) = 1} g^{-2s} c_{ga}(n),
/// with a bound on the omitted tail (|c_q(n)| <= |n|).
pub fn rho_cusp_bruteforce(
    cusp: CuspLabel,
    s: Complex64,
    n: i64,
    gamma_max: u64,
) -> Result<(Complex64, f64)> {
    if s.re <= 0.5 {
        return Err(Error::Domain(format!("Re s = {} <= 1/2", s.re)));
    }
    let na = cusp.n / cusp.a;
    let mut acc = Complex64::zero();
    for g in 1..=gamma_max {
        if gcd(g, na) != 1 {
            continue;
        }
        let r = ramanujan_sum(g * cusp.a, n);
        if r != 0 {
            acc += r as f64 * ppow(g, -2.0 * s);
        }
    }
    let pre = ppow(cusp.a * cusp.n, -s);
    let sig = 2.0 * s.re;
    let tail = pre.norm() * n.unsigned_abs() as f64 * (gamma_max as f64).powf(1.0 - sig)
        / (sig - 1.0);
    Ok((pre * acc, tail))
}

/// Constant term of the Eisenstein series at cusp 1/a (Re s > 1/2).
pub fn rho_cusp_const(cusp: CuspLabel, s: Complex64) -> Result<Complex64> {
    if s.re <= 0.5 {
        return Err(Error::Domain(format!("Re s = {} <= 1/2", s.re)));
    }
    let one = c(1.0);
    if (2.0 * s - 2.0).norm() < POLE_GUARD {
        return Err(Error::Domain("pole of zeta(2s-1) at s = 1".into()));
    }
    let phi_a = factor(cusp.a).factors.iter().map(|&(p, _)| p - 1).product::<u64>();
    let mut v = zeta(2.0 * s - 1.0) / zeta(2.0 * s) * phi_a as f64 * ppow(cusp.a * cusp.n, -s);
    for p in cusp.primes() {
        v /= one - ppow(p, -2.0 * s);
        if cusp.a % p != 0 {
            v *= one - ppow(p, one - 2.0 * s);
        }
    }
    Ok(v)
}

fn pole_check(w: Complex64, what: &str) -> Result<()> {
    if (w - 1.0).norm() < POLE_GUARD {
        return Err(Error::Domain(format!("{what} = {w} is within {POLE_GUARD} of the pole of zeta")));
    }
    Ok(())
}

/// Closed form of zeta_{1/a,Q}(s', tau). Q is assumed coprime to N/a;
/// tau = 0 is a removable singularity of the local factors and is refused.
#[allow(non_snake_case)]
pub fn zeta_cusp_Q(cusp: CuspLabel, q: u64, sp: Complex64, tau: Complex64) -> Result<Complex64> {
    pole_check(sp + tau, "s'+tau")?;
    pole_check(sp - tau, "s'-tau")?;
    let (zp, zm) = (zeta(sp + tau), zeta(sp - tau));
    Ok(zp * zm * zeta_cusp_Q_finite(cusp, q, sp, tau)?)
}

/// Everything in the closed form except the two zeta factors.
#[allow(non_snake_case)]
pub fn zeta_cusp_Q_finite(
    cusp: CuspLabel,
    q: u64,
    sp: Complex64,
    tau: Complex64,
) -> Result<Complex64> {
    if q == 0 {
        return Err(Error::Domain("Q must be positive".into()));
    }
    if gcd(q, cusp.n / cusp.a) != 1 {
        return Err(Error::Domain(format!(
            "Q = {q} shares a factor with N/a = {}",
            cusp.n / cusp.a
        )));
    }
    if tau.norm() < POLE_GUARD {
        return Err(Error::Domain("tau = 0: local factors are 0/0".into()));
    }
    let one = c(1.0);
    let t2 = 2.0 * tau;
    let mut v = ppow(cusp.n / cusp.a, tau - 0.5) * ppow(q, -tau);
    for p in cusp.primes() {
        v /= one - ppow(p, t2 - 1.0);
        let xm = one - ppow(p, -(sp - tau));
        if cusp.a % p == 0 {
            let alpha = valuation(p, q) as f64;
            let xp = one - ppow(p, -(sp + tau));
            let pf = p as f64;
            v *= ppow(p, t2 - 1.0) / (one - ppow(p, t2))
                * ((pf - 1.0) * xm + ppow(p, alpha * t2) * (ppow(p, t2) - pf) * xp);
        } else {
            v *= xm;
        }
    }
    for (p, alpha) in factor(q).factors {
        if q == 1 || cusp.n % p == 0 {
            continue;
        }
        let xm = one - ppow(p, -(sp - tau));
        let xp = one - ppow(p, -(sp + tau));
        v *= (xm - ppow(p, (alpha as f64 + 1.0) * t2) * xp) / (one - ppow(p, t2));
    }
    Ok(v)
}

/// Truncated series zeta(1-2tau) Q^{-tau} sum_{h <= h_max} rho(1/2-tau, -hQ) h^{-s'-tau}.
/// The tail bound takes |rho(1/2-tau, -m)| <= C m^{2|Re tau| + 1/4} with C
/// read off the computed terms.
#[allow(non_snake_case)]
pub fn zeta_cusp_Q_bruteforce(
    cusp: CuspLabel,
    q: u64,
    sp: Complex64,
    tau: Complex64,
    h_max: u64,
) -> Result<(Complex64, f64)> {
    let growth = 2.0 * tau.re.abs() + 0.25;
    let decay = (sp + tau).re - growth;
    if decay <= 1.0 {
        return Err(Error::Domain(format!(
            "h-series does not converge absolutely: Re(s'+tau) = {}",
            (sp + tau).re
        )));
    }
    let s = c(0.5) - tau;
    let mut acc = Complex64::zero();
    let mut cmax = 0.0f64;
    for h in 1..=h_max {
        let m = (h * q) as i64;
        let r = rho_cusp_continued(cusp, s, -m)?;
        cmax = cmax.max(r.norm() / (m as f64).powf(growth));
        acc += r * ppow(h, -(sp + tau));
    }
    let pre = zeta(c(1.0) - 2.0 * tau) * ppow(q, -tau);
    let tail = pre.norm() * cmax * (q as f64).powf(growth) * (h_max as f64).powf(1.0 - decay)
        / (decay - 1.0);
    Ok((pre * acc, tail))
}

/// A number of the form coeff * sqrt(Q)^power.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalSqrt {
    pub coeff: BigRational,
    pub q: u64,
    pub power: i32,
}

impl RationalSqrt {
    pub fn to_f64(&self) -> f64 {
        self.coeff.to_f64().unwrap_or(f64::NAN) * (self.q as f64).sqrt().powi(self.power)
    }
}

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// z^+_{1/a,Q}(-1/2) = sqrt(Q) prod_{p | N} 1/(p+1).
pub fn z_plus_special(cusp: CuspLabel, q: u64) -> RationalSqrt {
    let coeff = cusp
        .primes()
        .into_iter()
        .fold(BigRational::one(), |acc, p| acc / rat(p + 1));
    RationalSqrt { coeff, q, power: 1 }
}

/// z^-_{1/a,Q}(1/2) = Q^{-1/2} prod_{p | a, p^al || Q} (p^al - 1) prod_{p^al || Q, p !| N} p^al.
pub fn z_minus_special(cusp: CuspLabel, q: u64) -> RationalSqrt {
    let mut coeff = BigRational::one();
    for p in cusp.primes() {
        if cusp.a % p == 0 {
            let pa = p.pow(valuation(p, q));
            coeff *= rat(pa - 1);
        }
    }
    for (p, al) in factor(q).factors {
        if q > 1 && cusp.n % p != 0 {
            coeff *= rat(p.pow(al));
        }
    }
    RationalSqrt { coeff, q, power: -1 }
}

/// (e(N) sum_a z^+ + sum_a z^-)/sqrt(Q), exactly. Q coprime to N is not
/// required here.
pub fn z_identity(n: u64, q: u64) -> Result<BigRational> {
    let cusps = CuspLabel::all(n)?;
    let e = frak_e(n)?;
    let mut plus = BigRational::zero();
    let mut minus = BigRational::zero();
    for cu in cusps {
        plus += z_plus_special(cu, q).coeff;
        minus += z_minus_special(cu, q).coeff;
    }
    Ok(e * plus + minus / rat(q))
}

/// e(N) = prod_{p | N} (p+1)/2.
pub fn frak_e(n: u64) -> Result<BigRational> {
    if n == 0 || !is_squarefree(n) {
        return Err(Error::Domain(format!("level {n} is not square-free")));
    }
    Ok(factor(n)
        .factors
        .iter()
        .fold(BigRational::one(), |acc, &(p, _)| acc * rat(p + 1) / rat(2)))
}

/// Finite part of the scattering matrix, rows and columns indexed by the
/// divisors of N in increasing order; a tensor product of 2x2 blocks.
pub fn scattering_matrix_finite(n: u64, s: Complex64) -> Result<Vec<Vec<Complex64>>> {
    let cusps = CuspLabel::all(n)?;
    let primes = factor(n).factors.iter().map(|&(p, _)| p).collect::<Vec<_>>();
    let one = c(1.0);
    let local = |p: u64| {
        let den = ppow(p, 2.0 * s) - one;
        let diag = (p as f64 - 1.0) / den;
        let off = ppow(p, s) * (one - ppow(p, one - 2.0 * s)) / den;
        (diag, off)
    };
    let blocks = primes.iter().map(|&p| (p, local(p))).collect::<Vec<_>>();
    Ok(cusps
        .iter()
        .map(|ca| {
            cusps
                .iter()
                .map(|cb| {
                    blocks.iter().fold(one, |acc, &(p, (d, o))| {
                        if (ca.a % p == 0) == (cb.a % p == 0) {
                            acc * d
                        } else {
                            acc * o
                        }
                    })
                })
                .collect()
        })
        .collect())
}

/// sum_b rho_{ab,finite}(1-s) = prod_{p | N} (p^s + 1)/(p^{1-s} + 1); independent of a.
pub fn scattering_row_sum(n: u64, s: Complex64) -> Result<Complex64> {
    if n == 0 || !is_squarefree(n) {
        return Err(Error::Domain(format!("level {n} is not square-free")));
    }
    let one = c(1.0);
    Ok(factor(n).factors.iter().fold(one, |acc, &(p, _)| {
        acc * (ppow(p, s) + one) / (ppow(p, one - s) + one)
    }))
}
