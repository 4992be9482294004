//! L(1, f x g), L(1, f, sym^2), finite Euler factors and c_f(Q).

use super::{extrapolate, truncation, SmoothedEstimate};
use crate::arith::{factor, gcd};
use crate::error::{Error, Result};
use crate::modforms::{satake, HeckeEigenform};
use crate::numeric::{gamma, solve_dense, zeta, zeta_real, KahanC};
use num_complex::Complex64;

const BLOCK: usize = 2048;

/// Smoothed sums of coef[m] m^{-s} e^{-m/X} at every scale in one pass.
/// `coef[0]` is ignored; coef must reach the largest truncation.
pub(crate) fn multi_scale(coef: &[Complex64], s: Complex64, scales: &[f64]) -> Result<Vec<SmoothedEstimate>> {
    let truncs: Vec<u64> = scales.iter().map(|&x| truncation(x)).collect();
    let top = *truncs.iter().max().unwrap();
    if (coef.len() as u64) <= top {
        return Err(Error::CoefficientRange { needed: top, available: coef.len() as u64 - 1 });
    }
    let n = scales.len();
    let mut acc = vec![KahanC::new(); n];
    let mut mass = vec![0.0f64; n];
    let mut cmax = 0.0f64;
    let tables: Vec<Vec<f64>> = scales.iter().map(|x| (0..BLOCK).map(|i| (-(i as f64) / x).exp()).collect()).collect();
    let top = top as usize;
    let mut start = 1usize;
    let mut powers = vec![Complex64::new(0.0, 0.0); BLOCK];
    while start <= top {
        let end = (start + BLOCK - 1).min(top);
        for m in start..=end {
            let c = coef[m];
            cmax = cmax.max(c.norm());
            powers[m - start] = if s.im == 0.0 { c * (m as f64).powf(-s.re) } else { c * (-s * (m as f64).ln()).exp() };
        }
        for j in 0..n {
            let mj = truncs[j] as usize;
            if start > mj {
                continue;
            }
            let base = (-(start as f64) / scales[j]).exp();
            for m in start..=end.min(mj) {
                let t = powers[m - start] * (base * tables[j][m - start]);
                mass[j] += t.norm();
                acc[j].add(t);
            }
        }
        start = end + 1;
    }
    Ok((0..n)
        .map(|j| {
            let m = truncs[j] as f64;
            let tail = zeta_real(2.0) * cmax * (-m / scales[j]).exp() * m;
            SmoothedEstimate {
                value: acc[j].value(),
                error_bound: tail + 8.0 * f64::EPSILON * mass[j],
                x_ladder: vec![scales[j]],
                truncation: truncs[j],
            }
        })
        .collect())
}

/// Four ratio-2 scales whose top truncation fits under `limit`.
pub(crate) fn capped_ladder(limit: u64) -> Result<Vec<f64>> {
    let (mut lo, mut hi) = (1.0f64, limit as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if truncation(mid) <= limit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let top = lo;
    if top / 8.0 < 64.0 {
        return Err(Error::CoefficientRange { needed: truncation(512.0), available: limit });
    }
    Ok((0..4).map(|j| top / 2f64.powi(3 - j)).collect())
}

fn ladder_value(coef: &[Complex64], s: Complex64) -> Result<SmoothedEstimate> {
    let scales = capped_ladder(coef.len() as u64 - 1)?;
    let nodes = multi_scale(coef, s, &scales)?;
    extrapolate(&scales.iter().copied().zip(nodes).collect::<Vec<_>>())
}

fn same_space(f: &HeckeEigenform, g: &HeckeEigenform) -> Result<()> {
    if f.weight() != g.weight() || f.level() != g.level() {
        return Err(Error::Domain(format!(
            "forms {} and {} differ in weight or level",
            f.label(),
            g.label()
        )));
    }
    Ok(())
}

/// Coefficients of zeta(2s) sum c(e) e^{-s}: the product has no poles at
/// the zeros of zeta(2s), so its smoothed sums expand in powers of 1/X.
fn times_zeta_2s(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut d = 1usize;
    while d * d <= n {
        let dd = d * d;
        for e in 1..=n / dd {
            out[dd * e] += c[e];
        }
        d += 1;
    }
    out
}

fn rankin_coefficients(f: &HeckeEigenform, g: &HeckeEigenform, q: u64) -> Result<Vec<Complex64>> {
    let n = f.bound().min(g.bound());
    let mut c = vec![Complex64::new(0.0, 0.0); n as usize + 1];
    for m in 1..=n {
        if q == 1 || gcd(m, q) == 1 {
            c[m as usize] = f.coefficient(m)? * g.coefficient(m)?.conj();
        }
    }
    Ok(c)
}

/// L(1, f x g) = sum A(m) conj(B(m)) / m, for distinct forms.
#[allow(non_snake_case)]
pub fn rankin_L1(f: &HeckeEigenform, g: &HeckeEigenform) -> Result<SmoothedEstimate> {
    rankin_L1_coprime(f, g, 1)
}

/// The same sum restricted to (m, q) = 1.
#[allow(non_snake_case)]
pub fn rankin_L1_coprime(f: &HeckeEigenform, g: &HeckeEigenform, q: u64) -> Result<SmoothedEstimate> {
    if f.label() == g.label() {
        return Err(Error::Domain(format!("rankin_L1 needs distinct forms, got {} twice", f.label())));
    }
    same_space(f, g)?;
    // zeta^{(q)}(2s) L^{(q)}(s, f x g) has restricted convolution coefficients
    let full = ladder_value(&times_zeta_2s(&rankin_coefficients(f, g, q)?), Complex64::new(1.0, 0.0))?;
    let z2 = zeta_real(2.0) * euler_removed(EulerKind::Zeta, q, Complex64::new(2.0, 0.0))?.re;
    Ok(SmoothedEstimate { value: full.value / z2, error_bound: full.error_bound / z2, ..full })
}

/// L(s, f x g) for real s >= 1. At s = 1 the forms must differ; for f = g
/// (level 1) it is zeta(s) sum A(n^2) n^{-s}, which avoids the pole.
#[allow(non_snake_case)]
pub fn rankin_L(f: &HeckeEigenform, g: &HeckeEigenform, s: f64) -> Result<SmoothedEstimate> {
    if !(s >= 1.0) {
        return Err(Error::Domain(format!("rankin_L needs s >= 1, got {s}")));
    }
    same_space(f, g)?;
    let sc = Complex64::new(s, 0.0);
    if f.label() == g.label() {
        if s == 1.0 {
            return Err(Error::Domain("L(s, f x f) has a pole at s = 1".into()));
        }
        level_one(f)?;
        let half = ladder_value(&symsq_coefficients(f)?, sc)?;
        let z = zeta_real(s) / zeta_real(2.0 * s);
        return Ok(SmoothedEstimate { value: half.value * z, error_bound: half.error_bound * z, ..half });
    }
    let full = ladder_value(&times_zeta_2s(&rankin_coefficients(f, g, 1)?), sc)?;
    let z2 = zeta_real(2.0 * s);
    Ok(SmoothedEstimate { value: full.value / z2, error_bound: full.error_bound / z2, ..full })
}

fn level_one(f: &HeckeEigenform) -> Result<()> {
    if f.level() != 1 {
        return Err(Error::Domain(format!("symmetric square values need level 1, {} has level {}", f.label(), f.level())));
    }
    Ok(())
}

fn symsq_coefficients(f: &HeckeEigenform) -> Result<Vec<Complex64>> {
    Ok(times_zeta_2s(&f.square_coefficients(f.bound() as usize)?))
}

/// L(1, f, sym^2) = zeta(2) sum A(n^2) / n, summed as the single Dirichlet
/// series with coefficients sum_{d^2 e = n} A(e^2).
#[allow(non_snake_case)]
pub fn symsq_L1(f: &HeckeEigenform) -> Result<SmoothedEstimate> {
    level_one(f)?;
    ladder_value(&symsq_coefficients(f)?, Complex64::new(1.0, 0.0))
}

/// Residue at s = 1 of sum A(m)^2 m^{-s}, from smoothed sums on both sides
/// of the pole: (s - 1) D(s) averaged over s = 1 +- delta, with D fitted
/// jointly against the polar term R Gamma(1 - s) X^{1 - s}. The averaging
/// leaves an O(delta^2) bias; the error is the gap to the fitted R.
pub fn rankin_residue_two_sided(f: &HeckeEigenform, delta: f64) -> Result<SmoothedEstimate> {
    let n = f.bound();
    let coef: Vec<Complex64> = (0..=n)
        .map(|m| if m == 0 { Ok(Complex64::new(0.0, 0.0)) } else { f.coefficient(m).map(|a| Complex64::new(a.norm_sqr(), 0.0)) })
        .collect::<Result<_>>()?;
    let ladder = capped_ladder(n)?;
    let top = *ladder.last().unwrap();
    let scales: Vec<f64> = (0..8).map(|j| top / 1.5f64.powi(7 - j)).collect();
    let sides = [1.0 + delta, 1.0 - delta];
    // unknowns: R, then per side D, c1, c2
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (i, &s) in sides.iter().enumerate() {
        let vals = multi_scale(&coef, Complex64::new(s, 0.0), &scales)?;
        let g1 = gamma(Complex64::new(1.0 - s, 0.0)).re;
        for (x, v) in scales.iter().zip(&vals) {
            let mut row = vec![0.0; 7];
            row[0] = g1 * x.powf(1.0 - s);
            row[1 + 3 * i] = 1.0;
            row[2 + 3 * i] = 1.0 / x;
            row[3 + 3 * i] = 1.0 / (x * x);
            rows.push(row);
            rhs.push(v.value.re);
        }
    }
    // normal equations
    let k = 7;
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for (row, &b) in rows.iter().zip(&rhs) {
        for a in 0..k {
            atb[a] += row[a] * b;
            for c in 0..k {
                ata[a][c] += row[a] * row[c];
            }
        }
    }
    let sol = solve_dense(ata, atb).ok_or_else(|| Error::Precision("singular residue fit".into()))?;
    let scaled = [delta * sol[1], -delta * sol[4]];
    let value = 0.5 * (scaled[0] + scaled[1]);
    let resid = rows
        .iter()
        .zip(&rhs)
        .map(|(row, b)| (row.iter().zip(&sol).map(|(a, x)| a * x).sum::<f64>() - b).abs())
        .fold(0.0, f64::max);
    Ok(SmoothedEstimate {
        value: Complex64::new(value, 0.0),
        error_bound: (value - sol[0]).abs() + resid,
        x_ladder: scales,
        truncation: truncation(top),
    })
}

#[derive(Clone, Copy, Debug)]
pub enum EulerKind<'a> {
    Rankin(&'a HeckeEigenform, &'a HeckeEigenform),
    Symsq(&'a HeckeEigenform),
    Zeta,
}

fn checked_satake(f: &HeckeEigenform, p: u64, conj: bool) -> Result<Complex64> {
    if f.level() % p == 0 {
        return Err(Error::Domain(format!("prime {p} divides the level of {}", f.label())));
    }
    let mut a = f.coefficient(p)?;
    if a.norm() > 2.0 + 1e-6 {
        return Err(Error::Domain(format!("|A({p})| = {} exceeds 2: no unitary Satake pair", a.norm())));
    }
    if conj {
        a = a.conj();
    }
    Ok(satake(a).alpha)
}

/// prod_{p | q} of the inverse local factor at s, so that
/// L^{(q)}(s) = L(s) * euler_removed(kind, q, s).
pub fn euler_removed(kind: EulerKind<'_>, q: u64, s: Complex64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let mut acc = one;
    for p in factor(q).primes() {
        let x = (-s * (p as f64).ln()).exp();
        acc *= match kind {
            EulerKind::Zeta => one - x,
            EulerKind::Symsq(f) => {
                let a = checked_satake(f, p, false)?;
                (one - a * a * x) * (one - x) * (one - x / (a * a))
            }
            EulerKind::Rankin(f, g) => {
                let a = checked_satake(f, p, false)?;
                let b = checked_satake(g, p, true)?;
                let mut num = one;
                for u in [a, one / a] {
                    for v in [b, one / b] {
                        num *= one - u * v * x;
                    }
                }
                num / (one - x * x)
            }
        };
    }
    Ok(acc)
}

/// Five-point central difference at widths h and h/2, then one
/// Richardson step. `f` returns a value and its absolute error.
pub fn stencil_derivative<F>(mut f: F, s0: f64, h: f64) -> Result<SmoothedEstimate>
where
    F: FnMut(f64) -> Result<(Complex64, f64)>,
{
    let mut worst = 0.0f64;
    let mut d = |h: f64, worst: &mut f64| -> Result<Complex64> {
        let mut v = [Complex64::new(0.0, 0.0); 4];
        for (i, t) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
            let (val, err) = f(s0 + t * h)?;
            *worst = worst.max(err);
            v[i] = val;
        }
        Ok((v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * h))
    };
    let coarse = d(h, &mut worst)?;
    let fine = d(h / 2.0, &mut worst)?;
    let rich = (16.0 * fine - coarse) / 15.0;
    let noise = 3.3 * worst / h;
    Ok(SmoothedEstimate { value: rich, error_bound: (fine - rich).norm() + noise, x_ladder: vec![], truncation: 0 })
}

/// c_f(Q): derivative at s = 1 of L^{(Q)}(s, f, sym^2) / zeta^{(Q)}(2s)
/// times prod_{p | Q} (1 - p^{-s}).
pub fn cf_derivative(f: &HeckeEigenform, q: u64, tolerance: Option<f64>) -> Result<SmoothedEstimate> {
    level_one(f)?;
    if gcd(q, f.level()) != 1 {
        return Err(Error::Domain(format!("modulus {q} shares a factor with the level")));
    }
    let sym = symsq_coefficients(f)?;
    let scales = capped_ladder(f.bound())?;
    let primes: Vec<u64> = factor(q).primes().collect();
    let mut est = stencil_derivative(
        |s| {
            let sc = Complex64::new(s, 0.0);
            let nodes = multi_scale(&sym, sc, &scales)?;
            let l = extrapolate(&scales.iter().copied().zip(nodes).collect::<Vec<_>>())?;
            let z = zeta(2.0 * sc);
            let g = SmoothedEstimate { value: l.value / z, error_bound: l.error_bound / z.norm(), ..l };
            let mut local = Complex64::new(1.0, 0.0);
            for &p in &primes {
                let x = (p as f64).powf(-s);
                let sym = euler_removed(EulerKind::Symsq(f), p, sc)?;
                local *= sym / (1.0 - x * x) * (1.0 - x);
            }
            Ok((g.value * local, g.error_bound * local.norm()))
        },
        1.0,
        1e-2,
    )?;
    est.x_ladder = scales.clone();
    est.truncation = truncation(*scales.last().unwrap());
    if let Some(tol) = tolerance {
        if est.error_bound > tol {
            return Err(Error::Precision(format!("c_f error {} exceeds tolerance {tol}", est.error_bound)));
        }
    }
    Ok(est)
}
