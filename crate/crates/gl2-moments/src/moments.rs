//! The character-averaged moment S_{f,g}(Q), its diagonal, and the shifted
//! sums of the off-diagonal with their sieve.

use crate::arith::{euler_phi, factor, gcd, is_squarefree, mobius};
use crate::characters::CharacterGroup;
use crate::error::{Error, Result};
use crate::lseries::{
    cf_derivative, euler_removed, rankin_L1_coprime, symsq_L1, ClassSums, EulerKind, LadderPolicy, SmoothedEstimate,
};
use crate::modforms::HeckeEigenform;
use crate::numeric::{zeta_real, Kahan, KahanC};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct MomentParams {
    pub f: String,
    pub g: String,
    pub ladder_x0: f64,
    pub ladder_ratio: f64,
    pub ladder_nodes: usize,
    /// smoothing scale for the diagonal / off-diagonal split, when computed
    pub x_split: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub q: u64,
    pub s_direct: SmoothedEstimate,
    pub s1: Option<SmoothedEstimate>,
    pub offdiag: Option<Complex64>,
    pub prediction: Option<Complex64>,
    pub residual: Option<Complex64>,
    pub params: MomentParams,
}

impl MomentReport {
    pub fn with_prediction(mut self, prediction: Complex64) -> Self {
        self.prediction = Some(prediction);
        self.residual = Some(self.s_direct.value - prediction);
        self
    }
}

fn same_form(f: &HeckeEigenform, g: &HeckeEigenform) -> bool {
    f.label() == g.label() && f.provider() == g.provider()
}

fn check_pair(f: &HeckeEigenform, g: &HeckeEigenform, q: u64) -> Result<()> {
    if f.weight() != g.weight() || f.level() != g.level() {
        return Err(Error::Domain("forms must share weight and level".into()));
    }
    if gcd(q, f.level()) != 1 {
        return Err(Error::Domain(format!("modulus {q} is not coprime to the level {}", f.level())));
    }
    Ok(())
}

/// |d(ab)| <= |a| db + |b| da + da db
pub fn product_error(a: Complex64, da: f64, b: Complex64, db: f64) -> f64 {
    a.norm() * db + b.norm() * da + da * db
}

/// Average of a conj(b) over paired estimates, in the given order.
pub fn average_products(lf: &[SmoothedEstimate], lg: &[SmoothedEstimate]) -> (Complex64, f64) {
    let mut acc = KahanC::new();
    let mut err = Kahan::new();
    for (a, b) in lf.iter().zip(lg) {
        acc.add(a.value * b.value.conj());
        err.add(product_error(a.value, a.error_bound, b.value, b.error_bound));
    }
    let n = lf.len() as f64;
    (acc.value() / n, err.value() / n)
}

/// S_{f,g}(Q) = phi(Q)^{-1} sum_chi L(1/2, f, chi) conj L(1/2, g, chi), from
/// extrapolated central values under `policy` (default: the form ladder).
pub fn second_moment(
    f: &HeckeEigenform,
    g: &HeckeEigenform,
    q: u64,
    policy: Option<&LadderPolicy>,
) -> Result<MomentReport> {
    check_pair(f, g, q)?;
    let policy = policy.cloned().unwrap_or_else(|| LadderPolicy::for_form(f.weight(), f.level(), q));
    let group = CharacterGroup::new(q);
    let sf = ClassSums::compute(f, q, &policy)?;
    let lf = sf.all_twisted(&group);
    let lg = if same_form(f, g) { lf.clone() } else { ClassSums::compute(g, q, &policy)?.all_twisted(&group) };
    let (value, error_bound) = average_products(&lf, &lg);
    debug_assert_eq!(lf.len() as u64, euler_phi(q));
    Ok(MomentReport {
        q,
        s_direct: SmoothedEstimate {
            value,
            error_bound,
            x_ladder: policy.scales(),
            truncation: policy.max_truncation(),
        },
        s1: None,
        offdiag: None,
        prediction: None,
        residual: None,
        params: MomentParams {
            f: f.label().into(),
            g: g.label().into(),
            ladder_x0: policy.x0,
            ladder_ratio: policy.ratio,
            ladder_nodes: policy.nodes,
            x_split: None,
        },
    })
}

/// Adds the diagonal S1 and the off-diagonal S2 + S3 at scale X.
pub fn split_at(report: MomentReport, f: &HeckeEigenform, g: &HeckeEigenform, x: f64) -> Result<MomentReport> {
    let q = report.q;
    let s1 = diagonal_s1(f, g, q, x)?;
    let off = s2_direct(f, g, q, x)? + s2_direct(g, f, q, x)?.conj();
    let mut r = report;
    r.s1 = Some(s1);
    r.offdiag = Some(off);
    r.params.x_split = Some(x);
    Ok(r)
}

/// S1: L^{(Q)}(1, f x g) for f != g; for f = g the log X / 2 growth plus
/// c_f(Q).
pub fn diagonal_s1(f: &HeckeEigenform, g: &HeckeEigenform, q: u64, x: f64) -> Result<SmoothedEstimate> {
    check_pair(f, g, q)?;
    if !same_form(f, g) {
        return rankin_L1_coprime(f, g, q);
    }
    let sym = symsq_L1(f)?;
    let one = Complex64::new(1.0, 0.0);
    let remove_sym = euler_removed(EulerKind::Symsq(f), q, one)?;
    let zeta_q = zeta_real(2.0) * euler_removed(EulerKind::Zeta, q, Complex64::new(2.0, 0.0))?.re;
    let phi_ratio = euler_removed(EulerKind::Zeta, q, one)?.re;
    let slope = phi_ratio * sym.value * remove_sym / zeta_q;
    let slope_err = phi_ratio * sym.error_bound * remove_sym.norm() / zeta_q;
    let cf = cf_derivative(f, q, None)?;
    let lx = (x / 2.0).ln();
    Ok(SmoothedEstimate {
        value: slope * lx + cf.value,
        error_bound: slope_err * lx.abs() + cf.error_bound,
        x_ladder: sym.x_ladder,
        truncation: sym.truncation,
    })
}

/// Which pairs of the congruence class l1 m1 = l2 m2 (mod Q) enter a
/// building block: all of them, or only l1 m1 - l2 m2 = h Q with h >= 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ShiftMode {
    FullClass,
    PositiveShift,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftedSumParams {
    pub x: f64,
    pub q: u64,
    pub l1: u64,
    pub l2: u64,
    /// lattice cutoff l_i m_i <= truncation; default floor(39 X)
    pub truncation: Option<u64>,
}

impl ShiftedSumParams {
    pub fn new(x: f64, q: u64, l1: u64, l2: u64) -> Self {
        ShiftedSumParams { x, q, l1, l2, truncation: None }
    }

    pub fn cutoff(&self) -> u64 {
        self.truncation.unwrap_or((39.0 * self.x).floor() as u64)
    }
}

fn coefficient_table(f: &HeckeEigenform, n: u64) -> Result<Vec<Complex64>> {
    f.check_range(n.max(1))?;
    let mut v = vec![Complex64::zero(); n as usize + 1];
    for m in 1..=n {
        v[m as usize] = f.coefficient(m)?;
    }
    Ok(v)
}

/// S(X, Q, l1, l2): sum over l1 m1 = l2 m2 (mod Q) of
/// A(m1) conj(B(m2)) (l1 m1 l2 m2)^{-1/2} e^{-(l1 m1 + l2 m2)/X}.
pub fn building_block(
    f: &HeckeEigenform,
    g: &HeckeEigenform,
    p: &ShiftedSumParams,
    mode: ShiftMode,
) -> Result<Complex64> {
    if p.q == 0 || p.l1 == 0 || p.l2 == 0 || !(p.x > 0.0) {
        return Err(Error::Domain(format!("invalid building block parameters {p:?}")));
    }
    if !is_squarefree(p.l1) || !is_squarefree(p.l2) || gcd(p.l1 * p.l2, f.level()) != 1 {
        return Err(Error::Domain("l1, l2 must be square-free and coprime to the level".into()));
    }
    let t = p.cutoff();
    let (n1, n2) = (t / p.l1, t / p.l2);
    let a = coefficient_table(f, n1).map_err(|e| Error::Truncation(format!("building block needs A up to {n1}: {e}")))?;
    let b = coefficient_table(g, n2).map_err(|e| Error::Truncation(format!("building block needs B up to {n2}: {e}")))?;
    let q = p.q;
    // weights per side: A(m) / sqrt(l m) e^{-l m / X}, bucketed by l m mod Q
    let side = |c: &[Complex64], l: u64, n: u64| -> Vec<(u64, u64, Complex64)> {
        (1..=n)
            .map(|m| {
                let lm = l * m;
                (lm, lm % q, c[m as usize] / (lm as f64).sqrt() * (-(lm as f64) / p.x).exp())
            })
            .collect()
    };
    let left = side(&a, p.l1, n1);
    let right = side(&b, p.l2, n2);
    let mut by_class: Vec<Vec<(u64, Complex64)>> = vec![Vec::new(); q as usize];
    for &(lm, r, w) in &right {
        by_class[r as usize].push((lm, w.conj()));
    }
    let mut acc = KahanC::new();
    for &(lm1, r, w1) in &left {
        for &(lm2, w2) in &by_class[r as usize] {
            if mode == ShiftMode::PositiveShift && lm1 <= lm2 {
                continue;
            }
            acc.add(w1 * w2);
        }
    }
    Ok(acc.value())
}

/// S2: sum over m, h >= 1, (m, Q) = 1 of A(m + hQ) conj(B(m)) / sqrt((m + hQ) m)
/// e^{-(m + hQ)/X - m/X}, on the lattice m + hQ <= floor(39 X).
pub fn s2_direct(f: &HeckeEigenform, g: &HeckeEigenform, q: u64, x: f64) -> Result<Complex64> {
    s2_with_cutoff(f, g, q, x, (39.0 * x).floor() as u64)
}

pub fn s2_with_cutoff(f: &HeckeEigenform, g: &HeckeEigenform, q: u64, x: f64, t: u64) -> Result<Complex64> {
    if q == 0 {
        return Err(Error::Domain("Q must be >= 1".into()));
    }
    let a = coefficient_table(f, t).map_err(|e| Error::Truncation(e.to_string()))?;
    let b = coefficient_table(g, t).map_err(|e| Error::Truncation(e.to_string()))?;
    let w: Vec<Complex64> =
        (0..=t).map(|m| if m == 0 { Complex64::zero() } else { Complex64::new((-(m as f64) / x).exp() / (m as f64).sqrt(), 0.0) }).collect();
    let mut acc = KahanC::new();
    for m in 1..=t {
        if gcd(m, q) != 1 {
            continue;
        }
        let bm = b[m as usize].conj() * w[m as usize];
        let mut n = m + q;
        while n <= t {
            acc.add(a[n as usize] * w[n as usize] * bm);
            n += q;
        }
    }
    Ok(acc.value())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SieveCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub difference: f64,
}

/// S2 directly against sum_{d | Q} mu(d)/d sum_{d1, d2 | d} mu mu A(d/d1)
/// conj(B(d/d2)) S(X/d, Q/d, d1, d2), both on the same integer lattice.
pub fn sieve_decomposition(f: &HeckeEigenform, g: &HeckeEigenform, q: u64, x: f64) -> Result<SieveCheck> {
    check_pair(f, g, q)?;
    let t = (39.0 * x).floor() as u64;
    let lhs = s2_with_cutoff(f, g, q, x, t)?;
    let mut rhs = KahanC::new();
    for d in factor(q).divisors() {
        let mu = mobius(d);
        if mu == 0 {
            continue;
        }
        let divs = factor(d).divisors();
        for &d1 in &divs {
            for &d2 in &divs {
                let c = mu as f64 / d as f64
                    * (mobius(d1) * mobius(d2)) as f64
                    * f.coefficient(d / d1)?
                    * g.coefficient(d / d2)?.conj();
                let params = ShiftedSumParams { x: x / d as f64, q: q / d, l1: d1, l2: d2, truncation: Some(t / d) };
                rhs.add(c * building_block(f, g, &params, ShiftMode::PositiveShift)?);
            }
        }
    }
    let rhs = rhs.value();
    Ok(SieveCheck { lhs, rhs, difference: (lhs - rhs).norm() })
}

/// Exact integer coefficients a(n), n = 0..len, of a level-one form.
#[derive(Clone, Debug)]
pub struct ExactCoefficients {
    pub weight: u32,
    pub level: u64,
    pub a: Vec<BigInt>,
}

impl ExactCoefficients {
    /// a(n) for n <= prec, for weights with a single rational eigenform.
    pub fn level1(weight: u32, prec: usize) -> Result<Self> {
        let a = crate::modforms::rational_eigenform_exact(weight, prec)?;
        Ok(ExactCoefficients { weight, level: 1, a })
    }
}

/// a(dn) = sum_{d0 | (d, n)} mu(d0) a(d/d0) d0^{k-1} a(n/d0), exactly.
pub fn hecke_sieve_check(c: &ExactCoefficients, d: u64, n: u64) -> Result<bool> {
    if d == 0 || n == 0 || !is_squarefree(d) || gcd(d, c.level) != 1 {
        return Err(Error::Domain(format!("d = {d} must be square-free and coprime to the level")));
    }
    let need = d * n;
    if need as usize >= c.a.len() {
        return Err(Error::CoefficientRange { needed: need, available: c.a.len() as u64 - 1 });
    }
    let mut rhs = BigInt::zero();
    for d0 in factor(gcd(d, n)).divisors() {
        let mu = mobius(d0);
        if mu == 0 {
            continue;
        }
        let term = &c.a[(d / d0) as usize] * &c.a[(n / d0) as usize] * BigInt::from(d0).pow(c.weight - 1);
        if mu > 0 {
            rhs += term;
        } else {
            rhs -= term;
        }
    }
    Ok(rhs == c.a[need as usize])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthogonalityBridge {
    pub character_average: Complex64,
    pub double_sum: Complex64,
    pub difference: f64,
}

/// Both sides of the averaging identity for sums truncated at m <= M:
/// phi(Q)^{-1} sum_chi F(chi) conj G(chi) against the congruence double sum
/// over m1 = m2 (mod Q), (m2, Q) = 1.
pub fn orthogonality_bridge(
    f: &HeckeEigenform,
    g: &HeckeEigenform,
    q: u64,
    m_max: u64,
    x: f64,
) -> Result<OrthogonalityBridge> {
    let a = coefficient_table(f, m_max)?;
    let b = coefficient_table(g, m_max)?;
    let w: Vec<f64> = (0..=m_max).map(|m| if m == 0 { 0.0 } else { (-(m as f64) / x).exp() / (m as f64).sqrt() }).collect();
    let group = CharacterGroup::new(q);
    let mut avg = KahanC::new();
    for chi in group.characters() {
        let (mut sf, mut sg) = (KahanC::new(), KahanC::new());
        for m in 1..=m_max {
            let c = group.evaluate(&chi, m);
            sf.add(a[m as usize] * c * w[m as usize]);
            sg.add(b[m as usize] * c * w[m as usize]);
        }
        avg.add(sf.value() * sg.value().conj());
    }
    let character_average = avg.value() / group.order() as f64;
    let mut dbl = KahanC::new();
    for m2 in 1..=m_max {
        if gcd(m2, q) != 1 {
            continue;
        }
        let bm = b[m2 as usize].conj() * w[m2 as usize];
        let mut m1 = (m2 - 1) % q + 1;
        while m1 <= m_max {
            dbl.add(a[m1 as usize] * w[m1 as usize] * bm);
            m1 += q;
        }
    }
    let double_sum = dbl.value();
    Ok(OrthogonalityBridge { character_average, double_sum, difference: (character_average - double_sum).norm() })
}
