//! What is left of the moment after the main terms: residual series,
//! Gaussian short-interval averages, power-law fits, and the search for a
//! modulus where both twisted central values are nonzero.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::gcd;
use crate::characters::CharacterGroup;
use crate::lseries::{ClassSums, LadderPolicy, SmoothedEstimate};
use crate::mainterms::{prediction_ff, prediction_fneq, MainTerm, MainTermInputs};
use crate::modforms::HeckeEigenform;
use crate::moments::{second_moment, MomentReport};
use crate::numeric::{linear_fit, KahanC};
use crate::{Error, Result};

pub use crate::mainterms::gaussian_weight;

/// Weights below this are dropped from short-interval averages.
pub const WEIGHT_FLOOR: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub q: u64,
    pub residual: Complex64,
    pub error_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualSeries {
    pub f: String,
    pub g: String,
    pub level: u64,
    /// free-form note on how the prediction was calibrated (e.g. the C2 used)
    pub calibration: Option<String>,
    entries: Vec<ResidualEntry>,
}

impl ResidualSeries {
    pub fn new(f: &str, g: &str, level: u64) -> Self {
        ResidualSeries { f: f.into(), g: g.into(), level, calibration: None, entries: Vec::new() }
    }

    pub fn push(&mut self, e: ResidualEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if e.q <= last.q {
                return Err(Error::Domain(format!("q = {} after q = {}: not increasing", e.q, last.q)));
            }
        }
        if gcd(e.q, self.level) != 1 {
            return Err(Error::Domain(format!("q = {} is not coprime to the level {}", e.q, self.level)));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn entries(&self) -> &[ResidualEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value_map(&self) -> BTreeMap<u64, (Complex64, f64)> {
        self.entries.iter().map(|e| (e.q, (e.residual, e.error_bound))).collect()
    }

    /// `q,res_re,res_im,err`, one row per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,res_re,res_im,err\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", e.q, e.residual.re, e.residual.im, e.error_bound);
        }
        out
    }

    pub fn from_csv(text: &str, f: &str, g: &str, level: u64) -> Result<Self> {
        let mut s = ResidualSeries::new(f, g, level);
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "q,res_re,res_im,err" => {}
            _ => return Err(Error::Parse { line: 1, msg: "expected header q,res_re,res_im,err".into() }),
        }
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let q = cols[0].parse::<u64>().map_err(|_| bad("bad q"))?;
            let num = |c: &str| c.parse::<f64>().map_err(|_| bad("bad number"));
            s.push(ResidualEntry {
                q,
                residual: Complex64::new(num(cols[1])?, num(cols[2])?),
                error_bound: num(cols[3])?,
            })
            .map_err(|e| bad(&e.to_string()))?;
        }
        Ok(s)
    }
}

/// Moment, prediction and their difference at one modulus.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualPoint {
    pub report: MomentReport,
    pub prediction: MainTerm,
    pub entry: ResidualEntry,
}

/// S - prediction, with the two error bounds added.
pub fn residual_from(q: u64, moment: &SmoothedEstimate, prediction: &MainTerm) -> ResidualEntry {
    ResidualEntry {
        q,
        residual: moment.value - prediction.value,
        error_bound: moment.error_bound + prediction.error_bound,
    }
}

pub fn prediction(inputs: &MainTermInputs<'_>, q: u64) -> Result<MainTerm> {
    if inputs.is_diagonal() {
        prediction_ff(inputs, q)
    } else {
        prediction_fneq(inputs, q)
    }
}

pub fn residual(inputs: &MainTermInputs<'_>, q: u64, policy: Option<&LadderPolicy>) -> Result<ResidualPoint> {
    let report = second_moment(inputs.f, inputs.g, q, policy)?;
    let pred = prediction(inputs, q)?;
    let entry = residual_from(q, &report.s_direct, &pred);
    Ok(ResidualPoint { report: report.with_prediction(pred.value), prediction: pred, entry })
}

/// Residuals at each q (computed in parallel, returned in the order given,
/// which must be increasing).
pub fn residual_series(inputs: &MainTermInputs<'_>, qs: &[u64], policy: Option<&LadderPolicy>) -> Result<(ResidualSeries, Vec<ResidualPoint>)> {
    let points = qs.par_iter().map(|&q| residual(inputs, q, policy)).collect::<Result<Vec<_>>>()?;
    let mut s = ResidualSeries::new(inputs.f.label(), inputs.g.label(), inputs.level());
    for p in &points {
        s.push(p.entry)?;
    }
    Ok((s, points))
}

/// Range of q with weight at least WEIGHT_FLOOR.
pub fn weight_window(big_q: f64, y: f64) -> (f64, f64) {
    let t = (4.0 * PI * -WEIGHT_FLOOR.ln()).sqrt() / y;
    (big_q * (-t).exp(), big_q * t.exp())
}

/// (y/Q) times the integral of the weight over (0, inf): 2 pi e^{pi/y^2}.
/// The weighted average of the constant 1 tends to this.
pub fn weight_normalization(y: f64) -> f64 {
    2.0 * PI * (PI / (y * y)).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedAverage {
    pub value: Complex64,
    pub error_bound: f64,
    pub terms: usize,
    pub lo: u64,
    pub hi: u64,
    /// (y/Q) sum of the weights of admissible q outside [lo, hi]
    pub omitted_weight: f64,
}

/// (y/Q) sum_{(q,N0)=1} value(q) w(q) over the full window where the weight
/// exceeds WEIGHT_FLOOR; every admissible q there must be present.
pub fn weighted_average(values: &BTreeMap<u64, (Complex64, f64)>, big_q: f64, y: f64, n0: u64) -> Result<WeightedAverage> {
    if !(big_q >= 1.0 && y > 0.0) {
        return Err(Error::Domain(format!("need Q >= 1 and y > 0 (Q = {big_q}, y = {y})")));
    }
    let (lo, hi) = weight_window(big_q, y);
    weighted_average_window(values, big_q, y, n0, lo.ceil().max(1.0) as u64, hi.floor() as u64)
}

/// Same average restricted to q in [lo, hi]. The weight mass left outside
/// is reported, not estimated away.
pub fn weighted_average_window(
    values: &BTreeMap<u64, (Complex64, f64)>,
    big_q: f64,
    y: f64,
    n0: u64,
    lo: u64,
    hi: u64,
) -> Result<WeightedAverage> {
    if !(big_q >= 1.0 && y > 0.0) || lo == 0 || lo > hi {
        return Err(Error::Domain(format!("bad window [{lo}, {hi}] for Q = {big_q}, y = {y}")));
    }
    let missing: Vec<u64> = (lo..=hi).filter(|&q| gcd(q, n0) == 1 && !values.contains_key(&q)).take(5).collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(format!("no value at q = {missing:?} in [{lo}, {hi}]")));
    }
    let mut acc = KahanC::new();
    let mut err = 0.0;
    let mut terms = 0;
    for q in (lo..=hi).filter(|&q| gcd(q, n0) == 1) {
        let w = gaussian_weight(q as f64, big_q, y);
        if w < WEIGHT_FLOOR {
            continue;
        }
        let (v, e) = values[&q];
        acc.add(v * w);
        err += e * w;
        terms += 1;
    }
    let s = y / big_q;
    // omitted mass: below lo the admissible q are finitely many, above hi
    // the sum is bounded by the weight integral from hi on
    let below: f64 = (1..lo).filter(|&q| gcd(q, n0) == 1).map(|q| gaussian_weight(q as f64, big_q, y)).sum();
    let above = upper_tail_mass(big_q, y, hi as f64);
    Ok(WeightedAverage { value: acc.value() * s, error_bound: err * s, terms, lo, hi, omitted_weight: s * (below + above) })
}

// sum_{q > h} w(q) <= w(h+1) + integral_{h+1}^inf w (w decreasing beyond Q)
fn upper_tail_mass(big_q: f64, y: f64, h: f64) -> f64 {
    let a = y * y / (4.0 * PI);
    let start = (h + 1.0).max(big_q);
    let t0 = (start / big_q).ln();
    // integral_{t0}^inf Q e^{-a t^2 + t} dt, completed square
    let c = t0 - 1.0 / (2.0 * a);
    let integral = big_q * (1.0 / (4.0 * a)).exp() * 0.5 * (PI / a).sqrt() * erfc(a.sqrt() * c);
    let head: f64 = ((h as u64 + 1)..start as u64).map(|q| gaussian_weight(q as f64, big_q, y)).sum();
    head + gaussian_weight(start, big_q, y) + integral
}

// Chebyshev-fitted erfc (relative error < 1.2e-7), nudged up so the mass
// stays an upper bound.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    let r = r * (1.0 + 1e-6);
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContourCheck {
    pub x: f64,
    pub y: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
}

/// (1/2 pi i) int_{(2)} e^{pi v^2/y^2} X^v dv / y by the trapezoid rule on
/// Im v in [-8y, 8y] with step y/100, against e^{-y^2 (log X)^2/(4 pi)}.
pub fn contour_identity_check(x: f64, y: f64) -> Result<ContourCheck> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Domain(format!("need X > 0 and y > 0 (X = {x}, y = {y})")));
    }
    let h = y / 100.0;
    let n: i64 = 1600;
    let lx = x.ln();
    let mut acc = KahanC::new();
    for j in -n..=n {
        let t = j as f64 * h;
        let v = Complex64::new(2.0, t);
        let w = if j.abs() == n { 0.5 } else { 1.0 };
        acc.add(w * (PI * v * v / (y * y) + v * lx).exp());
    }
    // dv = i dt cancels the i in 1/(2 pi i)
    let lhs = (acc.value() * h / (2.0 * PI * y)).re;
    let rhs = (-y * y * lx * lx / (4.0 * PI)).exp();
    Ok(ContourCheck { x, y, lhs, rhs, diff: (lhs - rhs).abs() })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub used: usize,
}

/// Least-squares fit of log|residual| against log q over entries whose
/// residual exceeds ten times its error bound.
pub fn exponent_fit(entries: &[ResidualEntry]) -> Result<ExponentFit> {
    let usable: Vec<&ResidualEntry> = entries.iter().filter(|e| e.residual.norm() > 10.0 * e.error_bound).collect();
    if usable.len() < 8 {
        return Err(Error::TooFewPoints { have: usable.len(), need: 8 });
    }
    let x: Vec<f64> = usable.iter().map(|e| (e.q as f64).ln()).collect();
    let y: Vec<f64> = usable.iter().map(|e| e.residual.norm().ln()).collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    Ok(ExponentFit { slope, intercept, r2, used: usable.len() })
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub q: u64,
    /// position of the character in the group's enumeration order
    pub index: usize,
    pub lf: SmoothedEstimate,
    pub lg: SmoothedEstimate,
}

/// Default search window [X - X^0.6, X + X^0.6].
pub fn nonvanish_window(x_target: u64) -> (u64, u64) {
    let r = (x_target as f64).powf(0.6);
    let lo = (x_target as f64 - r).ceil().max(1.0) as u64;
    let hi = (x_target as f64 + r).floor() as u64;
    (lo, hi)
}

fn clears(l: &SmoothedEstimate) -> bool {
    l.value.norm() > (10.0 * l.error_bound).max(1e-8)
}

/// The modulus closest to X (ties to the smaller q) with a character where
/// both L(1/2, f, chi) and L(1/2, g, chi) clear max(10 err, 1e-8); the
/// first such character in enumeration order.
pub fn nonvanish_search(
    f: &HeckeEigenform,
    g: &HeckeEigenform,
    x_target: u64,
    window: Option<(u64, u64)>,
) -> Result<Witness> {
    if f.weight() != g.weight() || f.level() != g.level() {
        return Err(Error::Domain("forms must share weight and level".into()));
    }
    let (dlo, dhi) = nonvanish_window(x_target);
    let (lo, hi) = window.unwrap_or((dlo, dhi));
    if lo > hi || lo < dlo || hi > dhi {
        return Err(Error::Domain(format!("window [{lo}, {hi}] is not inside [{dlo}, {dhi}]")));
    }
    let n0 = f.level();
    let mut qs: Vec<u64> = (lo..=hi).filter(|&q| gcd(q, n0) == 1).collect();
    qs.sort_by_key(|&q| (q.abs_diff(x_target), q));
    let same = f.label() == g.label();
    let found = qs.par_iter().map(|&q| -> Result<Option<Witness>> {
        let policy = LadderPolicy::for_form(f.weight(), n0, q);
        let group = CharacterGroup::new(q);
        let sf = ClassSums::compute(f, q, &policy)?;
        let sg = if same { None } else { Some(ClassSums::compute(g, q, &policy)?) };
        for (index, chi) in group.characters().enumerate() {
            let lf = sf.twisted(&group, &chi);
            let lg = match &sg {
                Some(s) => s.twisted(&group, &chi),
                None => lf.clone(),
            };
            if clears(&lf) && clears(&lg) {
                return Ok(Some(Witness { q, index, lf, lg }));
            }
        }
        Ok(None)
    });
    // first in candidate order, whichever thread finishes first
    match found.find_map_first(|r| match r {
        Ok(None) => None,
        other => Some(other),
    }) {
        Some(Ok(Some(w))) => Ok(w),
        Some(Err(e)) => Err(e),
        _ => Err(Error::NoWitness { lo, hi }),
    }
}
