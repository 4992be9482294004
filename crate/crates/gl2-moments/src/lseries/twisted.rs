use super::{truncation, SmoothedEstimate};
use crate::characters::{Character, CharacterGroup};
use crate::error::{Error, Result};
use crate::modforms::HeckeEigenform;
use crate::numeric::{lagrange_weights_at_zero, zeta_real};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Smoothing scales for central values at modulus q.
///
/// `standard` is four scales X0 2^j with X0 = max(64, q^{3/2}), reported
/// through the full interpolant. `for_form` places k/2 + 1 scales with a
/// smaller ratio above X0 = Y0 N0 q^2 / (4 pi^2): the central value's
/// 1/X expansion stops at degree k/2 - 1 (trivial zeros), so the top k/2
/// scales remove it exactly and the bottom k/2 give an independent check.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderPolicy {
    pub x0: f64,
    pub ratio: f64,
    pub nodes: usize,
    pub exact_degree: bool,
}

impl LadderPolicy {
    pub fn standard(q: u64) -> Self {
        LadderPolicy { x0: (q as f64).powf(1.5).max(64.0), ratio: 2.0, nodes: 4, exact_degree: false }
    }

    pub fn for_form(weight: u32, level: u64, q: u64) -> Self {
        let (ratio, y0) = match weight {
            0..=16 => (1.25, 20.0),
            17..=20 => (1.15, 22.0),
            _ => (1.1, 25.0),
        };
        let cond = (level * q * q) as f64;
        let x0 = (y0 * cond / (4.0 * PI * PI)).max(64.0);
        LadderPolicy { x0, ratio, nodes: weight as usize / 2 + 1, exact_degree: true }
    }

    /// Same policy shifted up by `factor`, for independent-ladder checks.
    pub fn scaled(&self, factor: f64) -> Self {
        LadderPolicy { x0: self.x0 * factor, ..self.clone() }
    }

    pub fn scales(&self) -> Vec<f64> {
        (0..self.nodes).map(|j| self.x0 * self.ratio.powi(j as i32)).collect()
    }

    pub fn max_truncation(&self) -> u64 {
        truncation(*self.scales().last().unwrap())
    }

    // (value weights, check weights) over the scales
    fn weights(&self) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = self.scales().iter().map(|x| 1.0 / x).collect();
        let n = h.len();
        let mut top = vec![0.0];
        top.extend(lagrange_weights_at_zero(&h[1..]));
        if self.exact_degree {
            let mut bottom = lagrange_weights_at_zero(&h[..n - 1]);
            bottom.push(0.0);
            (top, bottom)
        } else {
            (lagrange_weights_at_zero(&h), top)
        }
    }
}

/// Residue-class sums T_j[r] = sum_{m = r mod q} A(m) m^{-1/2} e^{-m/X_j},
/// from which every twisted central value mod q follows by one pass over r.
#[derive(Clone, Debug)]
pub struct ClassSums {
    pub q: u64,
    pub scales: Vec<f64>,
    pub truncations: Vec<u64>,
    value: Vec<Complex64>,
    spread: Vec<Complex64>,
    rounding: f64,
    tail: f64,
}

const BLOCK: usize = 2048;

#[inline]
fn neumaier(s: &mut f64, c: &mut f64, x: f64) {
    let t = *s + x;
    if s.abs() >= x.abs() {
        *c += (*s - t) + x;
    } else {
        *c += (x - t) + *s;
    }
    *s = t;
}

fn class_pass(coef: &[f64], q: usize, scales: &[f64], truncs: &[u64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = scales.len();
    let mut sum = vec![vec![0.0f64; q]; n];
    let mut comp = vec![vec![0.0f64; q]; n];
    let mut mass = vec![0.0f64; n];
    let tables: Vec<Vec<f64>> = scales.iter().map(|x| (0..BLOCK).map(|i| (-(i as f64) / x).exp()).collect()).collect();
    let top = *truncs.iter().max().unwrap() as usize;
    let mut start = 1usize;
    while start <= top {
        let end = (start + BLOCK - 1).min(top);
        for j in 0..n {
            let mj = truncs[j] as usize;
            if start > mj {
                continue;
            }
            let stop = end.min(mj);
            let base = (-(start as f64) / scales[j]).exp();
            let (s, c, t) = (&mut sum[j], &mut comp[j], &tables[j]);
            let mut r = start % q;
            let mut local_mass = 0.0;
            for m in start..=stop {
                let term = coef[m] * (base * t[m - start]);
                local_mass += term.abs();
                neumaier(&mut s[r], &mut c[r], term);
                r += 1;
                if r == q {
                    r = 0;
                }
            }
            mass[j] += local_mass;
        }
        start = end + 1;
    }
    let sums = sum.into_iter().zip(comp).map(|(s, c)| s.iter().zip(&c).map(|(a, b)| a + b).collect()).collect();
    (sums, mass)
}

impl ClassSums {
    pub fn compute(f: &HeckeEigenform, q: u64, policy: &LadderPolicy) -> Result<Self> {
        if q == 0 {
            return Err(Error::Domain("modulus must be >= 1".into()));
        }
        if policy.nodes < 3 {
            return Err(Error::LadderTooShort(policy.nodes));
        }
        let scales = policy.scales();
        let truncations: Vec<u64> = scales.iter().map(|&x| truncation(x)).collect();
        let top = *truncations.last().unwrap();
        f.check_range(top)?;
        let qs = q as usize;
        let (re, im) = f.half_scaled();
        let (sre, mass_re) = class_pass(re, qs, &scales, &truncations);
        let (sim, mass_im) = match im {
            Some(im) => {
                let (s, m) = class_pass(im, qs, &scales, &truncations);
                (Some(s), m)
            }
            None => (None, vec![0.0; scales.len()]),
        };
        let node = |j: usize, r: usize| Complex64::new(sre[j][r], sim.as_ref().map_or(0.0, |s| s[j][r]));
        let (wv, wc) = policy.weights();
        let mut value = vec![Complex64::new(0.0, 0.0); qs];
        let mut spread = vec![Complex64::new(0.0, 0.0); qs];
        for r in 0..qs {
            for j in 0..scales.len() {
                value[r] += wv[j] * node(j, r);
                spread[r] += (wv[j] - wc[j]) * node(j, r);
            }
        }
        // worst-case rounding: a few ulps per term, amplified by the weights
        let rounding: f64 =
            wv.iter().zip(mass_re.iter().zip(&mass_im)).map(|(w, (a, b))| w.abs() * (a + b)).sum::<f64>() * 8.0 * f64::EPSILON;
        let cmax = f.re_table()[1..=top as usize]
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let b = f.im_table().map_or(0.0, |t| t[i + 1]);
                a.hypot(b)
            })
            .fold(0.0f64, f64::max);
        let tail: f64 = wv
            .iter()
            .zip(scales.iter().zip(&truncations))
            .map(|(w, (x, &m))| w.abs() * zeta_real(2.0) * cmax * (-(m as f64) / x).exp() * m as f64)
            .sum();
        Ok(ClassSums { q, scales, truncations, value, spread, rounding, tail })
    }

    /// L(1/2, f, chi) for one character of the group mod q.
    pub fn twisted(&self, group: &CharacterGroup, chi: &Character) -> SmoothedEstimate {
        debug_assert_eq!(group.modulus(), self.q);
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for r in 0..self.q {
            let c = group.evaluate(chi, r);
            if c.re != 0.0 || c.im != 0.0 {
                v += c * self.value[r as usize];
                d += c * self.spread[r as usize];
            }
        }
        SmoothedEstimate {
            value: v,
            error_bound: d.norm() + self.rounding + self.tail,
            x_ladder: self.scales.clone(),
            truncation: *self.truncations.last().unwrap(),
        }
    }

    /// All phi(q) twisted values in the group's enumeration order.
    pub fn all_twisted(&self, group: &CharacterGroup) -> Vec<SmoothedEstimate> {
        group.characters().map(|chi| self.twisted(group, &chi)).collect()
    }
}

/// L(1/2, f, chi) through the ladder chosen for f's weight and level.
pub fn twisted_central_value(
    f: &HeckeEigenform,
    group: &CharacterGroup,
    chi: &Character,
    policy: Option<&LadderPolicy>,
) -> Result<SmoothedEstimate> {
    let default = LadderPolicy::for_form(f.weight(), f.level(), group.modulus());
    let sums = ClassSums::compute(f, group.modulus(), policy.unwrap_or(&default))?;
    Ok(sums.twisted(group, chi))
}
