use crate::arith::{factor, SpfSieve};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::sync::OnceLock;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provider {
    Computed,
    File(String),
}

/// Normalized coefficients A(m), m <= bound, of a Hecke eigenform with
/// trivial nebentypus. A(m) = a(m) m^{-(k-1)/2}.
pub struct HeckeEigenform {
    weight: u32,
    level: u64,
    label: String,
    provider: Provider,
    re: Vec<f64>,
    im: Option<Vec<f64>>,
    half: OnceLock<(Vec<f64>, Option<Vec<f64>>)>,
}

impl std::fmt::Debug for HeckeEigenform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeckeEigenform")
            .field("weight", &self.weight)
            .field("level", &self.level)
            .field("label", &self.label)
            .field("bound", &self.bound())
            .finish()
    }
}

impl HeckeEigenform {
    /// Build the full table from prime values `ap` (one entry per prime in
    /// `primes`, ascending, covering every prime <= bound).
    pub fn from_primes(
        weight: u32,
        level: u64,
        label: impl Into<String>,
        provider: Provider,
        bound: usize,
        primes: &[u64],
        ap: &[Complex64],
    ) -> Result<Self> {
        let spf = SpfSieve::new(bound.max(1));
        let complex = ap.iter().any(|z| z.im != 0.0);
        let mut re = vec![0.0f64; bound + 1];
        let mut im = if complex { Some(vec![0.0f64; bound + 1]) } else { None };
        let mut idx = 0usize;
        let get = |re: &[f64], im: &Option<Vec<f64>>, i: usize| {
            Complex64::new(re[i], im.as_ref().map_or(0.0, |v| v[i]))
        };
        if bound >= 1 {
            re[1] = 1.0;
        }
        for n in 2..=bound {
            let p = spf.spf(n) as usize;
            let val = if p == n {
                while idx < primes.len() && (primes[idx] as usize) < n {
                    idx += 1;
                }
                if idx >= primes.len() || primes[idx] as usize != n {
                    return Err(Error::CoefficientRange { needed: n as u64, available: n as u64 - 1 });
                }
                ap[idx]
            } else {
                let q = n / p;
                let a_p = get(&re, &im, p);
                let base = a_p * get(&re, &im, q);
                if q % p == 0 && level % p as u64 != 0 {
                    base - get(&re, &im, q / p)
                } else {
                    base
                }
            };
            re[n] = val.re;
            if let Some(v) = im.as_mut() {
                v[n] = val.im;
            }
        }
        Ok(HeckeEigenform {
            weight,
            level,
            label: label.into(),
            provider,
            re,
            im,
            half: OnceLock::new(),
        })
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn provider(&self) -> &Provider {
        &self.provider
    }

    pub fn bound(&self) -> u64 {
        (self.re.len() - 1) as u64
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn re_table(&self) -> &[f64] {
        &self.re
    }

    pub fn im_table(&self) -> Option<&[f64]> {
        self.im.as_deref()
    }

    /// A(m)/sqrt(m) tables, built on first use.
    pub fn half_scaled(&self) -> (&[f64], Option<&[f64]>) {
        let (r, i) = self.half.get_or_init(|| {
            let scale = |v: &[f64]| {
                let mut out: Vec<f64> = v.iter().enumerate().map(|(m, x)| x / (m as f64).sqrt()).collect();
                out[0] = 0.0;
                out
            };
            (scale(&self.re), self.im.as_ref().map(|v| scale(v)))
        });
        (r, i.as_deref())
    }

    pub fn check_range(&self, m: u64) -> Result<()> {
        if m > self.bound() {
            Err(Error::CoefficientRange { needed: m, available: self.bound() })
        } else {
            Ok(())
        }
    }

    pub fn coefficient(&self, m: u64) -> Result<Complex64> {
        if m == 0 {
            return Err(Error::Domain("A(0) is not defined".into()));
        }
        self.check_range(m)?;
        let i = m as usize;
        Ok(Complex64::new(self.re[i], self.im.as_ref().map_or(0.0, |v| v[i])))
    }

    /// A(p^e) from A(p) by the Hecke recursion; works past the table bound
    /// as long as p itself is inside it.
    pub fn prime_power(&self, p: u64, e: u32) -> Result<Complex64> {
        let ap = self.coefficient(p)?;
        let one = Complex64::new(1.0, 0.0);
        if self.level % p == 0 {
            return Ok(ap.powu(e));
        }
        let (mut prev, mut cur) = (one, ap);
        if e == 0 {
            return Ok(one);
        }
        for _ in 1..e {
            let next = ap * cur - prev;
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// A(n) for arbitrary n whose prime factors are inside the table.
    pub fn coefficient_any(&self, n: u64) -> Result<Complex64> {
        if n <= self.bound() {
            return self.coefficient(n);
        }
        let mut acc = Complex64::new(1.0, 0.0);
        for (p, e) in factor(n).factors {
            acc *= self.prime_power(p, e)?;
        }
        Ok(acc)
    }

    /// A(n^2) for n = 1..=n_max (index 0 unused).
    pub fn square_coefficients(&self, n_max: usize) -> Result<Vec<Complex64>> {
        self.check_range(n_max as u64)?;
        let spf = SpfSieve::new(n_max.max(1));
        let mut out = vec![Complex64::new(0.0, 0.0); n_max + 1];
        if n_max >= 1 {
            out[1] = Complex64::new(1.0, 0.0);
        }
        for n in 2..=n_max {
            let p = spf.spf(n) as usize;
            let mut c = n;
            let mut e = 0;
            while c % p == 0 {
                c /= p;
                e += 1;
            }
            out[n] = self.prime_power(p as u64, 2 * e)? * out[c];
        }
        Ok(out)
    }
}
