//! Coefficient files: header `k,N0,label,maxm`, then rows `m,re,im`.

use super::form::{HeckeEigenform, Provider};
use crate::arith::{factor, is_prime, primes_up_to};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::Path;

const TOL: f64 = 1e-9;

pub fn ingest_coefficients(path: &Path) -> Result<HeckeEigenform> {
    let text = std::fs::read_to_string(path)?;
    parse_coefficients(&text, &path.display().to_string())
}

pub fn parse_coefficients(text: &str, origin: &str) -> Result<HeckeEigenform> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let perr = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
    let h: Vec<&str> = header.split(',').map(str::trim).collect();
    if h.len() != 4 {
        return Err(perr(hl, "header must be k,N0,label,maxm".into()));
    }
    let k: u32 = h[0].parse().map_err(|_| perr(hl, format!("bad weight {:?}", h[0])))?;
    let n0: u64 = h[1].parse().map_err(|_| perr(hl, format!("bad level {:?}", h[1])))?;
    let label = h[2].to_string();
    let maxm: u64 = h[3].parse().map_err(|_| perr(hl, format!("bad maxm {:?}", h[3])))?;
    if k < 2 || k % 2 == 1 {
        return Err(perr(hl, format!("weight {k} must be even")));
    }
    if n0 == 0 || !factor(n0).is_squarefree() {
        return Err(perr(hl, format!("level {n0} must be square-free")));
    }
    let mut rows: BTreeMap<u64, Complex64> = BTreeMap::new();
    for (ln, l) in lines {
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(perr(ln, "row must be m,re,im".into()));
        }
        let m: u64 = f[0].parse().map_err(|_| perr(ln, format!("bad index {:?}", f[0])))?;
        let re: f64 = f[1].parse().map_err(|_| perr(ln, format!("bad real part {:?}", f[1])))?;
        let im: f64 = f[2].parse().map_err(|_| perr(ln, format!("bad imaginary part {:?}", f[2])))?;
        if m == 0 || m > maxm {
            return Err(perr(ln, format!("index {m} outside 1..={maxm}")));
        }
        rows.insert(m, Complex64::new(re, im));
    }
    let a1 = rows.get(&1).copied().ok_or(Error::Invariant { m: 1, msg: "A(1) missing".into() })?;
    if (a1 - 1.0).norm() > TOL {
        return Err(Error::Invariant { m: 1, msg: format!("A(1) = {a1}, expected 1") });
    }
    let primes = primes_up_to(maxm as usize);
    let mut ap = Vec::with_capacity(primes.len());
    for &p in &primes {
        let v = rows.get(&p).copied().ok_or(Error::Invariant { m: p, msg: "prime coefficient missing".into() })?;
        if n0 % p == 0 {
            if (v.norm() - 1.0 / (p as f64).sqrt()).abs() > TOL {
                return Err(Error::Invariant { m: p, msg: format!("|A(p)| = {} but p divides the level", v.norm()) });
            }
        } else if v.norm() > 2.0 + TOL {
            return Err(Error::Invariant { m: p, msg: format!("|A(p)| = {} exceeds 2", v.norm()) });
        }
        ap.push(v);
    }
    let form = HeckeEigenform::from_primes(k, n0, label, Provider::File(origin.to_string()), maxm as usize, &primes, &ap)?;
    for (&m, &v) in &rows {
        if m == 1 || is_prime(m) {
            continue;
        }
        let built = form.coefficient(m)?;
        if (built - v).norm() > TOL * v.norm().max(1.0) {
            let what = if factor(m).factors.len() == 1 { "Hecke recursion" } else { "multiplicativity" };
            return Err(Error::Invariant { m, msg: format!("{what} fails: file has {v}, primes give {built}") });
        }
    }
    Ok(form)
}

/// Inverse of ingestion: header plus every m <= bound.
pub fn export_coefficients(form: &HeckeEigenform, maxm: u64) -> Result<String> {
    form.check_range(maxm)?;
    let mut s = format!("{},{},{},{}\n", form.weight(), form.level(), form.label(), maxm);
    for m in 1..=maxm {
        let a = form.coefficient(m)?;
        s.push_str(&format!("{m},{:.17e},{:.17e}\n", a.re, a.im));
    }
    Ok(s)
}
