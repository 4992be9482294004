//! Level-one Hecke eigenforms from the Miller basis.
//!
//! For dim S_k = 2 (k = 24) T_2 acts on the Miller basis f1 = q + O(q^3),
//! f2 = q^2 + O(q^3) by T_2 f1 = (f1(4) + 2^{k-1}) f2 and T_2 f2 = f1 + f2(4) f2,
//! so the eigenforms are f1 + lambda f2 with
//! lambda^2 - f2(4) lambda - (f1(4) + 2^{k-1}) = 0.

use super::form::{HeckeEigenform, Provider};
use super::ntt::Garner;
use super::qexp::{cusp_dimension, garner_for, miller_basis_exact, miller_basis_mod};
use crate::arith::{primes_up_to, SpfSieve};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const SCALE_BITS: u64 = 128;

/// An eigenform as an exact combination of the Miller basis, scaled by
/// 2^SCALE_BITS: f = sum_b c_b f_b / 2^SCALE_BITS.
#[derive(Clone, Debug)]
pub struct EigenCombination {
    pub label: String,
    pub scaled: Vec<BigInt>,
    /// a(2) as a float, for reporting
    pub a2: f64,
}

/// Eigen-decomposition data for weight k; also returns the T_2 trace on
/// the cusp space computed from the basis (not from the eigenvalues).
pub fn level1_combinations(k: u32) -> Result<(Vec<EigenCombination>, i64)> {
    let dim = cusp_dimension(k);
    if dim == 0 {
        return Ok((Vec::new(), 0));
    }
    let basis = miller_basis_exact(k, 4)?;
    let one = BigInt::from(1u8) << SCALE_BITS;
    let two_pow = BigInt::from(1u8) << (k - 1);
    if dim == 1 {
        let a2 = basis[0].coeffs[2].to_f64().unwrap();
        let trace = basis[0].coeffs[2].to_i64().unwrap();
        return Ok((vec![EigenCombination { label: format!("k{k}"), scaled: vec![one], a2 }], trace));
    }
    let f1_4 = &basis[0].coeffs[4];
    let b = basis[1].coeffs[4].clone();
    let c = f1_4 + &two_pow;
    let disc: BigInt = &b * &b + BigInt::from(4u8) * &c;
    if !disc.is_positive() {
        return Err(Error::Precision("T_2 discriminant not positive".into()));
    }
    let root = (&disc << (2 * SCALE_BITS)).sqrt();
    let trace = b.to_i64().unwrap();
    let mut out = Vec::new();
    for (sign, tag) in [(1i32, '+'), (-1, '-')] {
        let lam: BigInt = ((&b << SCALE_BITS) + if sign > 0 { root.clone() } else { -root.clone() }) >> 1u32;
        // characteristic-polynomial residual in units of 2^{-2 SCALE_BITS}
        let res: BigInt = &lam * &lam - (&b * &lam << SCALE_BITS) - (&c << (2 * SCALE_BITS));
        let res_f = res.to_f64().unwrap() / 2f64.powi(2 * SCALE_BITS as i32);
        if res_f.abs() >= 1e-20 {
            return Err(Error::Precision(format!("T_2 eigenvalue residual {res_f:e}")));
        }
        let a2 = lam.to_f64().unwrap() / 2f64.powi(SCALE_BITS as i32);
        out.push(EigenCombination { label: format!("k{k}{tag}"), scaled: vec![one.clone(), lam], a2 });
    }
    Ok((out, trace))
}

/// Normalized A(p) at every prime p <= bound, for every eigenform.
pub fn level1_prime_coefficients(k: u32, bound: usize) -> Result<(Vec<u64>, Vec<EigenCombination>, Vec<Vec<f64>>)> {
    let (combos, _) = level1_combinations(k)?;
    let dim = combos.len();
    let primes = primes_up_to(bound);
    if dim == 0 {
        return Ok((primes, combos, Vec::new()));
    }
    let len = bound + 1;
    let spf = SpfSieve::new(len);
    let g = garner_for(k, len);
    let nmod = g.moduli().len();
    // residues[j][b * np + i]
    let np = primes.len();
    let mut residues: Vec<Vec<u32>> = Vec::with_capacity(nmod);
    for m in g.moduli() {
        let basis = miller_basis_mod(k, len, m, &spf)?;
        let mut r = vec![0u32; dim * np];
        for (b, series) in basis.iter().enumerate() {
            for (i, &p) in primes.iter().enumerate() {
                r[b * np + i] = series[p as usize];
            }
        }
        residues.push(r);
    }
    drop(spf);
    let half_weight = (k as f64 - 1.0) / 2.0;
    let scale = 2f64.powi(SCALE_BITS as i32);
    let mut out = vec![vec![0.0f64; np]; dim];
    let mut r = vec![0u32; nmod];
    let mut vals: Vec<BigInt> = vec![BigInt::zero(); dim];
    for (i, &p) in primes.iter().enumerate() {
        for b in 0..dim {
            for j in 0..nmod {
                r[j] = residues[j][b * np + i];
            }
            let d = g.digits(&r);
            if !Garner::has_headroom(&d) {
                return Err(Error::Precision(format!("CRT headroom lost at q^{p}")));
            }
            vals[b] = g.to_bigint(&d);
        }
        let norm = (p as f64).powf(half_weight);
        for (e, combo) in combos.iter().enumerate() {
            let mut acc = BigInt::zero();
            for b in 0..dim {
                acc += &combo.scaled[b] * &vals[b];
            }
            out[e][i] = acc.to_f64().unwrap() / scale / norm;
        }
    }
    Ok((primes, combos, out))
}

fn cache_file(dir: &Path, k: u32, bound: usize) -> PathBuf {
    dir.join(format!("level1-k{k}-n{bound}.bin"))
}

const MAGIC: &[u8; 8] = b"GL2MLV1\0";

fn write_cache(path: &Path, k: u32, bound: usize, tables: &[Vec<f64>]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        f.write_all(MAGIC)?;
        f.write_all(&k.to_le_bytes())?;
        f.write_all(&(bound as u64).to_le_bytes())?;
        f.write_all(&(tables.len() as u64).to_le_bytes())?;
        let np = tables.first().map_or(0, |t| t.len());
        f.write_all(&(np as u64).to_le_bytes())?;
        for t in tables {
            for x in t {
                f.write_all(&x.to_le_bytes())?;
            }
        }
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

fn read_cache(path: &Path, k: u32) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = || Error::Parse { line: 0, msg: format!("corrupt cache {}", path.display()) };
    if buf.len() < 36 || &buf[..8] != MAGIC {
        return Err(bad());
    }
    let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let kk = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    let bound = u64_at(12) as usize;
    let nt = u64_at(20) as usize;
    let np = u64_at(28) as usize;
    if kk != k || buf.len() != 36 + 8 * nt * np {
        return Err(bad());
    }
    let tables = (0..nt)
        .map(|t| {
            (0..np)
                .map(|i| f64::from_le_bytes(buf[36 + 8 * (t * np + i)..44 + 8 * (t * np + i)].try_into().unwrap()))
                .collect()
        })
        .collect();
    Ok((bound, tables))
}

/// Smallest cached table for weight k covering `bound`.
fn find_cache(dir: &Path, k: u32, bound: usize) -> Option<PathBuf> {
    let prefix = format!("level1-k{k}-n");
    let mut best: Option<(usize, PathBuf)> = None;
    for e in std::fs::read_dir(dir).ok()?.flatten() {
        let name = e.file_name().to_string_lossy().to_string();
        let Some(rest) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".bin")) else {
            continue;
        };
        let Ok(b) = rest.parse::<usize>() else { continue };
        if b >= bound && best.as_ref().is_none_or(|(bb, _)| b < *bb) {
            best = Some((b, e.path()));
        }
    }
    best.map(|(_, p)| p)
}

/// All normalized level-one eigenforms of weight k with A(m) tabulated for
/// m <= bound. With `cache`, prime tables are read from / written to that
/// directory.
pub fn level1_eigenforms(k: u32, bound: usize, cache: Option<&Path>) -> Result<Vec<HeckeEigenform>> {
    let dim = cusp_dimension(k);
    if bound < 2 * dim.max(1) {
        return Err(Error::Precision(format!("bound {bound} too small to diagonalize weight {k}")));
    }
    let (combos, _) = level1_combinations(k)?;
    let primes = primes_up_to(bound);
    let mut tables: Option<Vec<Vec<f64>>> = None;
    if let Some(dir) = cache {
        if let Some(path) = find_cache(dir, k, bound) {
            if let Ok((_, t)) = read_cache(&path, k) {
                if t.len() == combos.len() && t.iter().all(|v| v.len() >= primes.len()) {
                    tables = Some(t.into_iter().map(|mut v| {
                        v.truncate(primes.len());
                        v
                    }).collect());
                }
            }
        }
    }
    let tables = match tables {
        Some(t) => t,
        None => {
            let (_, _, t) = level1_prime_coefficients(k, bound)?;
            if let Some(dir) = cache {
                std::fs::create_dir_all(dir)?;
                write_cache(&cache_file(dir, k, bound), k, bound, &t)?;
            }
            t
        }
    };
    combos
        .iter()
        .zip(tables)
        .map(|(c, t)| {
            let ap: Vec<Complex64> = t.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
            HeckeEigenform::from_primes(k, 1, c.label.clone(), Provider::Computed, bound, &primes, &ap)
        })
        .collect()
}

/// Exact integer coefficients of a level-one eigenform with rational
/// coefficients (dim S_k = 1), indices 0..=prec.
pub fn rational_eigenform_exact(k: u32, prec: usize) -> Result<Vec<BigInt>> {
    if cusp_dimension(k) != 1 {
        return Err(Error::Unsupported(format!("weight {k}: eigenforms are not rational")));
    }
    Ok(miller_basis_exact(k, prec)?.remove(0).coeffs)
}
