//! Exact q-expansions. Products go through the multi-prime transform; the
//! level-one cusp basis is assembled residue by residue and reconstructed
//! with Garner.

use super::ntt::{mul_trunc, Garner, Modulus};
use crate::arith::SpfSieve;
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QExpansion {
    pub coeffs: Vec<BigInt>,
}

impl QExpansion {
    pub fn new(coeffs: Vec<BigInt>) -> Self {
        QExpansion { coeffs }
    }

    pub fn prec(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        QExpansion::new((0..n).map(|i| &self.coeffs[i] + &other.coeffs[i]).collect())
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        QExpansion::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    fn max_bits(&self) -> u64 {
        self.coeffs.iter().map(|x| x.bits()).max().unwrap_or(0)
    }

    /// Exact truncated product.
    pub fn mul(&self, other: &Self) -> Self {
        let len = self.coeffs.len().min(other.coeffs.len());
        let terms = (len as f64).log2().ceil() as u64 + 1;
        let bits = self.max_bits() + other.max_bits() + terms + 2;
        let mut count = 1;
        while (Garner::new(count).capacity_bits() as u64) < bits + 32 {
            count += 1;
            if count > super::ntt::PRIMES.len() {
                panic!("product exceeds the transform's CRT capacity ({bits} bits)");
            }
        }
        let g = Garner::new(count);
        let res: Vec<Vec<u32>> = g
            .moduli()
            .iter()
            .map(|m| {
                let a: Vec<u32> = self.coeffs[..len].iter().map(|x| m.reduce_big(x)).collect();
                let b: Vec<u32> = other.coeffs[..len].iter().map(|x| m.reduce_big(x)).collect();
                mul_trunc(&a, &b, len, m)
            })
            .collect();
        let mut r = vec![0u32; count];
        let coeffs = (0..len)
            .map(|i| {
                for (j, v) in res.iter().enumerate() {
                    r[j] = v[i];
                }
                g.to_bigint(&g.digits(&r))
            })
            .collect();
        QExpansion::new(coeffs)
    }
}

fn bernoulli_ratio(k: u32) -> Result<i64> {
    // -2k / B_k
    match k {
        4 => Ok(240),
        6 => Ok(-504),
        _ => Err(Error::Unsupported(format!("Eisenstein weight {k}; only 4 and 6"))),
    }
}

/// 1 - (2k/B_k) sum sigma_{k-1}(n) q^n for k in {4, 6}, exact.
pub fn eisenstein_qexp(k: u32, prec: usize) -> Result<QExpansion> {
    let c = BigInt::from(bernoulli_ratio(k)?);
    let mut sig = vec![BigInt::zero(); prec + 1];
    for d in 1..=prec {
        let dk = BigInt::from(d).pow(k - 1);
        let mut m = d;
        while m <= prec {
            sig[m] += &dk;
            m += d;
        }
    }
    sig[0] = BigInt::one();
    for x in sig.iter_mut().skip(1) {
        *x *= &c;
    }
    Ok(QExpansion::new(sig))
}

/// prod (1-q^n)^3 = sum (-1)^n (2n+1) q^{n(n+1)/2}, first `len` terms mod p.
fn jacobi_cube_mod(len: usize, m: &Modulus) -> Vec<u32> {
    let mut v = vec![0u32; len];
    let mut n = 0i64;
    loop {
        let e = (n * (n + 1) / 2) as usize;
        if e >= len {
            break;
        }
        let c = if n % 2 == 0 { 2 * n + 1 } else { -(2 * n + 1) };
        v[e] = m.reduce_i64(c);
        n += 1;
    }
    v
}

/// Delta = q prod (1-q^n)^24 mod p, indices 0..len.
pub fn delta_mod(len: usize, m: &Modulus) -> Vec<u32> {
    let mut p = jacobi_cube_mod(len, m);
    for _ in 0..3 {
        p = mul_trunc(&p, &p, len, m);
    }
    let mut d = vec![0u32; len];
    d[1..].copy_from_slice(&p[..len - 1]);
    d
}

/// E_4 or E_6 mod p through a multiplicative sigma sieve.
pub fn eisenstein_mod(k: u32, len: usize, m: &Modulus, spf: &SpfSieve) -> Result<Vec<u32>> {
    let c = m.reduce_i64(bernoulli_ratio(k)?);
    assert!(spf.limit() + 1 >= len);
    let r = (k - 1) as u64;
    let mut sig = vec![0u32; len];
    if len > 1 {
        sig[1] = 1;
    }
    for n in 2..len {
        let p = spf.spf(n) as usize;
        let q = n / p;
        let pr = m.pow_plain((p as u64 % m.p as u64) as u32, r);
        let base = m.mul_plain(sig[q], m.add(1, pr));
        sig[n] = if q % p == 0 { m.sub(base, m.mul_plain(pr, sig[q / p])) } else { base };
    }
    let mut e = vec![0u32; len];
    e[0] = 1;
    for n in 1..len {
        e[n] = m.mul_plain(c, sig[n]);
    }
    Ok(e)
}

/// dim S_k(SL_2(Z)) for even k >= 4.
pub fn cusp_dimension(k: u32) -> usize {
    let d = (k / 12) as usize;
    if k % 12 == 2 {
        d - 1
    } else {
        d
    }
}

/// Miller basis of S_k mod p (f_j = q^j + O(q^{dim+1})), for 12 <= k <= 26.
pub fn miller_basis_mod(k: u32, len: usize, m: &Modulus, spf: &SpfSieve) -> Result<Vec<Vec<u32>>> {
    if !(12..=26).contains(&k) || k % 2 == 1 {
        return Err(Error::Unsupported(format!("level-one weight {k}; supported: even 12..=26")));
    }
    let dim = cusp_dimension(k);
    if dim == 0 {
        return Ok(Vec::new());
    }
    let delta = delta_mod(len, m);
    let e4 = || eisenstein_mod(4, len, m, spf);
    let e6 = || eisenstein_mod(6, len, m, spf);
    let mul = |a: &[u32], b: &[u32]| mul_trunc(a, b, len, m);
    if dim == 1 {
        let f = match k - 12 {
            0 => delta,
            4 => mul(&delta, &e4()?),
            6 => mul(&delta, &e6()?),
            8 => {
                let a = e4()?;
                mul(&delta, &mul(&a, &a))
            }
            10 => mul(&delta, &mul(&e4()?, &e6()?)),
            14 => {
                let a = e4()?;
                mul(&delta, &mul(&mul(&a, &a), &e6()?))
            }
            _ => unreachable!(),
        };
        return Ok(vec![f]);
    }
    // k = 24: {Delta E_4^3, Delta^2} reduced to Miller form
    let a = e4()?;
    let e12 = mul(&mul(&a, &a), &a);
    let g1 = mul(&delta, &e12);
    let g2 = mul(&delta, &delta);
    let c = g1[2];
    let f1: Vec<u32> = g1.iter().zip(&g2).map(|(&x, &y)| m.sub(x, m.mul_plain(c, y))).collect();
    Ok(vec![f1, g2])
}

/// Exact Miller basis to precision `prec` (coefficients 0..=prec).
pub fn miller_basis_exact(k: u32, prec: usize) -> Result<Vec<QExpansion>> {
    let len = prec + 1;
    let spf = SpfSieve::new(len.max(2));
    let g = garner_for(k, len);
    let per_mod: Vec<Vec<Vec<u32>>> = g
        .moduli()
        .iter()
        .map(|m| miller_basis_mod(k, len, m, &spf))
        .collect::<Result<_>>()?;
    let dim = cusp_dimension(k);
    let mut out = Vec::with_capacity(dim);
    let mut r = vec![0u32; per_mod.len()];
    for b in 0..dim {
        let mut coeffs = Vec::with_capacity(len);
        for i in 0..len {
            for (j, v) in per_mod.iter().enumerate() {
                r[j] = v[b][i];
            }
            let d = g.digits(&r);
            if !Garner::has_headroom(&d) {
                return Err(Error::Precision(format!("CRT headroom lost at q^{i}")));
            }
            coeffs.push(g.to_bigint(&d));
        }
        out.push(QExpansion::new(coeffs));
    }
    Ok(out)
}

/// Number of transform primes for weight-k cusp coefficients below `len`,
/// including one prime of headroom.
pub fn garner_for(k: u32, len: usize) -> Garner {
    let n = len.max(2) as f64;
    let need = (k as f64 - 1.0) / 2.0 * n.log2() + 2.0 * n.log2() / 3.0 + 24.0;
    let mut count = 2;
    while Garner::new(count - 1).capacity_bits() < need {
        count += 1;
    }
    Garner::new(count)
}

/// prod (1-q^n)^24 via the pentagonal series and schoolbook powers (i128);
/// an oracle independent of the transform and the Jacobi identity.
pub fn eta24_oracle(prec: usize) -> Vec<i128> {
    let len = prec + 1;
    let mut pent = vec![0i128; len];
    let mut k = 0i64;
    loop {
        let mut any = false;
        for kk in if k == 0 { vec![0] } else { vec![k, -k] } {
            let e = (kk * (3 * kk - 1) / 2) as usize;
            if e < len {
                pent[e] = if kk.abs() % 2 == 0 { 1 } else { -1 };
                any = true;
            }
        }
        if !any {
            break;
        }
        k += 1;
    }
    let mul = |a: &[i128], b: &[i128]| {
        let mut c = vec![0i128; len];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b[..len - i].iter().enumerate() {
                c[i + j] += x * y;
            }
        }
        c
    };
    let p2 = mul(&pent, &pent);
    let p4 = mul(&p2, &p2);
    let p8 = mul(&p4, &p4);
    let p16 = mul(&p8, &p8);
    let p24 = mul(&p16, &p8);
    // Delta(n) = coefficient of q^{n-1}
    let mut d = vec![0i128; len];
    d[1..].copy_from_slice(&p24[..len - 1]);
    d
}

pub fn to_i128(x: &BigInt) -> Option<i128> {
    if x.bits() > 126 {
        return None;
    }
    let (sign, mag) = x.to_u64_digits();
    let mut v: i128 = 0;
    for (i, d) in mag.iter().enumerate() {
        v |= (*d as i128) << (64 * i);
    }
    Some(if x.is_negative() || sign == num_bigint::Sign::Minus { -v } else { v })
}
