//! Number-theoretic transforms over primes c*2^25+1 < 2^32, Montgomery form,
//! plus Garner reconstruction of signed integers from residues.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

/// (prime, primitive root); all are c*2^25 + 1.
pub const PRIMES: [(u32, u32); 12] = [
    (4194304001, 3),
    (3892314113, 3),
    (3489660929, 3),
    (3221225473, 5),
    (2885681153, 3),
    (2717908993, 5),
    (2483027969, 3),
    (2281701377, 3),
    (2113929217, 5),
    (2013265921, 31),
    (1811939329, 13),
    (1711276033, 29),
];

pub const MAX_LOG_SIZE: u32 = 25;

#[derive(Clone, Debug)]
pub struct Modulus {
    pub p: u32,
    g: u32,
    pinv: u32, // p^{-1} mod 2^32
    r2: u32,   // 2^64 mod p
}

impl Modulus {
    pub fn new(p: u32, g: u32) -> Self {
        let mut inv = 1u32;
        for _ in 0..5 {
            inv = inv.wrapping_mul(2u32.wrapping_sub(p.wrapping_mul(inv)));
        }
        let r = ((1u128 << 64) % p as u128) as u32;
        Modulus { p, g, pinv: inv, r2: r }
    }

    pub fn nth(i: usize) -> Self {
        let (p, g) = PRIMES[i];
        Self::new(p, g)
    }

    /// a*b*2^{-32} mod p, inputs in [0, p).
    #[inline(always)]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        let t = a as u64 * b as u64;
        let m = (t as u32).wrapping_mul(self.pinv);
        let mp = m as u64 * self.p as u64;
        let (hi_t, hi_m) = ((t >> 32) as u32, (mp >> 32) as u32);
        if hi_t >= hi_m {
            hi_t - hi_m
        } else {
            hi_t.wrapping_sub(hi_m).wrapping_add(self.p)
        }
    }

    #[inline(always)]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a.wrapping_add(b);
        if s < a || s >= self.p {
            s.wrapping_sub(self.p)
        } else {
            s
        }
    }

    #[inline(always)]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a.wrapping_sub(b).wrapping_add(self.p)
        }
    }

    pub fn to_mont(&self, a: u32) -> u32 {
        self.mul(a % self.p, self.r2)
    }

    pub fn from_mont(&self, a: u32) -> u32 {
        self.mul(a, 1)
    }

    /// Plain (non-Montgomery) modular product.
    pub fn mul_plain(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    pub fn pow_plain(&self, mut b: u32, mut e: u64) -> u32 {
        let mut r = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul_plain(r, b);
            }
            b = self.mul_plain(b, b);
            e >>= 1;
        }
        r
    }

    pub fn inv_plain(&self, a: u32) -> u32 {
        self.pow_plain(a, self.p as u64 - 2)
    }

    pub fn reduce_i64(&self, x: i64) -> u32 {
        x.rem_euclid(self.p as i64) as u32
    }

    pub fn reduce_big(&self, x: &BigInt) -> u32 {
        let r = x % BigInt::from(self.p);
        let r = r.to_i64().unwrap();
        self.reduce_i64(r)
    }
}

/// Transform plan for one modulus and one power-of-two size.
pub struct Ntt {
    pub m: Modulus,
    n: usize,
    // roots for the stage with half-length `len` live at [len, 2 len)
    fwd: Vec<u32>,
    inv: Vec<u32>,
    n_inv: u32,
}

impl Ntt {
    pub fn new(m: Modulus, log_n: u32) -> Self {
        assert!(log_n <= MAX_LOG_SIZE);
        let n = 1usize << log_n;
        let mut fwd = vec![0u32; n.max(2)];
        let mut inv = vec![0u32; n.max(2)];
        let mut len = 1;
        while len < n {
            let w = m.pow_plain(m.g, (m.p as u64 - 1) / (2 * len as u64));
            let wi = m.inv_plain(w);
            let (wm, wim) = (m.to_mont(w), m.to_mont(wi));
            let (mut a, mut b) = (m.to_mont(1), m.to_mont(1));
            for j in 0..len {
                fwd[len + j] = a;
                inv[len + j] = b;
                a = m.mul(a, wm);
                b = m.mul(b, wim);
            }
            len <<= 1;
        }
        let n_inv = m.to_mont(m.inv_plain(n as u32 % m.p));
        Ntt { m, n, fwd, inv, n_inv }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Decimation in frequency; output in bit-reversed order.
    pub fn forward(&self, a: &mut [u32]) {
        let m = &self.m;
        let mut len = self.n / 2;
        while len >= 1 {
            let w = &self.fwd[len..2 * len];
            for block in a.chunks_exact_mut(2 * len) {
                let (lo, hi) = block.split_at_mut(len);
                for j in 0..len {
                    let (u, v) = (lo[j], hi[j]);
                    lo[j] = m.add(u, v);
                    hi[j] = m.mul(m.sub(u, v), w[j]);
                }
            }
            len >>= 1;
        }
    }

    /// Decimation in time from bit-reversed input; scales by 1/n.
    pub fn inverse(&self, a: &mut [u32]) {
        let m = &self.m;
        let mut len = 1;
        while len < self.n {
            let w = &self.inv[len..2 * len];
            for block in a.chunks_exact_mut(2 * len) {
                let (lo, hi) = block.split_at_mut(len);
                for j in 0..len {
                    let u = lo[j];
                    let v = m.mul(hi[j], w[j]);
                    lo[j] = m.add(u, v);
                    hi[j] = m.sub(u, v);
                }
            }
            len <<= 1;
        }
        for x in a.iter_mut() {
            *x = m.mul(*x, self.n_inv);
        }
    }
}

fn log2_ceil(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

/// First `len` coefficients of a*b, everything in plain residues mod m.
pub fn mul_trunc(a: &[u32], b: &[u32], len: usize, m: &Modulus) -> Vec<u32> {
    let la = a.len().min(len);
    let lb = b.len().min(len);
    if la == 0 || lb == 0 {
        return vec![0; len];
    }
    if la.min(lb) <= 32 {
        return schoolbook(&a[..la], &b[..lb], len, m);
    }
    let log_n = log2_ceil((la + lb - 1).min(2 * len));
    let plan = Ntt::new(m.clone(), log_n);
    let n = plan.size();
    let mut fa = vec![0u32; n];
    for (x, &y) in fa.iter_mut().zip(&a[..la]) {
        *x = m.to_mont(y);
    }
    plan.forward(&mut fa);
    let same = std::ptr::eq(a.as_ptr(), b.as_ptr()) && la == lb;
    if same {
        for x in fa.iter_mut() {
            *x = m.mul(*x, *x);
        }
    } else {
        let mut fb = vec![0u32; n];
        for (x, &y) in fb.iter_mut().zip(&b[..lb]) {
            *x = m.to_mont(y);
        }
        plan.forward(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = m.mul(*x, *y);
        }
    }
    plan.inverse(&mut fa);
    fa.truncate(len);
    for x in fa.iter_mut() {
        *x = m.from_mont(*x);
    }
    fa.resize(len, 0);
    fa
}

fn schoolbook(a: &[u32], b: &[u32], len: usize, m: &Modulus) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if i + j >= len {
                break;
            }
            out[i + j] = ((out[i + j] as u64 + x as u64 * y as u64) % m.p as u64) as u32;
        }
    }
    out
}

/// Mixed-radix (Garner) reconstruction of symmetric residues.
pub struct Garner {
    moduli: Vec<Modulus>,
    // inv[i][j] = p_j^{-1} mod p_i for j < i
    inv: Vec<Vec<u32>>,
    half: Vec<u32>, // digits of (P-1)/2
}

/// Signed value recovered from residues, as mixed-radix digits.
pub struct Digits {
    negative: bool,
    // digits of |x| (when negative, of |x| - 1)
    d: Vec<u32>,
}

impl Garner {
    pub fn new(count: usize) -> Self {
        assert!(count >= 1 && count <= PRIMES.len());
        let moduli: Vec<Modulus> = (0..count).map(Modulus::nth).collect();
        let inv = (0..count)
            .map(|i| (0..i).map(|j| moduli[i].inv_plain(moduli[j].p % moduli[i].p)).collect())
            .collect();
        let mut g = Garner { moduli, inv, half: Vec::new() };
        // (P-1)/2 has digits ((p_i - 1)/2 ...) only when computed properly;
        // do it from the BigInt value.
        let mut prod = BigInt::from(1u32);
        for m in &g.moduli {
            prod *= m.p;
        }
        let half: BigInt = (prod - 1u32) / 2u32;
        let res: Vec<u32> = g.moduli.iter().map(|m| m.reduce_big(&half)).collect();
        g.half = g.raw_digits(&res);
        g
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    /// Bits of the symmetric range.
    pub fn capacity_bits(&self) -> f64 {
        self.moduli.iter().map(|m| (m.p as f64).log2()).sum::<f64>() - 1.0
    }

    fn raw_digits(&self, r: &[u32]) -> Vec<u32> {
        let k = self.moduli.len();
        let mut d = vec![0u32; k];
        for i in 0..k {
            let m = &self.moduli[i];
            let mut t = r[i] % m.p;
            for j in 0..i {
                t = m.mul_plain(m.sub(t, d[j] % m.p), self.inv[i][j]);
            }
            d[i] = t;
        }
        d
    }

    pub fn digits(&self, r: &[u32]) -> Digits {
        let d = self.raw_digits(r);
        let mut above = false;
        for i in (0..d.len()).rev() {
            if d[i] != self.half[i] {
                above = d[i] > self.half[i];
                break;
            }
        }
        if above {
            // P - 1 - x, digit-wise complement
            let c = d.iter().zip(&self.moduli).map(|(&x, m)| m.p - 1 - x).collect();
            Digits { negative: true, d: c }
        } else {
            Digits { negative: false, d }
        }
    }

    /// True when the top digit is zero, i.e. |x| fits in all but the last
    /// prime; a wrapped-around value passes only by accident (prob ~ 1/p).
    pub fn has_headroom(digits: &Digits) -> bool {
        *digits.d.last().unwrap() == 0
    }

    pub fn to_bigint(&self, digits: &Digits) -> BigInt {
        let mut x = BigInt::zero();
        for i in (0..digits.d.len()).rev() {
            x = x * self.moduli[i].p + digits.d[i];
        }
        if digits.negative {
            -(x + 1u32)
        } else {
            x
        }
    }

    pub fn to_f64(&self, digits: &Digits) -> f64 {
        let mut x = 0.0f64;
        for i in (0..digits.d.len()).rev() {
            x = x * self.moduli[i].p as f64 + digits.d[i] as f64;
        }
        if digits.negative {
            -(x + 1.0)
        } else {
            x
        }
    }
}
