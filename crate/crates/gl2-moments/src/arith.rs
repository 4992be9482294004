//! Exact integer utilities: factoring, multiplicative functions, Ramanujan
//! sums, prime sieves.

use num_complex::Complex64;
use num_integer::Integer;

pub use num_rational::BigRational;

/// `n = prod p^e` with primes strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub n: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// Exponent of `p` in `n` (0 if absent).
    pub fn valuation(&self, p: u64) -> u32 {
        self.factors.iter().find(|&&(q, _)| q == p).map_or(0, |&(_, e)| e)
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn product(&self) -> u128 {
        self.factors.iter().fold(1u128, |acc, &(p, e)| acc * (p as u128).pow(e))
    }

    /// All positive divisors, ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut out = vec![1u64];
        for &(p, e) in &self.factors {
            let len = out.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    out.push(out[i] * pk);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for all u64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// Brent's variant; the caller guarantees n is composite and odd.
fn pollard_rho(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut r = 1u64;
        let mut ys = 2u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..(128.min(r - k)) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += 128;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_into(d, out);
    split_into(n / d, out);
}

/// Trial division to 10^6, then Pollard rho on what is left.
pub fn factor(n: u64) -> Factorization {
    assert!(n >= 1, "factor(0)");
    let mut factors = Vec::new();
    let mut m = n;
    let mut p = 2u64;
    while p <= 1_000_000 && p * p <= m {
        if m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if m > 1 && p * p > m {
        // trial division already covered every p <= sqrt(m)
        factors.push((m, 1));
    } else if m > 1 {
        let mut big = Vec::new();
        split_into(m, &mut big);
        big.sort_unstable();
        for q in big {
            match factors.last_mut() {
                Some((last, e)) if *last == q => *e += 1,
                _ => factors.push((q, 1)),
            }
        }
    }
    Factorization { n, factors }
}

pub fn mobius(n: u64) -> i32 {
    let f = factor(n);
    if f.is_squarefree() {
        if f.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

pub fn euler_phi(n: u64) -> u64 {
    factor(n)
        .factors
        .iter()
        .fold(1u64, |acc, &(p, e)| acc * (p - 1) * p.pow(e - 1))
}

/// r(m): number of distinct prime divisors.
pub fn prime_omega(m: u64) -> u32 {
    factor(m).factors.len() as u32
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

pub fn is_squarefree(n: u64) -> bool {
    factor(n).is_squarefree()
}

pub fn divisors(n: u64) -> Vec<u64> {
    factor(n).divisors()
}

/// c_q(n) = sum_{d | (q,n)} d mu(q/d).
pub fn ramanujan_sum(q: u64, n: i64) -> i64 {
    let g = q.gcd(&n.unsigned_abs());
    divisors(g)
        .into_iter()
        .map(|d| d as i64 * mobius(q / d) as i64)
        .sum()
}

/// sum over d | n with (d, n0) = 1 of d^{-v}.
pub fn sigma_tilde(n: u64, v: Complex64, n0: u64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for (p, e) in factor(n).factors {
        if n0 % p == 0 {
            continue;
        }
        let x = Complex64::new(p as f64, 0.0).powc(-v);
        let mut s = Complex64::new(1.0, 0.0);
        let mut t = Complex64::new(1.0, 0.0);
        for _ in 0..e {
            t *= x;
            s += t;
        }
        acc *= s;
    }
    acc
}

/// Primes up to and including `n`.
pub fn primes_up_to(n: usize) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Smallest-prime-factor table for 0..=n (entries 0 and 1 are 0).
pub struct SpfSieve {
    spf: Vec<u32>,
}

impl SpfSieve {
    pub fn new(n: usize) -> Self {
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let j = i * p as usize;
                if p > si || j > n {
                    break;
                }
                spf[j] = p;
            }
        }
        SpfSieve { spf }
    }

    pub fn limit(&self) -> usize {
        self.spf.len() - 1
    }

    pub fn spf(&self, n: usize) -> u32 {
        self.spf[n]
    }

    pub fn is_prime(&self, n: usize) -> bool {
        n >= 2 && self.spf[n] as usize == n
    }

    /// Factorization through the table; `n` must be within the limit.
    pub fn factor(&self, mut n: usize) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = Vec::new();
        while n > 1 {
            let p = self.spf[n] as usize;
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p as u64, e));
        }
        out
    }
}
