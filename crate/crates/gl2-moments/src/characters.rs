//! The full group of Dirichlet characters mod Q.
//!
//! Values are kept as exponents of e(1/L), L the group exponent; complex
//! tables are derived from one shared root table.

use crate::arith::{factor, gcd, Factorization};
use num_complex::Complex64;
use num_integer::Integer;
use std::f64::consts::PI;

const NON_UNIT: u32 = u32::MAX;

/// One cyclic factor of (Z/Q)^x: a generator mod `modulus` with discrete
/// logs tabulated.
#[derive(Clone, Debug)]
pub struct CyclicFactor {
    pub modulus: u64,
    pub generator: u64,
    pub order: u32,
    log: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct CharacterGroup {
    modulus: u64,
    factorization: Factorization,
    factors: Vec<CyclicFactor>,
    exponent: u32,
    order: u64,
    // scaled[i][r]: log_i(r) * (exponent / order_i), NON_UNIT off the units
    scaled: Vec<Vec<u32>>,
    roots: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Character {
    pub index: usize,
    pub exponents: Vec<u32>,
    // root index of chi(r) for r mod Q, NON_UNIT at non-units
    table: Vec<u32>,
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = (r as u128 * b as u128 % m as u128) as u64;
        }
        b = (b as u128 * b as u128 % m as u128) as u64;
        e >>= 1;
    }
    r
}

fn primitive_root_prime_power(p: u64, e: u32) -> u64 {
    let phi_p = p - 1;
    let qs: Vec<u64> = factor(phi_p).primes().collect();
    let mut g = 2;
    while !qs.iter().all(|&q| pow_mod(g, phi_p / q, p) != 1) {
        g += 1;
    }
    if e >= 2 && pow_mod(g, p - 1, p * p) == 1 {
        g += p;
    }
    g
}

fn cyclic(modulus: u64, generator: u64, order: u32, sign_twist: bool) -> CyclicFactor {
    // sign_twist: the 5-power factor of (Z/2^e)^x, logs taken of +-x
    let mut log = vec![NON_UNIT; modulus as usize];
    let mut x = 1u64;
    for j in 0..order {
        log[x as usize] = j;
        if sign_twist {
            log[(modulus - x) as usize] = j;
        }
        x = x * generator % modulus;
    }
    CyclicFactor { modulus, generator, order, log }
}

impl CyclicFactor {
    fn log_of(&self, r: u64) -> u32 {
        self.log[(r % self.modulus) as usize]
    }
}

impl CharacterGroup {
    pub fn new(q: u64) -> Self {
        assert!(q >= 1);
        let factorization = factor(q);
        let mut factors = Vec::new();
        for &(p, e) in &factorization.factors {
            let pe = p.pow(e);
            if p == 2 {
                if e >= 2 {
                    // -1 generates the sign part: log is 0 on 1 mod 4, 1 on 3 mod 4
                    let mut log = vec![NON_UNIT; pe as usize];
                    for x in (1..pe).step_by(2) {
                        log[x as usize] = if x % 4 == 1 { 0 } else { 1 };
                    }
                    factors.push(CyclicFactor { modulus: pe, generator: pe - 1, order: 2, log });
                }
                if e >= 3 {
                    factors.push(cyclic(pe, 5, 1 << (e - 2), true));
                }
            } else {
                let g = primitive_root_prime_power(p, e);
                factors.push(cyclic(pe, g, ((p - 1) * p.pow(e - 1)) as u32, false));
            }
        }
        let exponent = factors.iter().fold(1u32, |l, f| l.lcm(&f.order));
        let order: u64 = factors.iter().map(|f| f.order as u64).product();
        let scaled = factors
            .iter()
            .map(|f| {
                let s = exponent / f.order;
                (0..q)
                    .map(|r| {
                        if gcd(r, q) != 1 {
                            NON_UNIT
                        } else {
                            f.log_of(r) * s
                        }
                    })
                    .collect()
            })
            .collect();
        let roots = (0..exponent)
            .map(|j| {
                // exact values at the quarter points keep orthogonality clean
                let t = 2.0 * PI * j as f64 / exponent as f64;
                match (4 * j as u64).checked_rem(exponent as u64) {
                    Some(0) => {
                        let quarter = 4 * j as u64 / exponent as u64;
                        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)]
                            [quarter as usize % 4]
                    }
                    _ => Complex64::new(t.cos(), t.sin()),
                }
            })
            .collect();
        CharacterGroup { modulus: q, factorization, factors, exponent, order, scaled, roots }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    pub fn factors(&self) -> &[CyclicFactor] {
        &self.factors
    }

    /// phi(Q).
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    fn exponents_of(&self, mut index: usize) -> Vec<u32> {
        let mut ex = vec![0u32; self.factors.len()];
        for i in (0..self.factors.len()).rev() {
            let n = self.factors[i].order as usize;
            ex[i] = (index % n) as u32;
            index /= n;
        }
        ex
    }

    fn index_of(&self, ex: &[u32]) -> usize {
        ex.iter().zip(&self.factors).fold(0usize, |acc, (&a, f)| acc * f.order as usize + a as usize)
    }

    /// Characters in lexicographic exponent order; index 0 is principal.
    pub fn character(&self, index: usize) -> Character {
        assert!((index as u64) < self.order);
        let exponents = self.exponents_of(index);
        let q = self.modulus as usize;
        let l = self.exponent as u64;
        let table = (0..q)
            .map(|r| {
                if self.factors.is_empty() {
                    return if gcd(r as u64, self.modulus) == 1 { 0 } else { NON_UNIT };
                }
                if self.scaled[0][r] == NON_UNIT {
                    return NON_UNIT;
                }
                let s: u64 = exponents
                    .iter()
                    .zip(&self.scaled)
                    .map(|(&a, sc)| a as u64 * sc[r] as u64)
                    .sum();
                (s % l) as u32
            })
            .collect();
        Character { index, exponents, table }
    }

    pub fn characters(&self) -> impl Iterator<Item = Character> + '_ {
        (0..self.order as usize).map(move |i| self.character(i))
    }

    pub fn evaluate(&self, chi: &Character, m: u64) -> Complex64 {
        let j = chi.table[(m % self.modulus) as usize];
        if j == NON_UNIT {
            Complex64::new(0.0, 0.0)
        } else {
            self.roots[j as usize]
        }
    }

    /// Complex value table chi(r), r = 0..Q.
    pub fn values(&self, chi: &Character) -> Vec<Complex64> {
        (0..self.modulus).map(|r| self.evaluate(chi, r)).collect()
    }

    /// Exact root index of chi(m) (None at non-units).
    pub fn root_index(&self, chi: &Character, m: u64) -> Option<u32> {
        let j = chi.table[(m % self.modulus) as usize];
        (j != NON_UNIT).then_some(j)
    }

    pub fn multiply(&self, a: &Character, b: &Character) -> Character {
        let ex: Vec<u32> = a
            .exponents
            .iter()
            .zip(&b.exponents)
            .zip(&self.factors)
            .map(|((&x, &y), f)| (x + y) % f.order)
            .collect();
        self.character(self.index_of(&ex))
    }

    pub fn conjugate(&self, a: &Character) -> Character {
        let ex: Vec<u32> = a.exponents.iter().zip(&self.factors).map(|(&x, f)| (f.order - x) % f.order).collect();
        self.character(self.index_of(&ex))
    }

    /// Smallest d | Q with chi trivial on units congruent to 1 mod d.
    pub fn conductor(&self, chi: &Character) -> u64 {
        let q = self.modulus;
        for d in self.factorization.divisors() {
            let trivial = (0..q / d).map(|t| 1 + t * d).all(|m| {
                let j = chi.table[(m % q) as usize];
                j == NON_UNIT || j == 0
            });
            if trivial {
                return d;
            }
        }
        q
    }
}

/// sum over chi mod Q of chi(m1) conj(chi(m2)), by summation.
pub fn orthogonality_sum(q: u64, m1: u64, m2: u64) -> Complex64 {
    let g = CharacterGroup::new(q);
    let mut acc = crate::numeric::KahanC::new();
    for chi in g.characters() {
        acc.add(g.evaluate(&chi, m1) * g.evaluate(&chi, m2).conj());
    }
    acc.value()
}

pub fn build_group(q: u64) -> CharacterGroup {
    CharacterGroup::new(q)
}
