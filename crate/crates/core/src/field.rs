//! Prime-field arithmetic with explicit operation counting.
//!
//! Elements are plain canonical residues ([`Fe`]); every arithmetic call goes
//! through a [`PrimeField`], which knows the modulus. Counted operations take
//! an [`OpCounter`] so that encoders and decoders can report exactly how many
//! multiplications, additions and inversions they performed.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// 2^61 - 1, the default modulus.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("field of order {modulus} has too few elements for {requested} distinct points")]
    FieldTooSmall { modulus: u64, requested: usize },
}

/// A field element, always the canonical representative in `[0, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Fe(pub(crate) u64);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Multiplication / addition / inversion tallies for one logical task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub mul_count: u64,
    pub add_count: u64,
    pub inv_count: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn absorb(&mut self, other: &OpCounter) {
        self.mul_count += other.mul_count;
        self.add_count += other.add_count;
        self.inv_count += other.inv_count;
    }

    pub(crate) fn muls(&mut self, k: u64) {
        self.mul_count += k;
    }

    pub(crate) fn adds(&mut self, k: u64) {
        self.add_count += k;
    }

    pub(crate) fn invs(&mut self, k: u64) {
        self.inv_count += k;
    }
}

/// GF(p) for a prime `p < 2^64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    modulus: u64,
    /// How many unreduced products fit in a u128 accumulator.
    lazy_limit: u32,
}

impl Default for PrimeField {
    fn default() -> Self {
        Self::new(MERSENNE_61).expect("2^61-1 is prime")
    }
}

impl PrimeField {
    pub fn new(modulus: u64) -> Result<Self, FieldError> {
        if !is_prime_u64(modulus) {
            return Err(FieldError::NotPrime(modulus));
        }
        let sq = (modulus as u128 - 1) * (modulus as u128 - 1);
        let lazy_limit = if sq == 0 {
            u32::MAX
        } else {
            ((u128::MAX - modulus as u128) / sq).clamp(1, u32::MAX as u128) as u32
        };
        Ok(Self {
            modulus,
            lazy_limit,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Reduces an arbitrary integer into the field.
    pub fn elem(&self, v: u64) -> Fe {
        Fe(v % self.modulus)
    }

    /// Wraps a value already known to be canonical, or `None` if it is not.
    pub fn try_elem(&self, v: u64) -> Option<Fe> {
        (v < self.modulus).then_some(Fe(v))
    }

    #[inline]
    pub(crate) fn reduce_wide(&self, x: u128) -> u64 {
        if self.modulus == MERSENNE_61 {
            let m = MERSENNE_61 as u128;
            let x = (x & m) + (x >> 61);
            let x = ((x & m) + (x >> 61)) as u64;
            if x >= MERSENNE_61 {
                x - MERSENNE_61
            } else {
                x
            }
        } else {
            (x % self.modulus as u128) as u64
        }
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        let (s, overflow) = a.0.overflowing_add(b.0);
        if overflow || s >= self.modulus {
            Fe(s.wrapping_sub(self.modulus))
        } else {
            Fe(s)
        }
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        if a.0 >= b.0 {
            Fe(a.0 - b.0)
        } else {
            Fe(self.modulus - (b.0 - a.0))
        }
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        if a.0 == 0 {
            a
        } else {
            Fe(self.modulus - a.0)
        }
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        Fe(self.reduce_wide(a.0 as u128 * b.0 as u128))
    }

    /// `x^e` by left-to-right square-and-multiply. Performs
    /// `floor(log2 e) + popcount(e) - 1` multiplications for `e >= 1`, none
    /// for `e = 0`, and records them in `ops`.
    pub fn pow(&self, x: Fe, e: u64, ops: &mut OpCounter) -> Fe {
        if e == 0 {
            return Fe::ONE;
        }
        let top = 63 - e.leading_zeros();
        let mut acc = x;
        for bit in (0..top).rev() {
            acc = self.mul(acc, acc);
            ops.muls(1);
            if (e >> bit) & 1 == 1 {
                acc = self.mul(acc, x);
                ops.muls(1);
            }
        }
        acc
    }

    /// Multiplicative inverse; counts one inversion.
    pub fn inv(&self, a: Fe, ops: &mut OpCounter) -> Result<Fe, FieldError> {
        if a.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        ops.invs(1);
        let mut scratch = OpCounter::new();
        Ok(self.pow(a, self.modulus - 2, &mut scratch))
    }

    /// Inverts every element with a single inversion and `3(len - 1)`
    /// multiplications (prefix products, then unwinding).
    pub fn batch_inv(&self, xs: &[Fe], ops: &mut OpCounter) -> Result<Vec<Fe>, FieldError> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let mut prefix = Vec::with_capacity(xs.len());
        let mut acc = Fe::ONE;
        for (i, &x) in xs.iter().enumerate() {
            acc = if i == 0 { x } else { self.mul(acc, x) };
            prefix.push(acc);
        }
        let mut inv = self.inv(acc, ops)?;
        let mut out = vec![Fe::ZERO; xs.len()];
        for i in (1..xs.len()).rev() {
            out[i] = self.mul(inv, prefix[i - 1]);
            inv = self.mul(inv, xs[i]);
        }
        out[0] = inv;
        ops.muls(3 * (xs.len() as u64 - 1));
        Ok(out)
    }

    /// Inner product of two equal-length slices using lazy u128 reduction.
    /// Counts `len` multiplications and `len - 1` additions.
    pub fn dot(&self, a: &[Fe], b: &[Fe], ops: &mut OpCounter) -> Fe {
        debug_assert_eq!(a.len(), b.len());
        let len = a.len() as u64;
        ops.muls(len);
        ops.adds(len.saturating_sub(1));
        self.dot_uncounted(a.iter().copied().zip(b.iter().copied()))
    }

    pub(crate) fn dot_uncounted(&self, pairs: impl Iterator<Item = (Fe, Fe)>) -> Fe {
        let mut acc: u128 = 0;
        let mut pending = 0u32;
        for (x, y) in pairs {
            acc += x.0 as u128 * y.0 as u128;
            pending += 1;
            if pending == self.lazy_limit {
                acc = self.reduce_wide(acc) as u128;
                pending = 0;
            }
        }
        Fe(self.reduce_wide(acc))
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the first twelve prime bases are exact for
/// every 64-bit input.
pub fn is_prime_u64(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
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
