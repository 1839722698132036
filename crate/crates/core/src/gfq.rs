//! Arithmetic in the prime field `Z_q`.
//!
//! Elements carry their modulus so that mixing fields is caught at runtime.
//! Products go through `u128`, which keeps every modulus that fits in a
//! machine word exact.

use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u64, right: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("invalid modulus search parameters: n = {n}, m = {m} (need n >= 1, m >= 1)")]
    InvalidSearch { n: u64, m: u64 },
}

/// The field `Z_q` for a prime `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u64", into = "u64"))]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self, FieldError> {
        if is_prime(q) {
            Ok(Self { q })
        } else {
            Err(FieldError::NotPrime(q))
        }
    }

    #[inline]
    pub fn modulus(self) -> u64 {
        self.q
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn element(self, value: u64) -> FieldElement {
        FieldElement { value: value % self.q, q: self.q }
    }

    #[inline]
    pub fn zero(self) -> FieldElement {
        self.element(0)
    }

    #[inline]
    pub fn one(self) -> FieldElement {
        self.element(1)
    }

    /// All elements `0, 1, ..., q-1` in order.
    pub fn elements(self) -> impl Iterator<Item = FieldElement> {
        let q = self.q;
        (0..q).map(move |value| FieldElement { value, q })
    }

    // Raw-digit helpers used by the state engine, which stores bare digits.

    #[inline]
    pub(crate) fn add_raw(self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.q as u128) as u64
    }

    #[inline]
    pub(crate) fn mul_raw(self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    #[inline]
    pub(crate) fn sub_raw(self, a: u64, b: u64) -> u64 {
        self.add_raw(a, self.q - b % self.q)
    }
}

impl TryFrom<u64> for PrimeField {
    type Error = FieldError;
    fn try_from(q: u64) -> Result<Self, FieldError> {
        Self::new(q)
    }
}

impl From<PrimeField> for u64 {
    fn from(f: PrimeField) -> u64 {
        f.q
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)
    }
}

/// An element of `Z_q`, `0 <= value < q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u64,
    q: u64,
}

impl FieldElement {
    #[inline]
    pub fn value(self) -> u64 {
        self.value
    }

    #[inline]
    pub fn field(self) -> PrimeField {
        PrimeField { q: self.q }
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn check(self, rhs: Self) -> Result<(), FieldError> {
        if self.q == rhs.q {
            Ok(())
        } else {
            Err(FieldError::ModulusMismatch { left: self.q, right: rhs.q })
        }
    }

    pub fn try_add(self, rhs: Self) -> Result<Self, FieldError> {
        self.check(rhs)?;
        Ok(Self { value: self.field().add_raw(self.value, rhs.value), q: self.q })
    }

    pub fn try_sub(self, rhs: Self) -> Result<Self, FieldError> {
        self.check(rhs)?;
        Ok(Self { value: self.field().sub_raw(self.value, rhs.value), q: self.q })
    }

    pub fn try_mul(self, rhs: Self) -> Result<Self, FieldError> {
        self.check(rhs)?;
        Ok(Self { value: self.field().mul_raw(self.value, rhs.value), q: self.q })
    }

    /// `self^exp`, with `0^0 = 1`.
    pub fn pow(self, mut exp: u64) -> Self {
        let field = self.field();
        let mut base = self.value;
        let mut acc = 1 % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = field.mul_raw(acc, base);
            }
            base = field.mul_raw(base, base);
            exp >>= 1;
        }
        Self { value: acc, q: self.q }
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self) -> Result<Self, FieldError> {
        if self.value == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(self.q - 2))
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

// Operator forms panic on mismatched moduli; use the `try_*` methods when the
// operands come from untrusted input.

impl Add for FieldElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.try_add(rhs).expect("field elements from different fields")
    }
}

impl Sub for FieldElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.try_sub(rhs).expect("field elements from different fields")
    }
}

impl Mul for FieldElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.try_mul(rhs).expect("field elements from different fields")
    }
}

impl Neg for FieldElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self { value: self.field().sub_raw(0, self.value), q: self.q }
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the witness set below is exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for p in WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for a in WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `q` with `max(n, m) <= q <= 2 max(n, m)`.
///
/// Bertrand's postulate guarantees the scan terminates inside the interval.
pub fn find_modulus(n: u64, m: u64) -> Result<PrimeField, FieldError> {
    if n < 1 || m < 1 {
        return Err(FieldError::InvalidSearch { n, m });
    }
    let lo = n.max(m);
    let q = (lo..=lo.saturating_mul(2))
        .find(|&c| is_prime(c))
        .expect("Bertrand's postulate");
    Ok(PrimeField { q })
}
