//! Prime field arithmetic.
//!
//! [`PrimeField`] exposes raw operations on already-reduced `u64` residues,
//! which is what the matrix and coding layers use in their inner loops.
//! [`FieldElement`] carries its modulus and checks it on every binary
//! operation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted modulus (exclusive). Products of two residues fit in u64.
pub const MODULUS_LIMIT: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeField {
    modulus: u64,
}

impl PrimeField {
    pub fn new(modulus: u64) -> Result<Self> {
        if modulus >= MODULUS_LIMIT {
            return Err(Error::ModulusTooLarge(modulus));
        }
        if !is_prime(modulus) {
            return Err(Error::NotPrime(modulus));
        }
        Ok(Self { modulus })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Wraps an arbitrary integer, reducing it.
    pub fn element(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.modulus,
            modulus: self.modulus,
        }
    }

    /// Maps a signed integer to its residue.
    pub fn from_i64(&self, value: i64) -> FieldElement {
        self.element(value.rem_euclid(self.modulus as i64) as u64)
    }

    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    #[inline]
    pub fn reduce(&self, value: u64) -> u64 {
        value % self.modulus
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let c = a + b;
        if c >= self.modulus {
            c - self.modulus
        } else {
            c
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        (a * b) % self.modulus
    }

    /// `acc + a*b`.
    #[inline]
    pub fn mul_add(&self, acc: u64, a: u64, b: u64) -> u64 {
        (acc + a * b) % self.modulus
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.modulus;
        base %= self.modulus;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat's little theorem.
    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = a % self.modulus;
        if a == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(a, self.modulus - 2))
    }
}

impl TryFrom<u64> for PrimeField {
    type Error = Error;

    fn try_from(modulus: u64) -> Result<Self> {
        Self::new(modulus)
    }
}

impl From<PrimeField> for u64 {
    fn from(field: PrimeField) -> u64 {
        field.modulus
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.modulus)
    }
}

/// Deterministic trial division; moduli are below 2^31 so this is cheap.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) || n.is_multiple_of(3) {
        return false;
    }
    let mut d = 5;
    while d * d <= n {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self) -> PrimeField {
        PrimeField {
            modulus: self.modulus,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn check(&self, other: &Self) -> Result<PrimeField> {
        if self.modulus != other.modulus {
            return Err(Error::FieldMismatch {
                left: self.modulus,
                right: other.modulus,
            });
        }
        Ok(self.field())
    }

    fn with(&self, value: u64) -> Self {
        Self {
            value,
            modulus: self.modulus,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let f = self.check(other)?;
        Ok(self.with(f.add(self.value, other.value)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let f = self.check(other)?;
        Ok(self.with(f.sub(self.value, other.value)))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let f = self.check(other)?;
        Ok(self.with(f.mul(self.value, other.value)))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        let f = self.check(other)?;
        Ok(self.with(f.mul(self.value, f.inv(other.value)?)))
    }

    pub fn neg(&self) -> Self {
        self.with(self.field().neg(self.value))
    }

    pub fn inv(&self) -> Result<Self> {
        Ok(self.with(self.field().inv(self.value)?))
    }

    pub fn pow(&self, exp: u64) -> Self {
        self.with(self.field().pow(self.value, exp))
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}
