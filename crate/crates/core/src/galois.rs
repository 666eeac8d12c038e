//! Arithmetic in GF(2^n), 2 <= n <= 10.
//!
//! An element is stored as the integer whose bit `j` is the coefficient of
//! `alpha^j` in its polynomial-basis expansion, so the binary composition of
//! a symbol is read straight off its bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest supported field order exponent.
pub const MIN_ORDER: u32 = 2;
/// Largest supported field order exponent.
pub const MAX_ORDER: u32 = 10;

/// Default primitive polynomial for each `n`, `x^n` term included.
pub fn default_primitive_poly(n: u32) -> Option<u32> {
    Some(match n {
        2 => 0b111,
        3 => 0b1011,
        4 => 0b1_0011,
        5 => 0b10_0101,
        6 => 0b100_0011,
        7 => 0b1000_1001,
        8 => 0b1_0001_1101,
        9 => 0b10_0001_0001,
        10 => 0b100_0000_1001,
        _ => return None,
    })
}

/// A symbol of GF(2^n).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement(pub u16);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    #[inline]
    pub fn value(self) -> u16 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Coefficient of `alpha^j`.
    #[inline]
    pub fn bit(self, j: usize) -> u8 {
        ((self.0 >> j) & 1) as u8
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A GF(2^n) context: primitive polynomial plus log/antilog tables.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldSpec {
    n: u32,
    prim_poly: u32,
    /// `exp[k] = alpha^k`, doubled in length so sums of two logs index directly.
    exp: Vec<u16>,
    /// `log[x]` for nonzero `x`; entry 0 is unused.
    log: Vec<u16>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("n", &self.n)
            .field("prim_poly", &format_args!("{:#b}", self.prim_poly))
            .finish()
    }
}

impl FieldSpec {
    /// Builds GF(2^n). Without `prim_poly` the default for `n` is used.
    pub fn new(n: u32, prim_poly: Option<u32>) -> Result<Self> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&n) {
            return Err(Error::FieldOrder(n));
        }
        let poly = match prim_poly {
            Some(p) => p,
            None => default_primitive_poly(n).expect("default exists for supported n"),
        };
        if poly >> n != 1 {
            return Err(Error::PolynomialDegree { poly, n });
        }

        let size = 1usize << n;
        let order = size - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; size];
        // seen[x] holds 1 + the first power at which x appeared.
        let mut seen = vec![0u32; size];
        let mut x: u32 = 1;
        for k in 0..order {
            if x == 0 {
                return Err(Error::NotPrimitiveZero {
                    poly,
                    power: k as u32,
                });
            }
            if seen[x as usize] != 0 {
                return Err(Error::NotPrimitive {
                    poly,
                    power: k as u32,
                    earlier: seen[x as usize] - 1,
                });
            }
            seen[x as usize] = k as u32 + 1;
            exp[k] = x as u16;
            log[x as usize] = k as u16;
            x <<= 1;
            if x & (1 << n) != 0 {
                x ^= poly;
            }
        }
        // After 2^n - 1 steps alpha must be back at 1.
        if x != 1 {
            let earlier = if x == 0 { None } else { Some(seen[x as usize]) };
            return match earlier {
                None => Err(Error::NotPrimitiveZero {
                    poly,
                    power: order as u32,
                }),
                Some(e) => Err(Error::NotPrimitive {
                    poly,
                    power: order as u32,
                    earlier: e.saturating_sub(1),
                }),
            };
        }
        for k in order..2 * order {
            exp[k] = exp[k - order];
        }
        Ok(FieldSpec {
            n,
            prim_poly: poly,
            exp,
            log,
        })
    }

    /// Field order exponent `n`.
    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of bits per symbol, as a `usize`.
    #[inline]
    pub fn bits(&self) -> usize {
        self.n as usize
    }

    /// Number of field elements, `2^n`.
    #[inline]
    pub fn size(&self) -> usize {
        1 << self.n
    }

    /// Order of the multiplicative group, `2^n - 1`.
    #[inline]
    pub fn order(&self) -> usize {
        self.size() - 1
    }

    #[inline]
    pub fn prim_poly(&self) -> u32 {
        self.prim_poly
    }

    #[inline]
    pub fn alpha(&self) -> FieldElement {
        FieldElement(self.exp[1 % self.order()])
    }

    /// Wraps a raw value, checking it lies in the field.
    pub fn element(&self, value: u32) -> Result<FieldElement> {
        if (value as usize) < self.size() {
            Ok(FieldElement(value as u16))
        } else {
            Err(Error::NotAnElement { value, n: self.n })
        }
    }

    /// All elements in increasing integer order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.size() as u16).map(FieldElement)
    }

    /// `alpha^k` for any integer `k`.
    #[inline]
    pub fn exp(&self, k: i64) -> FieldElement {
        let idx = k.rem_euclid(self.order() as i64) as usize;
        FieldElement(self.exp[idx])
    }

    /// Discrete log base alpha; `None` for zero.
    #[inline]
    pub fn log(&self, a: FieldElement) -> Option<u32> {
        if a.is_zero() {
            None
        } else {
            Some(self.log[a.0 as usize] as u32)
        }
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        let s = self.log[a.0 as usize] as usize + self.log[b.0 as usize] as usize;
        FieldElement(self.exp[s])
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        match self.log(a) {
            None => Err(Error::InverseOfZero),
            Some(0) => Ok(FieldElement::ONE),
            Some(l) => Ok(FieldElement(self.exp[self.order() - l as usize])),
        }
    }

    /// `a / b`.
    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `a^e`, with `0^0 = 1`. Negative exponents of zero are an error.
    pub fn pow(&self, a: FieldElement, e: i64) -> Result<FieldElement> {
        match self.log(a) {
            None if e == 0 => Ok(FieldElement::ONE),
            None if e > 0 => Ok(FieldElement::ZERO),
            None => Err(Error::InverseOfZero),
            Some(l) => Ok(self.exp(l as i64 * e)),
        }
    }

    /// Binary composition `(u_0, ..., u_{n-1})`, `u_j` the coefficient of `alpha^j`.
    pub fn bits_of(&self, a: FieldElement) -> Vec<u8> {
        (0..self.bits()).map(|j| a.bit(j)).collect()
    }

    pub fn from_bits(&self, bits: &[u8]) -> Result<FieldElement> {
        if bits.len() != self.bits() {
            return Err(Error::BitLength {
                expected: self.bits(),
                got: bits.len(),
            });
        }
        let mut v = 0u16;
        for (j, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(Error::NotABit(b));
            }
            v |= (b as u16) << j;
        }
        Ok(FieldElement(v))
    }

    /// Dot product of two equal-length slices.
    pub fn dot(&self, a: &[FieldElement], b: &[FieldElement]) -> FieldElement {
        a.iter().zip(b).fold(FieldElement::ZERO, |acc, (&x, &y)| {
            self.add(acc, self.mul(x, y))
        })
    }
}
