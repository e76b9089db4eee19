//! Elements `Σ_k e^{-2kB s^α} Q_k(s)` of the exponential-polynomial ring.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::poly::RatPoly;
use crate::real::Real;

/// The ring parameters: the exponential step is `e^{-2B s^α}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpRing {
    #[serde(with = "rational_string")]
    pub b: BigRational,
    pub alpha: u32,
}

impl ExpRing {
    /// Rate of slot `k`: `2kB`.
    pub fn rate(&self, k: u32) -> BigRational {
        &self.b * BigInt::from(2 * k as i64)
    }

    /// `d/ds e^{-c s^α} = -cα s^{α-1} e^{-c s^α}`; returns `cα s^{α-1}`.
    pub fn exponent_derivative(&self, c: &BigRational) -> RatPoly {
        RatPoly::monomial(c * BigInt::from(self.alpha), self.alpha as i64 - 1)
    }

    /// `e^{-c s^α}` at `s`.
    pub fn exp_factor(&self, c: &BigRational, s: &Real) -> Real {
        let bits = s.precision();
        if c.is_zero() {
            return Real::one(bits);
        }
        (-(Real::from_rational(c, bits) * s.powi(self.alpha as u64))).exp()
    }
}

/// Map from slot `k` to `Q_k`; absent slots are zero.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpPolyElem {
    slots: BTreeMap<u32, RatPoly>,
}

impl ExpPolyElem {
    pub fn zero() -> Self {
        ExpPolyElem::default()
    }

    pub fn from_poly(p: RatPoly) -> Self {
        ExpPolyElem::from_slot(0, p)
    }

    pub fn from_slot(k: u32, p: RatPoly) -> Self {
        let mut e = ExpPolyElem::zero();
        e.add_slot(k, &p);
        e
    }

    pub fn add_slot(&mut self, k: u32, p: &RatPoly) {
        if p.is_zero() {
            return;
        }
        let slot = self.slots.entry(k).or_default();
        *slot = slot.add(p);
        if slot.is_zero() {
            self.slots.remove(&k);
        }
    }

    pub fn part(&self, k: u32) -> RatPoly {
        self.slots.get(&k).cloned().unwrap_or_default()
    }

    pub fn slots(&self) -> impl Iterator<Item = (u32, &RatPoly)> {
        self.slots.iter().map(|(k, p)| (*k, p))
    }

    pub fn max_slot(&self) -> Option<u32> {
        self.slots.keys().next_back().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn add(&self, other: &ExpPolyElem) -> ExpPolyElem {
        let mut out = self.clone();
        for (k, p) in other.slots() {
            out.add_slot(k, p);
        }
        out
    }

    pub fn mul(&self, other: &ExpPolyElem) -> ExpPolyElem {
        let mut out = ExpPolyElem::zero();
        for (k1, p1) in self.slots() {
            for (k2, p2) in other.slots() {
                out.add_slot(k1 + k2, &p1.mul(p2));
            }
        }
        out
    }

    pub fn mul_poly(&self, p: &RatPoly) -> ExpPolyElem {
        let mut out = ExpPolyElem::zero();
        for (k, q) in self.slots() {
            out.add_slot(k, &q.mul(p));
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> ExpPolyElem {
        self.mul_poly(&RatPoly::constant(c.clone()))
    }

    /// Slot `k` maps to `Q_k' - 2kBα s^{α-1} Q_k`.
    pub fn derivative(&self, ring: &ExpRing) -> ExpPolyElem {
        let mut out = ExpPolyElem::zero();
        for (k, q) in self.slots() {
            let mut d = q.derivative();
            if k > 0 {
                d = d.sub(&q.mul(&ring.exponent_derivative(&ring.rate(k))));
            }
            out.add_slot(k, &d);
        }
        out
    }

    pub fn eval_real(&self, ring: &ExpRing, s: &Real) -> Real {
        let mut acc = Real::zero(s.precision());
        for (k, q) in self.slots() {
            acc += ring.exp_factor(&ring.rate(k), s) * q.eval_real(s);
        }
        acc
    }

    pub fn one() -> Self {
        ExpPolyElem::from_poly(RatPoly::constant(BigRational::one()))
    }
}

impl fmt::Display for ExpPolyElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, q) in self.slots() {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({q})")?,
                1 => write!(f, "E·({q})")?,
                _ => write!(f, "E^{k}·({q})")?,
            }
        }
        Ok(())
    }
}

pub(crate) mod rational_string {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Frac {
        num: String,
        den: String,
    }

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        Frac { num: q.numer().to_string(), den: q.denom().to_string() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let f = Frac::deserialize(d)?;
        let num: BigInt = f.num.parse().map_err(serde::de::Error::custom)?;
        let den: BigInt = f.den.parse().map_err(serde::de::Error::custom)?;
        if den == BigInt::from(0) {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(BigRational::new(num, den))
    }
}
