//! Sparse Laurent polynomials in `s` with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::real::Real;

/// `Σ c_d s^d` over integer `d` (negative degrees allowed). Zero
/// coefficients are never stored, so the empty map is the zero polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RatPoly {
    coeffs: BTreeMap<i64, BigRational>,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl RatPoly {
    pub fn zero() -> Self {
        RatPoly::default()
    }

    pub fn constant(c: BigRational) -> Self {
        RatPoly::monomial(c, 0)
    }

    pub fn one() -> Self {
        RatPoly::constant(BigRational::one())
    }

    pub fn monomial(c: BigRational, degree: i64) -> Self {
        let mut p = RatPoly::zero();
        p.add_term(degree, c);
        p
    }

    /// From `(degree, coefficient)` pairs; repeated degrees are summed.
    pub fn from_terms<I: IntoIterator<Item = (i64, BigRational)>>(terms: I) -> Self {
        let mut p = RatPoly::zero();
        for (d, c) in terms {
            p.add_term(d, c);
        }
        p
    }

    pub fn add_term(&mut self, degree: i64, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(degree).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&degree);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, degree: i64) -> BigRational {
        self.coeffs.get(&degree).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigRational)> {
        self.coeffs.iter().map(|(d, c)| (*d, c))
    }

    pub fn degree(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn min_degree(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn leading(&self) -> Option<&BigRational> {
        self.coeffs.values().next_back()
    }

    /// `Some(c)` if the polynomial is the constant `c` (including zero).
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.coeffs.len() {
            0 => Some(BigRational::zero()),
            1 => self.coeffs.get(&0).cloned(),
            _ => None,
        }
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        let mut out = self.clone();
        for (d, c) in other.terms() {
            out.add_term(d, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &RatPoly) -> RatPoly {
        let mut out = self.clone();
        for (d, c) in other.terms() {
            out.add_term(d, -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        let mut out = RatPoly::zero();
        for (d1, c1) in self.terms() {
            for (d2, c2) in other.terms() {
                out.add_term(d1 + d2, c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, k: &BigRational) -> RatPoly {
        RatPoly::from_terms(self.terms().map(|(d, c)| (d, c * k)))
    }

    /// Multiplies by `s^shift`.
    pub fn shift_degrees(&self, shift: i64) -> RatPoly {
        RatPoly { coeffs: self.coeffs.iter().map(|(d, c)| (d + shift, c.clone())).collect() }
    }

    pub fn derivative(&self) -> RatPoly {
        RatPoly::from_terms(self.terms().filter(|(d, _)| *d != 0).map(|(d, c)| (d - 1, c * BigInt::from(d))))
    }

    pub fn eval_rational(&self, s: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for (d, c) in self.terms() {
            acc += c * pow_rat(s, d);
        }
        acc
    }

    pub fn eval_real(&self, s: &Real) -> Real {
        let bits = s.precision();
        let mut acc = Real::zero(bits);
        for (d, c) in self.terms() {
            acc += Real::from_rational(c, bits) * s.powi_signed(d);
        }
        acc
    }

    /// Coefficients of `p(m + t)` as a polynomial in `t`. Requires `min_degree >= 0`.
    pub fn taylor_shift(&self, m: &BigRational) -> RatPoly {
        assert!(self.min_degree().is_none_or(|d| d >= 0), "taylor_shift needs an ordinary polynomial");
        let deg = self.degree().unwrap_or(0).max(0) as usize;
        let mut c: Vec<BigRational> = (0..=deg).map(|d| self.coeff(d as i64)).collect();
        // repeated synthetic division by (x - m)
        for i in 0..deg {
            for j in (i..deg).rev() {
                let add = &c[j + 1] * m;
                c[j] += add;
            }
        }
        RatPoly::from_terms(c.into_iter().enumerate().map(|(d, v)| (d as i64, v)))
    }

    /// True if every coefficient of `s^M p(1 + u)` is nonnegative, which
    /// proves `p(s) >= 0` on `s >= 1`.
    pub fn nonnegative_beyond_one(&self) -> bool {
        let shift = -self.min_degree().unwrap_or(0).min(0);
        self.shift_degrees(shift).taylor_shift(&BigRational::one()).terms().all(|(_, c)| !c.is_negative())
    }

    /// Sum of `|c_d|`.
    pub fn abs_coeff_sum(&self) -> BigRational {
        self.coeffs.values().map(|c| c.abs()).fold(BigRational::zero(), |a, b| a + b)
    }
}

pub fn pow_rat(x: &BigRational, e: i64) -> BigRational {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), e.unsigned_abs() as usize)
    }
}

impl fmt::Display for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (d, c) in self.coeffs.iter().rev() {
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            match *d {
                0 => write!(f, "{a}")?,
                1 if a.is_one() => f.write_str("s")?,
                1 => write!(f, "{a}·s")?,
                _ if a.is_one() => write!(f, "s^{d}")?,
                _ => write!(f, "{a}·s^{d}")?,
            }
        }
        Ok(())
    }
}

/// A coefficient serialised as decimal numerator and denominator strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatTerm {
    pub degree: i64,
    pub num: String,
    pub den: String,
}

impl Serialize for RatPoly {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let terms: Vec<RatTerm> = self.terms().map(|(d, c)| RatTerm { degree: d, num: c.numer().to_string(), den: c.denom().to_string() }).collect();
        terms.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RatPoly {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let terms = Vec::<RatTerm>::deserialize(deserializer)?;
        let mut p = RatPoly::zero();
        for t in terms {
            let num: BigInt = t.num.parse().map_err(serde::de::Error::custom)?;
            let den: BigInt = t.den.parse().map_err(serde::de::Error::custom)?;
            if den.is_zero() {
                return Err(serde::de::Error::custom("zero denominator"));
            }
            p.add_term(t.degree, BigRational::new(num, den));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(terms: &[(i64, i64)]) -> RatPoly {
        RatPoly::from_terms(terms.iter().map(|&(d, c)| (d, rat(c, 1))))
    }

    #[test]
    fn derivative_of_laurent() {
        let p = poly(&[(-2, 3), (0, 5), (3, 2)]);
        assert_eq!(p.derivative(), poly(&[(-3, -6), (2, 6)]));
    }

    #[test]
    fn shift_and_nonnegativity() {
        // 2s⁴ - 2s³ = 2s³(s - 1)
        let p = poly(&[(4, 2), (3, -2)]);
        assert!(p.nonnegative_beyond_one());
        let q = poly(&[(2, 1), (0, -2)]);
        assert!(!q.nonnegative_beyond_one());
        assert!(poly(&[(-1, 1), (0, -1), (1, 1)]).nonnegative_beyond_one());
    }

    #[test]
    fn taylor_shift_known() {
        // (m + t)² with m = 3 → 9 + 6t + t²
        let p = poly(&[(2, 1)]);
        assert_eq!(p.taylor_shift(&rat(3, 1)), poly(&[(0, 9), (1, 6), (2, 1)]));
    }

    #[test]
    fn display() {
        assert_eq!(poly(&[(4, -4), (3, 8), (2, -3)]).to_string(), "-4·s^4 + 8·s^3 - 3·s^2");
        assert_eq!(RatPoly::zero().to_string(), "0");
    }

    proptest! {
        #[test]
        fn taylor_shift_preserves_values(cs in proptest::collection::vec(-20i64..20, 1..7), m in -5i64..5, t in -5i64..5) {
            let p = RatPoly::from_terms(cs.iter().enumerate().map(|(d, &c)| (d as i64, rat(c, 1))));
            let shifted = p.taylor_shift(&rat(m, 1));
            prop_assert_eq!(shifted.eval_rational(&rat(t, 1)), p.eval_rational(&rat(m + t, 1)));
        }

        #[test]
        fn product_rule(a in proptest::collection::vec(-9i64..9, 1..5), b in proptest::collection::vec(-9i64..9, 1..5)) {
            let p = RatPoly::from_terms(a.iter().enumerate().map(|(d, &c)| (d as i64 - 2, rat(c, 1))));
            let q = RatPoly::from_terms(b.iter().enumerate().map(|(d, &c)| (d as i64, rat(c, 3))));
            let lhs = p.mul(&q).derivative();
            let rhs = p.derivative().mul(&q).add(&p.mul(&q.derivative()));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn json_round_trip(a in proptest::collection::vec((-6i64..6, -50i64..50, 1i64..9), 0..6)) {
            let p = RatPoly::from_terms(a.iter().map(|&(d, n, den)| (d, rat(n, den))));
            let s = serde_json::to_string(&p).unwrap();
            let back: RatPoly = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
