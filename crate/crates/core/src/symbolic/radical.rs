//! Expressions `e^{-c s^α} · N · R^{1/2 - n}` closed under `d/ds`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::exppoly::{rational_string, ExpPolyElem, ExpRing};
use super::poly::{rat, RatPoly};
use super::SymbolicError;
use crate::real::Real;
use crate::weight::WeightParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadicalExpr {
    pub ring: ExpRing,
    /// `c` in the prefactor `e^{-c s^α}`.
    #[serde(with = "rational_string")]
    pub prefactor_rate: BigRational,
    pub numerator: ExpPolyElem,
    pub radicand: ExpPolyElem,
    /// `n` in the exponent `1/2 - n` of the radicand.
    pub half_power_shift: u32,
}

/// Exact rational from an `f64` that must be an integer.
fn integral(x: f64) -> Option<u32> {
    (x.fract() == 0.0 && (0.0..=1e6).contains(&x)).then_some(x as u32)
}

/// The ring exists for integer `A >= 0`, rational `B > 0` and integer `α >= 1`.
pub fn ring_for(params: &WeightParams) -> Result<(u32, ExpRing), SymbolicError> {
    let unsupported = || SymbolicError::UnsupportedParams { a: params.a, b: params.b, alpha: params.alpha };
    let a = integral(params.a).ok_or_else(unsupported)?;
    let alpha = integral(params.alpha).filter(|&x| x >= 1).ok_or_else(unsupported)?;
    let b = BigRational::from_float(params.b).filter(|b| b > &BigRational::zero()).ok_or_else(unsupported)?;
    Ok((a, ExpRing { b, alpha }))
}

impl RadicalExpr {
    /// `ν(s) = s^{-A} e^{-B s^α} √(1 + e^{-2B s^α} · 2(1 - 1/s) s^{-2A} (A s + αB s^{α+1})²)`,
    /// the weight of the zeroth inflated space in the `s` coordinate.
    pub fn base_weight(params: &WeightParams) -> Result<RadicalExpr, SymbolicError> {
        let (a, ring) = ring_for(params)?;
        let a = a as i64;
        let alpha = ring.alpha as i64;
        let log_deriv = RatPoly::from_terms([(1, BigRational::from_integer(BigInt::from(a))), (alpha + 1, &ring.b * BigInt::from(alpha))]);
        let l = RatPoly::from_terms([(0, rat(2, 1)), (-1, rat(-2, 1))]).mul(&log_deriv).mul(&log_deriv).shift_degrees(-2 * a);
        let radicand = ExpPolyElem::one().add(&ExpPolyElem::from_slot(1, l));
        Ok(RadicalExpr {
            prefactor_rate: ring.b.clone(),
            ring,
            numerator: ExpPolyElem::from_poly(RatPoly::monomial(rat(1, 1), -a)),
            radicand,
            half_power_shift: 0,
        })
    }

    /// `N_{n+1} = N' R + (1/2 - n) N R' - cα s^{α-1} N R`, `n → n + 1`.
    pub fn derivative(&self) -> RadicalExpr {
        let n = self.half_power_shift as i64;
        let r = &self.radicand;
        let dn = self.numerator.derivative(&self.ring);
        let dr = r.derivative(&self.ring);
        let half_minus_n = rat(1 - 2 * n, 2);
        let mut next = dn.mul(r).add(&self.numerator.mul(&dr).scale(&half_minus_n));
        if !self.prefactor_rate.is_zero() {
            let g = self.ring.exponent_derivative(&self.prefactor_rate);
            next = next.add(&self.numerator.mul(r).mul_poly(&g).scale(&rat(-1, 1)));
        }
        RadicalExpr {
            ring: self.ring.clone(),
            prefactor_rate: self.prefactor_rate.clone(),
            numerator: next,
            radicand: self.radicand.clone(),
            half_power_shift: self.half_power_shift + 1,
        }
    }

    pub fn eval_real(&self, s: &Real) -> Real {
        let e = self.ring.exp_factor(&self.prefactor_rate, s);
        let n = self.numerator.eval_real(&self.ring, s);
        let r = self.radicand.eval_real(&self.ring, s);
        let root = r.sqrt();
        let denom = r.powi(self.half_power_shift as u64);
        e * n * root / denom
    }
}

/// `d^n ν / ds^n` for the base weight of `params`.
pub fn nth_derivative(params: &WeightParams, n: u32) -> Result<RadicalExpr, SymbolicError> {
    let mut e = RadicalExpr::base_weight(params)?;
    for _ in 0..n {
        e = e.derivative();
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_weight_matches_numeric_weight() {
        use crate::weight::{weight, RadialWeight};
        for p in [(0.0, 1.0, 1.0), (1.0, 2.0, 1.0), (2.0, 0.5, 2.0)] {
            let params = WeightParams::new(p.0, p.1, p.2).unwrap();
            let e = RadicalExpr::base_weight(&params).unwrap();
            let w = weight(&params, 0);
            for x in [1.0, 1.5, 3.0, 7.25] {
                let s = Real::from_f64(x, 256);
                assert!(Real::rel_diff(&e.eval_real(&s), &w.eval_s(&s)).to_f64() < 1e-60, "{p:?} s={x}");
            }
        }
    }

    #[test]
    fn unsupported_parameters() {
        let p = WeightParams::new(0.5, 1.0, 1.5).unwrap();
        assert!(matches!(nth_derivative(&p, 2), Err(SymbolicError::UnsupportedParams { .. })));
        let q = WeightParams::new(0.0, 1.0, 1.5).unwrap();
        assert!(nth_derivative(&q, 1).is_err());
    }
}
