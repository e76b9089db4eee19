//! Exact derivatives of the base weight in the `s` coordinate.
//!
//! For integer `A`, rational `B` and integer `α` every derivative of
//! `ν(s) = s^{-A} e^{-B s^α} √R` has the closed form `e^{-B s^α} N_n R^{1/2-n}`
//! with `N_n` and `R` in the ring of finite sums `Σ_k e^{-2kB s^α} Q_k(s)`,
//! `Q_k` Laurent polynomials with rational coefficients.

pub mod certificate;
pub mod exppoly;
pub mod poly;
pub mod radical;

use thiserror::Error;

pub use certificate::{
    certify_order, dz_certify, limit_check, radicand_nonnegative, tail_sign_threshold, verify_structure, DzCertificate, LimitCheck, OrderCertificate,
    StructureReport, TailCertificate,
};
pub use exppoly::{ExpPolyElem, ExpRing};
pub use poly::RatPoly;
pub use radical::{nth_derivative, ring_for, RadicalExpr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("parameters A={a}, B={b}, alpha={alpha} are outside the exact ring (need integer A >= 0, integer alpha >= 1)")]
    UnsupportedParams { a: f64, b: f64, alpha: f64 },
    #[error("order {order}: structure violation: {detail}")]
    StructureViolation { order: u32, detail: String },
    #[error("order {order}: no sign threshold found up to s = {searched_to}")]
    ThresholdNotFound { order: u32, searched_to: u32 },
}

#[cfg(test)]
mod tests {
    use super::poly::rat;
    use super::*;
    use crate::real::Real;
    use crate::weight::{Verdict, WeightParams};
    use num_rational::BigRational;
    use num_traits::Zero;

    fn standard() -> WeightParams {
        WeightParams::standard()
    }

    #[test]
    fn first_derivative_closed_form() {
        let e = nth_derivative(&standard(), 1).unwrap();
        assert_eq!(e.numerator.part(0), RatPoly::constant(rat(-1, 1)));
        assert_eq!(e.numerator.part(1), RatPoly::from_terms([(4, rat(-4, 1)), (3, rat(8, 1)), (2, rat(-3, 1))]));
        assert_eq!(e.numerator.max_slot(), Some(1));
        let dr = e.radicand.derivative(&e.ring);
        assert_eq!(dr.part(1), RatPoly::from_terms([(4, rat(-4, 1)), (3, rat(12, 1)), (2, rat(-6, 1))]));
        assert!(dr.part(0).is_zero());
    }

    #[test]
    fn k0_part_is_alternating_constant() {
        for n in 0..=8u32 {
            let e = nth_derivative(&standard(), n).unwrap();
            let expected = if n % 2 == 0 { 1 } else { -1 };
            assert_eq!(e.numerator.part(0), RatPoly::constant(rat(expected, 1)), "n={n}");
            assert!(e.numerator.max_slot().unwrap() <= n);
        }
    }

    /// Central `n`-th difference of `ν` with step `h` at 512 bits.
    fn finite_difference(params: &WeightParams, n: u32, s: f64) -> Real {
        let bits = 512;
        let base = RadicalExpr::base_weight(params).unwrap();
        let h = Real::from_f64(1e-10, bits);
        let s = Real::from_f64(s, bits);
        let mut acc = Real::zero(bits);
        let mut binom = BigRational::from_integer(1.into());
        for i in 0..=n {
            let offset = Real::from_f64(n as f64 / 2.0 - i as f64, bits) * &h;
            let term = Real::from_rational(&binom, bits) * base.eval_real(&(&s + &offset));
            if i % 2 == 0 {
                acc += term;
            } else {
                acc -= &term;
            }
            binom = binom * BigRational::from_integer(((n - i) as i64).into()) / BigRational::from_integer(((i + 1) as i64).into());
        }
        acc / h.powi(n as u64)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for params in [standard(), WeightParams::new(1.0, 2.0, 1.0).unwrap(), WeightParams::new(0.0, 0.5, 2.0).unwrap()] {
            for n in 1..=8u32 {
                let e = nth_derivative(&params, n).unwrap();
                for s in [1.0, 1.25, 2.0, 3.5] {
                    let exact = e.eval_real(&Real::from_f64(s, 512));
                    let fd = finite_difference(&params, n, s);
                    let rel = Real::rel_diff(&exact, &fd).to_f64();
                    assert!(rel < 1e-12, "{params:?} n={n} s={s} rel={rel:e}");
                }
            }
        }
    }

    #[test]
    fn first_order_threshold_is_one() {
        let e = nth_derivative(&standard(), 1).unwrap();
        let t = tail_sign_threshold(&e).unwrap();
        assert_eq!(t.threshold, rat(1, 1));
        assert!(t.tail_margin > 0.0);
    }

    #[test]
    fn sign_law_on_dense_grid() {
        let params = standard();
        for n in 1..=4u32 {
            let (expr, _, tail) = certify_order(&params, n).unwrap();
            let start = Real::from_rational(&tail.threshold, 128);
            for i in 0..1000 {
                let s = &start + &Real::from_f64(i as f64 * 0.1, 128);
                let v = expr.eval_real(&s);
                let signed = if n % 2 == 0 { v } else { -v };
                assert!(!signed.is_negative(), "n={n} i={i}");
            }
        }
    }

    #[test]
    fn certificate_up_to_order_eight() {
        let cert = dz_certify(&standard(), 8, 32).unwrap();
        assert!(cert.valid);
        assert!(cert.radicand_nonnegative);
        assert_eq!(cert.orders.len(), 9);
        assert_eq!(cert.orders[1].tail.threshold, rat(1, 1));
        for o in &cert.orders {
            assert_eq!(o.limit.verdict, Verdict::Pass);
            assert!(o.tail.threshold <= rat(50, 1));
        }
        let json = serde_json::to_string(&cert).unwrap();
        let back: DzCertificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back.orders[0].structure, cert.orders[0].structure);
    }

    #[test]
    fn integer_family_member_certifies() {
        let cert = dz_certify(&WeightParams::new(1.0, 2.0, 1.0).unwrap(), 4, 16).unwrap();
        assert!(cert.valid);
    }

    #[test]
    fn limit_check_negative_control() {
        let mut e = nth_derivative(&standard(), 2).unwrap();
        e.prefactor_rate = BigRational::zero();
        e.numerator = ExpPolyElem::from_poly(RatPoly::monomial(rat(1, 1), 1));
        assert_eq!(limit_check(&e).verdict, Verdict::Fail);
        e.numerator = ExpPolyElem::from_poly(RatPoly::monomial(rat(1, 1), -2));
        assert_eq!(limit_check(&e).verdict, Verdict::Pass);
    }

    #[test]
    fn structure_violation_detected() {
        let mut e = nth_derivative(&standard(), 3).unwrap();
        e.numerator.add_slot(0, &RatPoly::monomial(rat(1, 1), 1));
        assert!(matches!(verify_structure(&standard(), &e), Err(SymbolicError::StructureViolation { order: 3, .. })));
    }
}
