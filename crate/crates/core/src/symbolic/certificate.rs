//! Exact checks on `d^n ν/ds^n` and the sign-law certificate.
//!
//! Writing `N_n = Σ_k e^{-2kB s^α} P_k(s)`, the sign of the `n`-th derivative
//! is the sign of `N_n` because the prefactor and the radicand are positive.
//! For large `s` the `k = 0` part dominates; the threshold `s_n` beyond which
//! `(-1)^n N_n > 0` is proved with exact rational interval bounds.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::exppoly::{rational_string, ExpRing};
use super::poly::{pow_rat, rat, RatPoly};
use super::radical::{nth_derivative, RadicalExpr};
use super::SymbolicError;
use crate::real::Real;
use crate::weight::{Verdict, WeightParams};

/// Largest candidate threshold tried.
pub const MAX_THRESHOLD: u32 = 50;
/// Intervals narrower than `2^{-MAX_DEPTH}` are not split further.
const MAX_DEPTH: u32 = 16;
const MAX_TAIL_START: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotPoly {
    pub k: u32,
    pub poly: RatPoly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub order: u32,
    /// Sign of the leading coefficient of the `k = 0` part, `(-1)^n`.
    pub leading_sign: i8,
    pub k0_part: RatPoly,
    pub exp_parts: Vec<SlotPoly>,
}

/// Checks that `N_n` has the expected shape:
/// the radicand is `1 + e^{-2B s^α} L`, slots run from `0` to at most `n`,
/// the `k = 0` part obeys `Q_{m+1} = Q_m' - αB s^{α-1} Q_m` from `Q_0 = s^{-A}`,
/// and its leading coefficient has sign `(-1)^n`.
pub fn verify_structure(params: &WeightParams, expr: &RadicalExpr) -> Result<StructureReport, SymbolicError> {
    let n = expr.half_power_shift;
    let violation = |detail: String| SymbolicError::StructureViolation { order: n, detail };
    let base = RadicalExpr::base_weight(params)?;
    if expr.radicand != base.radicand {
        return Err(violation("radicand changed under differentiation".into()));
    }
    if expr.radicand.part(0) != RatPoly::one() || expr.radicand.max_slot() != Some(1) {
        return Err(violation("radicand is not 1 + e^{-2Bs^α}·L".into()));
    }
    if let Some(top) = expr.numerator.max_slot() {
        if top > n {
            return Err(violation(format!("numerator reaches slot {top} > {n}")));
        }
    }
    let ring = &expr.ring;
    let mut q = base.numerator.part(0);
    let g = ring.exponent_derivative(&expr.prefactor_rate);
    for _ in 0..n {
        q = q.derivative().sub(&q.mul(&g));
    }
    let k0 = expr.numerator.part(0);
    if k0 != q {
        return Err(violation(format!("k = 0 part {k0} differs from recurrence {q}")));
    }
    let expected = if n.is_multiple_of(2) { 1 } else { -1 };
    let lead = k0.leading().ok_or_else(|| violation("k = 0 part vanishes".into()))?;
    let sign = if lead.is_positive() { 1 } else { -1 };
    if sign != expected {
        return Err(violation(format!("leading sign {sign}, expected {expected}")));
    }
    let exp_parts = expr.numerator.slots().filter(|(k, _)| *k > 0).map(|(k, p)| SlotPoly { k, poly: p.clone() }).collect();
    Ok(StructureReport { order: n, leading_sign: sign, k0_part: k0, exp_parts })
}

/// True if the radicand's exponential slots are nonnegative on `s >= 1`.
pub fn radicand_nonnegative(expr: &RadicalExpr) -> bool {
    expr.radicand.slots().all(|(k, p)| k == 0 || p.nonnegative_beyond_one())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub verdict: Verdict,
    pub reason: String,
}

/// `lim_{s→∞} d^n ν/ds^n = 0`, decided from the exponential structure.
pub fn limit_check(expr: &RadicalExpr) -> LimitCheck {
    let rate = &expr.prefactor_rate;
    let radicand_to_one = expr.radicand.part(0) == RatPoly::one() && expr.ring.b.is_positive();
    if !radicand_to_one {
        return LimitCheck { verdict: Verdict::Fail, reason: "radicand does not tend to 1".into() };
    }
    if rate.is_positive() {
        return LimitCheck { verdict: Verdict::Pass, reason: format!("prefactor e^(-{rate}·s^{}) beats every polynomial", expr.ring.alpha) };
    }
    let k0 = expr.numerator.part(0);
    match k0.degree() {
        Some(d) if d >= 0 => LimitCheck { verdict: Verdict::Fail, reason: format!("no decaying prefactor and k = 0 part has degree {d}") },
        _ => LimitCheck { verdict: Verdict::Pass, reason: "k = 0 part has only negative powers".into() },
    }
}

/// Rigorous upper bound for `e^{-x}`, `x >= 0`.
fn exp_neg_upper(x: &BigRational) -> BigRational {
    if x <= &rat(20, 1) {
        // 1/T_40(x) with T_40 the Taylor polynomial, which is below e^x
        let mut term = BigRational::one();
        let mut sum = BigRational::one();
        for i in 1..=40 {
            term = term * x / BigInt::from(i);
            sum += &term;
        }
        return sum.recip();
    }
    // e^{-x} <= 2^{-floor(x · 1.4426)} since 1.4426 < log2(e)
    let y = (x * rat(14426, 10000)).floor().to_integer();
    let y = y.to_usize().unwrap_or(usize::MAX / 2);
    BigRational::new(BigInt::one(), BigInt::one() << y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub k: u32,
    /// `d - D`: power of `s` relative to the `k = 0` degree.
    pub relative_degree: i64,
    /// Where `s^m e^{-2kB s^α}` peaks; the term decreases beyond it.
    pub at: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    pub order: u32,
    /// `s_n`: `(-1)^n d^n ν/ds^n > 0` for all `s >= s_n`.
    #[serde(with = "rational_string")]
    pub threshold: BigRational,
    /// Beyond this point the bound is termwise monotone.
    pub tail_start: u64,
    pub intervals_checked: usize,
    pub critical_points: Vec<CriticalPoint>,
    /// Lower bound of `(-1)^n s^{M-D} N_n` minus the exponential terms at `tail_start`.
    pub tail_margin: f64,
}

/// `σ P_k` multiplied by `s^M` so every slot is an ordinary polynomial.
struct SignProblem {
    alpha: u32,
    slots: Vec<(u32, BigRational, RatPoly)>,
}

impl SignProblem {
    fn new(expr: &RadicalExpr) -> Self {
        let n = expr.half_power_shift;
        let sigma = if n.is_multiple_of(2) { rat(1, 1) } else { rat(-1, 1) };
        let min_deg = expr.numerator.slots().filter_map(|(_, p)| p.min_degree()).min().unwrap_or(0);
        let shift = (-min_deg).max(0);
        let slots = expr.numerator.slots().map(|(k, p)| (k, expr.ring.rate(k), p.scale(&sigma).shift_degrees(shift))).collect();
        SignProblem { alpha: expr.ring.alpha, slots }
    }

    fn k0(&self) -> Option<&RatPoly> {
        self.slots.iter().find(|(k, _, _)| *k == 0).map(|(_, _, p)| p)
    }

    /// Lower bound of `Σ_k e^{-λ_k s^α} σP_k(s)` on `[a, b]`, `a >= 1`.
    fn lower_on(&self, a: &BigRational, b: &BigRational) -> BigRational {
        let mid = (a + b) / BigInt::from(2);
        let rad = (b - a) / BigInt::from(2);
        let a_pow = pow_rat(a, self.alpha as i64);
        let mut total = BigRational::zero();
        for (k, lambda, p) in &self.slots {
            let shifted = p.taylor_shift(&mid);
            let mut spread = BigRational::zero();
            for (d, c) in shifted.terms().filter(|(d, _)| *d > 0) {
                spread += c.abs() * pow_rat(&rad, d);
            }
            let lo = shifted.coeff(0) - spread;
            if *k == 0 {
                total += lo;
            } else if lo.is_negative() {
                total += exp_neg_upper(&(lambda * &a_pow)) * lo;
            }
        }
        total
    }

    /// Termwise bound on `[S, ∞)`; `None` if some term has not peaked by `S`.
    fn tail_margin(&self, s: u64) -> Option<BigRational> {
        let k0 = self.k0()?;
        let big_d = k0.degree()?;
        let lead = k0.leading()?.clone();
        if !lead.is_positive() {
            return None;
        }
        let sr = BigRational::from_integer(BigInt::from(s));
        let s_pow = pow_rat(&sr, self.alpha as i64);
        let mut lower = lead;
        for (d, c) in k0.terms().filter(|(d, c)| *d < big_d && c.is_negative()) {
            lower -= c.abs() * pow_rat(&sr, d - big_d);
        }
        let mut upper = BigRational::zero();
        for (_, lambda, p) in self.slots.iter().filter(|(k, _, _)| *k > 0) {
            let x = lambda * &s_pow;
            let e = exp_neg_upper(&x);
            for (d, c) in p.terms() {
                let m = d - big_d;
                if m > 0 && &x * BigInt::from(self.alpha) < BigRational::from_integer(BigInt::from(m)) {
                    return None;
                }
                upper += c.abs() * pow_rat(&sr, m) * &e;
            }
        }
        Some(lower - upper)
    }

    fn critical_points(&self) -> Vec<CriticalPoint> {
        let Some(big_d) = self.k0().and_then(|p| p.degree()) else { return Vec::new() };
        let mut out = Vec::new();
        for (k, lambda, p) in self.slots.iter().filter(|(k, _, _)| *k > 0) {
            let lam = lambda.to_f64().unwrap_or(f64::NAN);
            for (d, _) in p.terms() {
                let m = d - big_d;
                let at = if m > 0 { (m as f64 / (lam * self.alpha as f64)).powf(1.0 / self.alpha as f64) } else { 1.0 };
                out.push(CriticalPoint { k: *k, relative_degree: m, at });
            }
        }
        out
    }

    /// Smallest integer `S` where the termwise tail bound is positive.
    fn find_tail_start(&self) -> Option<u64> {
        let ok = |s: u64| self.tail_margin(s).is_some_and(|m| m.is_positive());
        let mut hi = 1u64;
        while !ok(hi) {
            hi *= 2;
            if hi > MAX_TAIL_START {
                return None;
            }
        }
        let mut lo = hi / 2;
        if lo == 0 || ok(lo) {
            return Some(if lo == 0 { hi } else { lo });
        }
        // invariant: !ok(lo), ok(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Proves positivity on `[from, to]`; on failure returns the failing left end.
    fn verify_range(&self, from: u64, to: u64) -> Result<usize, BigRational> {
        let quarter = rat(1, 4);
        let mut stack: Vec<(BigRational, BigRational, u32)> = Vec::new();
        let mut x = BigRational::from_integer(BigInt::from(to));
        let start = BigRational::from_integer(BigInt::from(from));
        while x > start {
            let left = (&x - &quarter).max(start.clone());
            stack.push((left.clone(), x.clone(), 2));
            x = left;
        }
        let mut checked = 0;
        while let Some((a, b, depth)) = stack.pop() {
            checked += 1;
            if self.lower_on(&a, &b).is_positive() {
                continue;
            }
            if depth >= MAX_DEPTH {
                return Err(a);
            }
            let mid = (&a + &b) / BigInt::from(2);
            stack.push((mid.clone(), b, depth + 1));
            stack.push((a, mid, depth + 1));
        }
        Ok(checked)
    }
}

/// Smallest integer `s_n <= MAX_THRESHOLD` with `(-1)^n N_n > 0` on `[s_n, ∞)`, proved exactly.
pub fn tail_sign_threshold(expr: &RadicalExpr) -> Result<TailCertificate, SymbolicError> {
    let order = expr.half_power_shift;
    let problem = SignProblem::new(expr);
    let not_found = || SymbolicError::ThresholdNotFound { order, searched_to: MAX_THRESHOLD };
    let tail_start = problem.find_tail_start().ok_or_else(not_found)?;
    let margin = problem.tail_margin(tail_start).ok_or_else(not_found)?;
    let mut candidate = 1u64;
    while candidate <= MAX_THRESHOLD as u64 {
        let result = if candidate >= tail_start { Ok(0) } else { problem.verify_range(candidate, tail_start) };
        match result {
            Ok(intervals_checked) => {
                return Ok(TailCertificate {
                    order,
                    threshold: BigRational::from_integer(BigInt::from(candidate)),
                    tail_start,
                    intervals_checked,
                    critical_points: problem.critical_points(),
                    tail_margin: margin.to_f64().unwrap_or(f64::NAN),
                });
            }
            Err(bad) => {
                let next = bad.floor().to_integer().to_u64().unwrap_or(u64::MAX - 1) + 1;
                candidate = next.max(candidate + 1);
            }
        }
    }
    Err(not_found())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderCertificate {
    pub structure: StructureReport,
    pub limit: LimitCheck,
    pub tail: TailCertificate,
    /// Minimum of `(-1)^n d^n ν/ds^n` over sample points in `[s_n, s_n + 64]`.
    pub sampled_min: Real,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DzCertificate {
    pub params: WeightParams,
    pub max_order: u32,
    pub ring: ExpRing,
    pub radicand: super::exppoly::ExpPolyElem,
    pub radicand_nonnegative: bool,
    pub orders: Vec<OrderCertificate>,
    pub chain_rule_note: String,
    pub valid: bool,
}

const CHAIN_RULE_NOTE: &str = "s = 1/(1-r^2) is strictly increasing on [0,1) with ds/dr = 2r s^2 > 0, \
so the sign pattern (-1)^n d^n nu/ds^n >= 0 for s >= s_n transfers to the region r >= sqrt(1 - 1/s_n); \
derivatives are taken in s, not r.";

/// Sign-law certificate for orders `0..=max_order`.
pub fn dz_certify(params: &WeightParams, max_order: u32, sample_points: usize) -> Result<DzCertificate, SymbolicError> {
    let base = RadicalExpr::base_weight(params)?;
    let radicand_ok = radicand_nonnegative(&base);
    let mut orders = Vec::new();
    let mut expr = base.clone();
    let bits = 256;
    for n in 0..=max_order {
        if n > 0 {
            expr = expr.derivative();
        }
        let structure = verify_structure(params, &expr)?;
        let limit = limit_check(&expr);
        let tail = tail_sign_threshold(&expr)?;
        let sigma = if expr.half_power_shift % 2 == 0 { Real::one(bits) } else { -Real::one(bits) };
        let start = Real::from_rational(&tail.threshold, bits);
        let mut sampled_min: Option<Real> = None;
        for i in 0..sample_points {
            let s = &start + &Real::from_f64(64.0 * i as f64 / sample_points.max(1) as f64, bits);
            let v = &sigma * &expr.eval_real(&s);
            if sampled_min.as_ref().is_none_or(|m| &v < m) {
                sampled_min = Some(v);
            }
        }
        orders.push(OrderCertificate { structure, limit, tail, sampled_min: sampled_min.unwrap_or_else(|| Real::zero(bits)), samples: sample_points });
    }
    let valid = radicand_ok && orders.iter().all(|o| o.limit.verdict == Verdict::Pass && !o.sampled_min.is_negative());
    Ok(DzCertificate {
        params: *params,
        max_order,
        ring: base.ring.clone(),
        radicand: base.radicand.clone(),
        radicand_nonnegative: radicand_ok,
        orders,
        chain_rule_note: CHAIN_RULE_NOTE.to_string(),
        valid,
    })
}

/// Shorthand for `nth_derivative` followed by the exact checks.
pub fn certify_order(params: &WeightParams, n: u32) -> Result<(RadicalExpr, StructureReport, TailCertificate), SymbolicError> {
    let expr = nth_derivative(params, n)?;
    let structure = verify_structure(params, &expr)?;
    let tail = tail_sign_threshold(&expr)?;
    Ok((expr, structure, tail))
}
