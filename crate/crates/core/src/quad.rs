//! Double-exponential quadrature at extended precision.
//!
//! Finite intervals use the tanh-sinh map `x = c + d tanh(π/2 sinh t)`;
//! half-lines use the exp-sinh map `x = a + L exp(π/2 sinh t)`. Each level
//! halves the step in `t` and reuses every abscissa of the previous level, so
//! the error estimate is the difference between consecutive levels.
//!
//! Abscissae are stored as distances from the nearer endpoint, which keeps
//! integrands that vanish to infinite order at an endpoint resolvable down to
//! the extended exponent range.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

/// Precision and tolerance settings shared by every numerical pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecCtx {
    pub significand_bits: usize,
    pub target_rel_err: f64,
    pub max_refinement_levels: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecCtxError {
    #[error("significand_bits must be at least 128, got {0}")]
    TooFewBits(usize),
    #[error("target_rel_err {tol:e} is below the floor 2^(3-{bits}) for this precision")]
    ToleranceBelowFloor { tol: f64, bits: usize },
    #[error("target_rel_err must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("max_refinement_levels must be positive")]
    NoLevels,
}

impl PrecCtx {
    pub fn new(significand_bits: usize, target_rel_err: f64, max_refinement_levels: u32) -> Result<Self, PrecCtxError> {
        if significand_bits < 128 {
            return Err(PrecCtxError::TooFewBits(significand_bits));
        }
        if !(target_rel_err.is_finite() && target_rel_err > 0.0) {
            return Err(PrecCtxError::BadTolerance(target_rel_err));
        }
        let floor = 2f64.powi(3 - significand_bits as i32);
        if target_rel_err < floor {
            return Err(PrecCtxError::ToleranceBelowFloor { tol: target_rel_err, bits: significand_bits });
        }
        if max_refinement_levels == 0 {
            return Err(PrecCtxError::NoLevels);
        }
        Ok(PrecCtx { significand_bits, target_rel_err, max_refinement_levels })
    }

    pub fn bits(&self) -> usize {
        self.significand_bits
    }

    pub fn real(&self, x: f64) -> Real {
        Real::from_f64(x, self.significand_bits)
    }

    /// Same precision with a different relative tolerance.
    pub fn with_tol(&self, tol: f64) -> Result<Self, PrecCtxError> {
        PrecCtx::new(self.significand_bits, tol, self.max_refinement_levels)
    }
}

impl Default for PrecCtx {
    fn default() -> Self {
        PrecCtx { significand_bits: 256, target_rel_err: 1e-30, max_refinement_levels: 12 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Real,
    /// Absolute error estimate.
    pub err_estimate: Real,
    pub levels_used: u32,
}

impl QuadResult {
    pub fn rel_err(&self) -> f64 {
        if self.value.is_zero() {
            return if self.err_estimate.is_zero() { 0.0 } else { f64::INFINITY };
        }
        (&self.err_estimate / self.value.abs()).to_f64()
    }

    /// Sum of two pieces of a split integral.
    pub fn combine(&self, other: &QuadResult) -> QuadResult {
        QuadResult {
            value: &self.value + &other.value,
            err_estimate: &self.err_estimate + &other.err_estimate,
            levels_used: self.levels_used.max(other.levels_used),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge after {levels} levels (last relative change {last_rel_change:e}): {reason}")]
    NonConvergent { levels: u32, last_rel_change: f64, reason: String },
    #[error("integrand evaluation failed at x = {at:e}")]
    EvaluationFailure { at: f64 },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Rule {
    TanhSinh,
    ExpSinh,
}

/// One abscissa of the reference rule.
///
/// For tanh-sinh, `offset` is the distance from the nearer endpoint of
/// `[-1, 1]` and `side` tells which one (`-1` left, `+1` right, `0` centre).
/// For exp-sinh, `offset` is the abscissa itself on `(0, ∞)`.
struct Node {
    k: i64,
    offset: Real,
    weight: Real,
    side: i8,
}

type NodeKey = (Rule, usize, u32);

fn node_cache() -> &'static Mutex<HashMap<NodeKey, Arc<Vec<Node>>>> {
    static CACHE: OnceLock<Mutex<HashMap<NodeKey, Arc<Vec<Node>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Half-width of the `t` window: beyond it the tanh-sinh offset drops below `2^{-2 bits}`.
fn t_max(bits: usize) -> f64 {
    (2.0 * bits as f64 * std::f64::consts::LN_2 / std::f64::consts::PI).asinh() + 0.25
}

fn step(level: u32) -> f64 {
    0.5f64.powi(level as i32)
}

fn build_nodes(rule: Rule, bits: usize, level: u32) -> Vec<Node> {
    let h = step(level);
    let kmax = (t_max(bits) / h).ceil() as i64;
    let half_pi = Real::pi(bits) / Real::from_u64(2, bits);
    let one = Real::one(bits);
    let two = Real::from_u64(2, bits);
    let four = Real::from_u64(4, bits);
    let mut out = Vec::new();
    for k in -kmax..=kmax {
        if level > 0 && k % 2 == 0 {
            continue;
        }
        let t = Real::from_f64(k as f64 * h, bits);
        let ch = t.cosh();
        let u = &half_pi * t.sinh();
        match rule {
            Rule::TanhSinh => {
                if k == 0 {
                    out.push(Node { k, offset: one.clone(), weight: half_pi.clone(), side: 0 });
                    continue;
                }
                // e = exp(-2|u|); 1 - tanh|u| = 2e/(1+e); sech² u = 4e/(1+e)²
                let e = (-(&two * u.abs())).exp();
                let onepe = &one + &e;
                let offset = &(&two * &e) / &onepe;
                let weight = &(&(&half_pi * &ch) * &(&four * &e)) / &(&onepe * &onepe);
                out.push(Node { k, offset, weight, side: if k < 0 { -1 } else { 1 } });
            }
            Rule::ExpSinh => {
                let x = u.exp();
                let weight = &(&half_pi * &ch) * &x;
                out.push(Node { k, offset: x, weight, side: k.signum() as i8 });
            }
        }
    }
    out
}

fn nodes(rule: Rule, bits: usize, level: u32) -> Arc<Vec<Node>> {
    let key = (rule, bits, level);
    if let Some(v) = node_cache().lock().expect("node cache").get(&key) {
        return v.clone();
    }
    let built = Arc::new(build_nodes(rule, bits, level));
    node_cache().lock().expect("node cache").entry(key).or_insert(built).clone()
}

/// Maps a reference offset to an abscissa in the target interval.
enum Map<'a> {
    Finite { a: &'a Real, b: &'a Real, half: Real },
    HalfLine { a: &'a Real, scale: Real },
}

impl Map<'_> {
    fn abscissa(&self, node: &Node) -> Real {
        match self {
            Map::Finite { a, b, half } => match node.side {
                0 => *a + half,
                s if s < 0 => *a + &(half * &node.offset),
                _ => *b - &(half * &node.offset),
            },
            Map::HalfLine { a, scale } => *a + &(scale * &node.offset),
        }
    }

    fn jacobian(&self) -> &Real {
        match self {
            Map::Finite { half, .. } => half,
            Map::HalfLine { scale, .. } => scale,
        }
    }

    /// True when rounding has collapsed the abscissa onto an endpoint.
    fn at_endpoint(&self, x: &Real) -> bool {
        match self {
            Map::Finite { a, b, .. } => x == *a || x == *b,
            Map::HalfLine { a, .. } => x == *a,
        }
    }
}

struct Engine<'f, F: Fn(&Real) -> Real> {
    f: &'f F,
    ctx: &'f PrecCtx,
    rule: Rule,
    map: Map<'f>,
    /// Stop walking outward on the right once terms are negligible (half-line rule).
    truncate_right: bool,
}

struct LevelSum {
    sum: Real,
    l1: Real,
    /// `(k, |term|)` for every evaluated node, innermost first per side.
    terms: Vec<(i64, Real)>,
    /// Some node on the left / right rounded onto the endpoint.
    collapsed: (bool, bool),
}

impl<F: Fn(&Real) -> Real> Engine<'_, F> {
    fn eval_term(&self, node: &Node) -> Result<Option<Real>, QuadError> {
        let x = self.map.abscissa(node);
        if self.map.at_endpoint(&x) {
            return Ok(None);
        }
        let fx = (self.f)(&x);
        if !fx.is_finite() {
            return Err(QuadError::EvaluationFailure { at: x.to_f64() });
        }
        Ok(Some(&fx * &node.weight))
    }

    /// Sums the terms of one level whose index lies inside `window`.
    fn level(&self, level: u32, window: Option<(i64, i64)>, cut: &Real) -> Result<LevelSum, QuadError> {
        let bits = self.ctx.bits();
        let ns = nodes(self.rule, bits, level);
        let mut sum = Real::zero(bits);
        let mut l1 = Real::zero(bits);
        let mut terms = Vec::new();
        let mut collapsed = (false, false);
        let in_window = |k: i64| window.is_none_or(|(lo, hi)| k >= lo && k <= hi);
        let centre = ns.iter().position(|n| n.k >= 0).unwrap_or(ns.len());
        for node in ns[..centre].iter().rev().filter(|n| in_window(n.k)) {
            match self.eval_term(node)? {
                Some(term) => {
                    let mag = term.abs();
                    l1 += &mag;
                    sum += &term;
                    terms.push((node.k, mag));
                }
                None => collapsed.0 = true,
            }
        }
        let mut negligible_run = 0;
        for node in ns[centre..].iter().filter(|n| in_window(n.k)) {
            let Some(term) = self.eval_term(node)? else {
                collapsed.1 |= node.k > 0;
                continue;
            };
            {
                let mag = term.abs();
                l1 += &mag;
                sum += &term;
                let small = mag <= cut * &l1;
                terms.push((node.k, mag));
                if self.truncate_right && node.k > 0 {
                    negligible_run = if small { negligible_run + 1 } else { 0 };
                    if negligible_run >= 2 {
                        break;
                    }
                }
            }
        }
        Ok(LevelSum { sum, l1, terms, collapsed })
    }

    /// Refines level by level. With `stop` set, returns as soon as the
    /// tolerance is met; otherwise runs every level and records each.
    fn run(&self, stop: bool) -> Result<Vec<QuadResult>, QuadError> {
        let bits = self.ctx.bits();
        let tol = Real::from_f64(self.ctx.target_rel_err, bits);
        // terms below this fraction of the L1 mass cannot move the result
        let cut = Real::from_f64(2f64.powi(-(bits as i32)) * 1e-3, bits);
        let jac = self.map.jacobian().abs();
        let half = Real::ratio(1, 2, bits);

        let first = self.level(0, None, &cut)?;
        let mut h = Real::one(bits);
        let mut total_sum = first.sum.clone();
        let mut total_l1 = first.l1.clone();
        let mut estimate = &(&total_sum * &h) * &jac;

        // the outermost term on each side must be negligible; otherwise the
        // integrand does not decay at an endpoint. A side whose outer nodes
        // rounded onto the endpoint is exempt: the unresolved part is narrower
        // than one ulp.
        let outer_left = first.terms.iter().rfind(|(k, _)| *k < 0).filter(|_| !first.collapsed.0);
        let outer_right = first.terms.iter().rfind(|(k, _)| *k > 0).filter(|_| !first.collapsed.1);
        for (_, mag) in outer_left.into_iter().chain(outer_right) {
            if mag > &(&total_l1 * &tol) {
                return Err(QuadError::NonConvergent { levels: 0, last_rel_change: f64::INFINITY, reason: "integrand does not decay at an endpoint".into() });
            }
        }

        // later levels only visit the index range where level 0 saw mass
        let mut extent = (0i64, 0i64);
        for (k, mag) in &first.terms {
            if mag > &(&cut * &total_l1) {
                extent = (extent.0.min(*k), extent.1.max(*k));
            }
        }

        let mut history = Vec::new();
        let mut last_change = f64::INFINITY;
        for level in 1..=self.ctx.max_refinement_levels {
            let scale = 1i64 << level;
            let window = ((extent.0 - 1) * scale, (extent.1 + 1) * scale);
            let next = self.level(level, Some(window), &cut)?;
            total_sum += &next.sum;
            total_l1 += &next.l1;
            h = &h * &half;
            let new_estimate = &(&total_sum * &h) * &jac;
            let err = (&new_estimate - &estimate).abs();
            let mag = new_estimate.abs();
            let floor = &(&(&total_l1 * &h) * &jac) * &cut;
            last_change = if mag.is_zero() { 0.0 } else { (&err / &mag).to_f64() };
            estimate = new_estimate;
            let converged = level >= 2 && (err <= &tol * &mag || err <= floor);
            history.push(QuadResult { value: estimate.clone(), err_estimate: err, levels_used: level });
            if stop && converged {
                return Ok(history);
            }
        }
        if stop {
            return Err(QuadError::NonConvergent {
                levels: self.ctx.max_refinement_levels,
                last_rel_change: last_change,
                reason: "successive levels did not contract below tolerance".into(),
            });
        }
        Ok(history)
    }

    fn integrate(&self) -> Result<QuadResult, QuadError> {
        Ok(self.run(true)?.pop().expect("at least one level"))
    }
}

/// `∫_a^b f(x) dx` by tanh-sinh quadrature.
///
/// `f` may vanish to infinite order or carry an integrable algebraic
/// singularity at either endpoint. Abscissae that round onto an endpoint are
/// skipped, so `f` is only ever called strictly inside `(a, b)`.
pub fn integrate_finite<F>(f: F, a: &Real, b: &Real, ctx: &PrecCtx) -> Result<QuadResult, QuadError>
where
    F: Fn(&Real) -> Real,
{
    finite_engine(&f, a, b, ctx)?.integrate()
}

/// `∫_a^∞ f(x) dx` by exp-sinh quadrature.
///
/// `decay_scale` is the caller's bound on the length over which `f` decays
/// by a factor `e` beyond `a`; abscissae are placed at `a + decay_scale · x`.
/// The right tail is truncated once terms fall below the working precision.
pub fn integrate_semi_infinite<F>(f: F, a: &Real, decay_scale: f64, ctx: &PrecCtx) -> Result<QuadResult, QuadError>
where
    F: Fn(&Real) -> Real,
{
    if !(decay_scale.is_finite() && decay_scale > 0.0) {
        return Err(QuadError::InvalidInterval { a: a.to_f64(), b: f64::INFINITY });
    }
    let scale = Real::from_f64(decay_scale, ctx.bits());
    let engine = Engine { f: &f, ctx, rule: Rule::ExpSinh, map: Map::HalfLine { a, scale }, truncate_right: true };
    engine.integrate()
}

/// Estimates after each of levels `1..=ctx.max_refinement_levels`, without early exit.
pub fn refinement_history<F>(f: F, a: &Real, b: &Real, ctx: &PrecCtx) -> Result<Vec<QuadResult>, QuadError>
where
    F: Fn(&Real) -> Real,
{
    finite_engine(&f, a, b, ctx)?.run(false)
}

fn finite_engine<'f, F: Fn(&Real) -> Real>(f: &'f F, a: &'f Real, b: &'f Real, ctx: &'f PrecCtx) -> Result<Engine<'f, F>, QuadError> {
    if !(a < b) {
        return Err(QuadError::InvalidInterval { a: a.to_f64(), b: b.to_f64() });
    }
    let half = (b - a) / Real::from_u64(2, ctx.bits());
    Ok(Engine { f, ctx, rule: Rule::TanhSinh, map: Map::Finite { a, b, half }, truncate_right: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecCtx {
        PrecCtx::default()
    }

    fn r(x: f64) -> Real {
        Real::from_f64(x, 256)
    }

    /// `(e^{-1} - E_1(1)) / 2` with `E_1(1) = -γ + Σ_{k≥1} (-1)^{k+1} / (k·k!)`.
    fn e2_half_oracle(bits: usize) -> Real {
        let gamma = Real::parse("0.57721566490153286060651209008240243104215933593992", bits).unwrap();
        let mut sum = Real::zero(bits);
        let mut fact = Real::one(bits);
        for k in 1..80u64 {
            fact = &fact * &Real::from_u64(k, bits);
            let term = (&fact * &Real::from_u64(k, bits)).recip();
            if k % 2 == 1 {
                sum += &term;
            } else {
                sum -= &term;
            }
        }
        let e1 = &sum - &gamma;
        (Real::from_i64(-1, bits).exp() - e1) / Real::from_u64(2, bits)
    }

    #[test]
    fn ctx_invariants() {
        assert!(PrecCtx::new(64, 1e-10, 8).is_err());
        assert!(PrecCtx::new(128, 1e-40, 8).is_err());
        assert!(PrecCtx::new(256, 1e-60, 8).is_ok());
        assert!(PrecCtx::new(256, 1e-30, 0).is_err());
    }

    #[test]
    fn linear_on_unit_interval() {
        let q = integrate_finite(|x| x.clone(), &r(0.0), &r(1.0), &ctx()).unwrap();
        assert!((q.value.to_f64() - 0.5).abs() < 1e-30);
        assert!(q.levels_used <= ctx().max_refinement_levels);
        assert!(!q.err_estimate.is_negative());
    }

    #[test]
    fn polynomials_up_to_degree_ten() {
        for deg in 0..=10u64 {
            let q = integrate_finite(|x| x.powi(deg) * Real::from_u64(deg + 1, 256), &r(0.0), &r(1.0), &ctx()).unwrap();
            let rel = Real::rel_diff(&q.value, &Real::one(256)).to_f64();
            assert!(rel <= ctx().target_rel_err, "degree {deg}: {rel:e}");
        }
    }

    #[test]
    fn flat_endpoint_matches_series_oracle() {
        let q = integrate_finite(
            |x| {
                let u = Real::one(256) - x * x;
                x * (-u.recip()).exp()
            },
            &r(0.0),
            &r(1.0),
            &ctx(),
        )
        .unwrap();
        let expected = e2_half_oracle(256);
        assert!(Real::rel_diff(&q.value, &expected).to_f64() < 1e-28);
    }

    #[test]
    fn non_integrable_is_rejected() {
        let res = integrate_finite(|x| x.recip(), &r(0.0), &r(1.0), &ctx());
        assert!(matches!(res, Err(QuadError::NonConvergent { .. })), "{res:?}");
    }

    #[test]
    fn evaluation_failure_is_reported() {
        let res = integrate_finite(|x| if x > &r(0.5) { Real::nan(256) } else { x.clone() }, &r(0.0), &r(1.0), &ctx());
        assert!(matches!(res, Err(QuadError::EvaluationFailure { .. })));
    }

    #[test]
    fn invalid_interval() {
        assert!(matches!(integrate_finite(|x| x.clone(), &r(1.0), &r(0.0), &ctx()), Err(QuadError::InvalidInterval { .. })));
    }

    #[test]
    fn semi_infinite_closed_forms() {
        let q = integrate_semi_infinite(|s| (-s).exp(), &r(0.0), 1.0, &ctx()).unwrap();
        assert!(Real::rel_diff(&q.value, &Real::one(256)).to_f64() < 1e-30);
        let q = integrate_semi_infinite(|s| s * (-s).exp(), &r(0.0), 1.0, &ctx()).unwrap();
        assert!(Real::rel_diff(&q.value, &Real::one(256)).to_f64() < 1e-30);
    }

    #[test]
    fn substitution_identity_at_n_zero() {
        let c = ctx();
        let s_form = integrate_semi_infinite(|s| (-s).exp() / (s * s * Real::from_u64(2, 256)), &r(1.0), 1.0, &c).unwrap();
        let r_form = integrate_finite(
            |x| {
                let u = Real::one(256) - x * x;
                x * (-u.recip()).exp()
            },
            &r(0.0),
            &r(1.0),
            &c,
        )
        .unwrap();
        assert!(Real::rel_diff(&s_form.value, &r_form.value).to_f64() < 1e-20);
        assert!(Real::rel_diff(&s_form.value, &e2_half_oracle(256)).to_f64() < 1e-28);
    }

    #[test]
    fn sqrt_singularity_at_origin() {
        // ∫_0^1 x^{-1/2} dx = 2
        let q = integrate_finite(|x| x.sqrt().recip(), &r(0.0), &r(1.0), &ctx()).unwrap();
        assert!(Real::rel_diff(&q.value, &Real::from_u64(2, 256)).to_f64() < 1e-28);
    }

    #[test]
    fn refinement_error_is_monotone() {
        let c = PrecCtx { max_refinement_levels: 7, ..ctx() };
        let set: Vec<Box<dyn Fn(&Real) -> Real>> = vec![
            Box::new(|x: &Real| x.exp()),
            Box::new(|x: &Real| (Real::one(256) + x * x).recip()),
            Box::new(|x: &Real| x * (-(Real::one(256) - x * x).recip()).exp()),
        ];
        for f in &set {
            let hist = refinement_history(f, &r(0.0), &r(1.0), &c).unwrap();
            let errs: Vec<f64> = hist.iter().map(|q| q.err_estimate.to_f64()).collect();
            for w in errs.windows(2).skip(1) {
                assert!(w[1] <= w[0], "{errs:?}");
            }
        }
    }
}
