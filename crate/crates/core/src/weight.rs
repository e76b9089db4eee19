//! The defining function `φ(z) = (1-|z|²)^A exp(-B/(1-|z|²)^α)` of the
//! Hartogs domain, its gradient, the induced radial weights and the
//! subharmonicity check for `-log φ`.
//!
//! Every weight is available in two coordinates: the radius `r ∈ [0, 1)` and
//! `s = 1/(1-r²) ∈ [1, ∞)`. Near the boundary the `s` form avoids the
//! cancellation in `1 - r²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("A must be finite and >= 0, got {0}")]
    BadA(f64),
    #[error("B must be finite and > 0, got {0}")]
    BadB(f64),
    #[error("alpha must be finite and > 0, got {0}")]
    BadAlpha(f64),
}

/// Parameters `(A, B, α)` of the defining function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
}

impl WeightParams {
    pub fn new(a: f64, b: f64, alpha: f64) -> Result<Self, WeightError> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(WeightError::BadA(a));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(WeightError::BadB(b));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(WeightError::BadAlpha(alpha));
        }
        Ok(WeightParams { a, b, alpha })
    }

    /// `(0, 1, 1)`: `φ(z) = exp(-1/(1-|z|²))`.
    pub fn standard() -> Self {
        WeightParams { a: 0.0, b: 1.0, alpha: 1.0 }
    }

    pub fn label(&self) -> String {
        format!("A={},B={},alpha={}", self.a, self.b, self.alpha)
    }
}

impl Default for WeightParams {
    fn default() -> Self {
        WeightParams::standard()
    }
}

/// Below this value of `1 - r²` evaluation switches to the `s` form.
const S_FORM_SWITCH: f64 = 1.0 / 32.0;

fn one_minus_r2(r: &Real) -> Real {
    Real::one(r.precision()) - r * r
}

fn use_s_form(u: &Real) -> bool {
    u < &Real::from_f64(S_FORM_SWITCH, u.precision())
}

/// `r` from `s = 1/(1-r²)`.
pub fn r_of_s(s: &Real) -> Real {
    (Real::one(s.precision()) - s.recip()).sqrt()
}

/// `φ` as a function of `s`: `s^{-A} exp(-B s^α)`.
pub fn phi_s(params: &WeightParams, s: &Real) -> Real {
    let bits = s.precision();
    let b = Real::from_f64(params.b, bits);
    let alpha = Real::from_f64(params.alpha, bits);
    let expo = (-(&b * &s.powf(&alpha))).exp();
    if params.a == 0.0 {
        expo
    } else {
        expo / s.powf(&Real::from_f64(params.a, bits))
    }
}

/// `φ(r)`; exactly zero for `r >= 1`.
pub fn phi(params: &WeightParams, r: &Real) -> Real {
    let bits = r.precision();
    let u = one_minus_r2(r);
    if !u.is_positive() {
        return Real::zero(bits);
    }
    if use_s_form(&u) {
        return phi_s(params, &u.recip());
    }
    let b = Real::from_f64(params.b, bits);
    let alpha = Real::from_f64(params.alpha, bits);
    let expo = (-(&b / &u.powf(&alpha))).exp();
    if params.a == 0.0 {
        expo
    } else {
        u.powf(&Real::from_f64(params.a, bits)) * expo
    }
}

/// `|∇φ|²` in the `s` coordinate: `2(1 - 1/s) φ² (A s + αB s^{α+1})²`.
pub fn grad_norm_sq_s(params: &WeightParams, s: &Real) -> Real {
    grad_norm_sq_s_with_phi(params, s, &phi_s(params, s))
}

fn grad_norm_sq_s_with_phi(params: &WeightParams, s: &Real, ph: &Real) -> Real {
    let bits = s.precision();
    let one = Real::one(bits);
    let a = Real::from_f64(params.a, bits);
    let ab = Real::from_f64(params.alpha * params.b, bits);
    let alpha1 = Real::from_f64(params.alpha + 1.0, bits);
    let log_deriv = &a * s + &ab * &s.powf(&alpha1);
    Real::from_u64(2, bits) * (&one - &s.recip()) * ph * ph * &log_deriv * &log_deriv
}

/// `|∇φ|²(r) = φ'(r)²/2`, the complex-gradient normalisation `2|∂φ/∂z|²`.
///
/// For `(0, 1, 1)` this is `exp(-2/(1-r²)) · 2r²/(1-r²)⁴`.
pub fn grad_norm_sq(params: &WeightParams, r: &Real) -> Real {
    let bits = r.precision();
    let u = one_minus_r2(r);
    if !u.is_positive() {
        return Real::zero(bits);
    }
    if use_s_form(&u) {
        return grad_norm_sq_s(params, &u.recip());
    }
    // φ'/φ = -2r (A/u + αB u^{-α-1})
    let a = Real::from_f64(params.a, bits);
    let ab = Real::from_f64(params.alpha * params.b, bits);
    let alpha1 = Real::from_f64(params.alpha + 1.0, bits);
    let log_deriv = &a / &u + &ab / &u.powf(&alpha1);
    let ph = phi(params, r);
    Real::from_u64(2, bits) * r * r * &ph * &ph * &log_deriv * &log_deriv
}

/// A radial weight on the disc, evaluable in both coordinates.
pub trait RadialWeight: Send + Sync {
    /// Weight at radius `r`; zero at `r = 1`.
    fn eval_r(&self, r: &Real) -> Real;
    /// Weight at the radius with `1/(1-r²) = s`.
    fn eval_s(&self, s: &Real) -> Real;
    /// `ln` of the weight in `s`, in double precision, for locating peaks.
    fn ln_eval_s_f64(&self, s: f64) -> f64;
    /// Stable identifier used in cache keys and reports.
    fn key(&self) -> String;
}

/// `w(r) = φ(r)^q √(1 + |∇φ|²)`.
///
/// With `q = 2j + 1` this is the weight of the `j`-th inflated Bergman space
/// (up to the constant `2π` carried by the moments).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialWeightProfile {
    pub params: WeightParams,
    pub phi_power: u32,
}

impl RadialWeightProfile {
    /// Inflation index `j`, i.e. `φ^{2j+1}`.
    pub fn for_index(params: WeightParams, j: u32) -> Self {
        RadialWeightProfile { params, phi_power: 2 * j + 1 }
    }

    pub fn with_power(params: WeightParams, phi_power: u32) -> Self {
        RadialWeightProfile { params, phi_power }
    }
}

/// The profile for inflation index `j`.
pub fn weight(params: &WeightParams, j: u32) -> RadialWeightProfile {
    RadialWeightProfile::for_index(*params, j)
}

impl RadialWeight for RadialWeightProfile {
    fn eval_r(&self, r: &Real) -> Real {
        let u = one_minus_r2(r);
        if !u.is_positive() {
            return Real::zero(r.precision());
        }
        if use_s_form(&u) {
            return self.eval_s(&u.recip());
        }
        let g = grad_norm_sq(&self.params, r);
        phi(&self.params, r).powi(self.phi_power as u64) * (Real::one(r.precision()) + g).sqrt()
    }

    fn eval_s(&self, s: &Real) -> Real {
        let ph = phi_s(&self.params, s);
        let g = grad_norm_sq_s_with_phi(&self.params, s, &ph);
        ph.powi(self.phi_power as u64) * (Real::one(s.precision()) + g).sqrt()
    }

    fn ln_eval_s_f64(&self, s: f64) -> f64 {
        let WeightParams { a, b, alpha } = self.params;
        let q = self.phi_power as f64;
        let ln_phi = -a * s.ln() - b * s.powf(alpha);
        let ln_g = std::f64::consts::LN_2 + (1.0 - 1.0 / s).ln() + 2.0 * ln_phi + 2.0 * (a * s + alpha * b * s.powf(alpha + 1.0)).ln();
        let ln_sqrt = if ln_g.is_finite() { 0.5 * ln_g.exp().ln_1p() } else { 0.0 };
        q * ln_phi + ln_sqrt
    }

    fn key(&self) -> String {
        format!("hartogs[{}][q={}]", self.params.label(), self.phi_power)
    }
}

/// `(1 - r²)^k`: a polynomially vanishing weight outside the Hartogs family.
///
/// `k = 0` is Lebesgue measure; `k = 2` is the contrast weight for which
/// Bergman projections stay bounded on every `L^p`, `1 < p < ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialWeight {
    pub exponent: u32,
}

impl RadialWeight for PolynomialWeight {
    fn eval_r(&self, r: &Real) -> Real {
        let u = one_minus_r2(r);
        if !u.is_positive() {
            return Real::zero(r.precision());
        }
        u.powi(self.exponent as u64)
    }

    fn eval_s(&self, s: &Real) -> Real {
        s.powi(self.exponent as u64).recip()
    }

    fn ln_eval_s_f64(&self, s: f64) -> f64 {
        -(self.exponent as f64) * s.ln()
    }

    fn key(&self) -> String {
        format!("poly[k={}]", self.exponent)
    }
}

/// `Δ(-log φ)` at radius `r`, using the radial Laplacian `u'' + u'/r`.
///
/// With `v = 1 - r²`:
/// `Δ(-log φ) = 4r²(A/v² + α(α+1)B v^{-α-2}) + 4(A/v + αB v^{-α-1})`,
/// which equals `4(A + αB)` at the origin.
pub fn laplacian_neg_log_phi(params: &WeightParams, r: &Real) -> Real {
    let bits = r.precision();
    let u = one_minus_r2(r);
    if use_s_form(&u) {
        return laplacian_neg_log_phi_s(params, &u.recip());
    }
    let a = Real::from_f64(params.a, bits);
    let b = Real::from_f64(params.b, bits);
    let al = params.alpha;
    let four = Real::from_u64(4, bits);
    let c2 = Real::from_f64(al * (al + 1.0), bits) * &b;
    let c1 = Real::from_f64(al, bits) * &b;
    let second = &a / &(&u * &u) + &c2 / &u.powf(&Real::from_f64(al + 2.0, bits));
    let first = &a / &u + &c1 / &u.powf(&Real::from_f64(al + 1.0, bits));
    &four * r * r * &second + &four * &first
}

/// `Δ(-log φ)` in the `s` coordinate:
/// `4(1 - 1/s)(A s² + α(α+1)B s^{α+2}) + 4(A s + αB s^{α+1})`.
pub fn laplacian_neg_log_phi_s(params: &WeightParams, s: &Real) -> Real {
    let bits = s.precision();
    let a = Real::from_f64(params.a, bits);
    let b = Real::from_f64(params.b, bits);
    let al = params.alpha;
    let four = Real::from_u64(4, bits);
    let r2 = Real::one(bits) - s.recip();
    let second = &a * s * s + Real::from_f64(al * (al + 1.0), bits) * &b * s.powf(&Real::from_f64(al + 2.0, bits));
    let first = &a * s + Real::from_f64(al, bits) * &b * s.powf(&Real::from_f64(al + 1.0, bits));
    &four * &r2 * &second + &four * &first
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoconvexityScan {
    pub params: WeightParams,
    pub grid_size: usize,
    pub s_cap: f64,
    pub min_value: Real,
    pub min_at_r: f64,
    pub min_at_s: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Default upper end of the `s` grid (`1 - r² = 10^{-6}`).
pub const DEFAULT_S_CAP: f64 = 1e6;

/// Minimum of `Δ(-log φ)` on a grid refined toward `r = 1`.
///
/// Half the points are uniform in `r ∈ [0, r(32)]`, the other half uniform in
/// `log s` up to `s_cap`, so both the centre and the boundary layer are
/// sampled densely.
pub fn pseudoconvexity_scan(params: &WeightParams, grid_size: usize, s_cap: f64, tolerance: f64, bits: usize) -> PseudoconvexityScan {
    let grid_size = grid_size.max(2);
    let n_inner = grid_size / 2;
    let n_outer = grid_size - n_inner;
    let r_switch = (1.0 - S_FORM_SWITCH).sqrt();
    let mut best: Option<(Real, f64, f64)> = None;
    let mut consider = |val: Real, r: f64, s: f64| {
        if best.as_ref().is_none_or(|(b, _, _)| &val < b) {
            best = Some((val, r, s));
        }
    };
    for i in 0..n_inner {
        let r = r_switch * i as f64 / n_inner as f64;
        let rr = Real::from_f64(r, bits);
        consider(laplacian_neg_log_phi(params, &rr), r, 1.0 / (1.0 - r * r));
    }
    let (l0, l1) = ((1.0 / S_FORM_SWITCH).ln(), s_cap.max(64.0).ln());
    for i in 0..n_outer {
        let s = (l0 + (l1 - l0) * i as f64 / (n_outer - 1).max(1) as f64).exp();
        let ss = Real::from_f64(s, bits);
        consider(laplacian_neg_log_phi_s(params, &ss), (1.0 - 1.0 / s).sqrt(), s);
    }
    let (min_value, min_at_r, min_at_s) = best.expect("grid is nonempty");
    let verdict = if min_value >= Real::from_f64(-tolerance, bits) { Verdict::Pass } else { Verdict::Fail };
    PseudoconvexityScan { params: *params, grid_size, s_cap, min_value, min_at_r, min_at_s, tolerance, verdict }
}
