//! Lower bounds `R_n(p) = ‖zⁿ‖_p ‖zⁿ‖_{p'} / ‖zⁿ‖₂²` for the `L^p` norm of a
//! weighted Bergman projection, and the growth verdict built on them.
//!
//! Averaging over rotations projects onto the `n`-th Fourier mode, an `L^p`
//! contraction for radial weights, and on that mode the projection acts as
//! the rank-one map `f ↦ ⟨f, zⁿ⟩ zⁿ/‖zⁿ‖₂²`, whose norm is `R_n(p)`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moments::{moment, MomentError};
use crate::quad::PrecCtx;
use crate::real::Real;
use crate::weight::{PolynomialWeight, RadialWeight, RadialWeightProfile, WeightParams};

#[derive(Debug, Error)]
pub enum IrregularityError {
    #[error("exponent must be a rational number > 1, got {0:?}")]
    BadExponent(String),
    #[error("n list must be nonempty and strictly ascending")]
    BadNList,
    #[error(transparent)]
    Moment(#[from] MomentError),
}

/// A Lebesgue exponent `p > 1`, kept exact so that `p'` is exact too.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LpExponent(BigRational);

impl LpExponent {
    pub fn new(p: BigRational) -> Result<Self, IrregularityError> {
        if p <= BigRational::one() {
            return Err(IrregularityError::BadExponent(p.to_string()));
        }
        Ok(LpExponent(p))
    }

    pub fn integer(p: i64) -> Result<Self, IrregularityError> {
        LpExponent::new(BigRational::from_integer(p.into()))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    /// `p' = p/(p-1)`.
    pub fn conjugate(&self) -> Self {
        LpExponent(&self.0 / (&self.0 - BigRational::one()))
    }

    pub fn is_two(&self) -> bool {
        self.0 == BigRational::from_integer(2.into())
    }

    pub fn to_real(&self, bits: usize) -> Real {
        Real::from_rational(&self.0, bits)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_real(128).to_f64()
    }
}

impl fmt::Display for LpExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for LpExponent {
    type Err = IrregularityError;

    /// Accepts `4`, `4/3` and terminating decimals such as `1.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IrregularityError::BadExponent(s.to_string());
        let t = s.trim();
        let q = if let Some((int, frac)) = t.split_once('.') {
            if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
            BigRational::new(digits, num_traits::pow(BigInt::from(10), frac.len()))
        } else {
            t.parse::<BigRational>().map_err(|_| bad())?
        };
        if q.denom().is_zero() || q.is_negative() {
            return Err(bad());
        }
        LpExponent::new(q).map_err(|_| bad())
    }
}

impl Serialize for LpExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LpExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Weight a scan runs against: a member of the Hartogs family (inflation
/// index 0) or a polynomial comparison weight `(1-r²)^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScanWeight {
    Hartogs { params: WeightParams },
    Polynomial { exponent: u32 },
}

impl ScanWeight {
    pub fn radial(&self) -> Box<dyn RadialWeight> {
        match *self {
            ScanWeight::Hartogs { params } => Box::new(RadialWeightProfile::for_index(params, 0)),
            ScanWeight::Polynomial { exponent } => Box::new(PolynomialWeight { exponent }),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ScanWeight::Hartogs { params } => format!("Hartogs profile {}", params.label()),
            ScanWeight::Polynomial { exponent } => format!("(1-r^2)^{exponent}"),
        }
    }

    /// Laplace-method limit of `log R_n(p)/√n`, where one is known.
    ///
    /// For `α = 1`, `log moment(β) = -√(2Bβ) + o(√β)` (saddle at `s = √(β/2B)`),
    /// which gives `√B (2 - √(2/p) - √(2/p'))`. Polynomial weights have
    /// moments of power-law size, so the limit is 0.
    pub fn predicted_slope(&self, p: &LpExponent) -> Option<f64> {
        match *self {
            ScanWeight::Hartogs { params } if params.alpha == 1.0 => Some(params.b.sqrt() * laplace_slope(p)),
            ScanWeight::Hartogs { .. } => None,
            ScanWeight::Polynomial { .. } => Some(0.0),
        }
    }
}

/// `2 - √(2/p) - √(2/p')`.
pub fn laplace_slope(p: &LpExponent) -> f64 {
    let pf = p.to_f64();
    let qf = p.conjugate().to_f64();
    2.0 - (2.0 / pf).sqrt() - (2.0 / qf).sqrt()
}

/// Moments already computed in this process, keyed by weight, exact `β` and precision.
#[derive(Default)]
pub struct MomentMemo {
    values: Mutex<HashMap<(String, String, usize, u64), Real>>,
}

impl MomentMemo {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, w: &dyn RadialWeight, beta: &BigRational, ctx: &PrecCtx) -> Result<Real, MomentError> {
        let key = (w.key(), beta.to_string(), ctx.bits(), ctx.target_rel_err.to_bits());
        if let Some(v) = self.values.lock().expect("memo").get(&key) {
            return Ok(v.clone());
        }
        let v = moment(w, &Real::from_rational(beta, ctx.bits()), ctx)?.value;
        self.values.lock().expect("memo").insert(key, v.clone());
        Ok(v)
    }
}

/// `R_n(p) = moment(np)^{1/p} moment(np')^{1/p'} / moment(2n)`.
pub fn irregularity_ratio(w: &dyn RadialWeight, p: &LpExponent, n: u32, ctx: &PrecCtx, memo: &MomentMemo) -> Result<Real, IrregularityError> {
    let bits = ctx.bits();
    let nq = BigRational::from_integer(n.into());
    let q = p.conjugate();
    let mp = memo.get(w, &(&nq * p.value()), ctx)?;
    let mq = memo.get(w, &(&nq * q.value()), ctx)?;
    let m2 = memo.get(w, &(&nq * BigRational::from_integer(2.into())), ctx)?;
    let lhs = mp.powf(&p.to_real(bits).recip()) * mq.powf(&q.to_real(bits).recip());
    Ok(lhs / m2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GrowthVerdict {
    UnboundedTrend,
    Inconclusive,
    BoundedPlateau,
}

impl fmt::Display for GrowthVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthVerdict::UnboundedTrend => "UNBOUNDED_TREND",
            GrowthVerdict::Inconclusive => "INCONCLUSIVE",
            GrowthVerdict::BoundedPlateau => "BOUNDED_PLATEAU",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRule {
    /// Final `R_n` above which a strictly increasing sequence counts as unbounded.
    pub growth_threshold: f64,
    /// Relative spread of the last three values below which they form a plateau.
    pub plateau_spread: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        VerdictRule { growth_threshold: 5.0, plateau_spread: 0.01 }
    }
}

impl VerdictRule {
    pub fn classify(&self, values: &[f64]) -> GrowthVerdict {
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        if increasing && values.last().is_some_and(|&v| v > self.growth_threshold) {
            return GrowthVerdict::UnboundedTrend;
        }
        if values.len() >= 3 {
            let tail = &values[values.len() - 3..];
            let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi / lo - 1.0 < self.plateau_spread {
                return GrowthVerdict::BoundedPlateau;
            }
        }
        GrowthVerdict::Inconclusive
    }
}

/// Hölder gives `R_n(p) >= 1`; values below `1 - HOLDER_SLACK` signal a numerical fault.
pub const HOLDER_SLACK: f64 = 1e-20;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IrregularityReport {
    pub weight: ScanWeight,
    pub p: LpExponent,
    pub p_conjugate: LpExponent,
    pub n_list: Vec<u32>,
    pub r_values: Vec<Real>,
    pub log_r: Vec<f64>,
    /// Least-squares slope of `log R_n` against `√n`.
    pub fitted_slope: f64,
    /// `log R_n / √n` at the last `n`.
    pub endpoint_slope: f64,
    pub predicted_slope: Option<f64>,
    pub holder_ok: bool,
    pub rule: VerdictRule,
    pub verdict: GrowthVerdict,
}

impl IrregularityReport {
    /// CSV with columns `n, R_n, log R_n, sqrt n`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "R_n", "log R_n", "sqrt n"])?;
        for ((n, r), l) in self.n_list.iter().zip(&self.r_values).zip(&self.log_r) {
            w.write_record([n.to_string(), r.to_decimal_string(), format!("{l:.17e}"), format!("{:.17e}", (*n as f64).sqrt())])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `R_n(p)` over `n_list` with the growth verdict.
pub fn irregularity_scan(
    weight: &ScanWeight,
    p: &LpExponent,
    n_list: &[u32],
    rule: &VerdictRule,
    ctx: &PrecCtx,
    memo: &MomentMemo,
) -> Result<IrregularityReport, IrregularityError> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IrregularityError::BadNList);
    }
    let w = weight.radial();
    let r_values = n_list.par_iter().map(|&n| irregularity_ratio(w.as_ref(), p, n, ctx, memo)).collect::<Result<Vec<_>, _>>()?;
    let log_r: Vec<f64> = r_values.iter().map(|r| r.ln().to_f64()).collect();
    let sqrt_n: Vec<f64> = n_list.iter().map(|&n| (n as f64).sqrt()).collect();
    let floor = Real::one(ctx.bits()) - Real::from_f64(HOLDER_SLACK, ctx.bits());
    let holder_ok = r_values.iter().all(|r| r >= &floor);
    let values: Vec<f64> = r_values.iter().map(Real::to_f64).collect();
    Ok(IrregularityReport {
        weight: *weight,
        p: p.clone(),
        p_conjugate: p.conjugate(),
        n_list: n_list.to_vec(),
        fitted_slope: least_squares_slope(&sqrt_n, &log_r),
        endpoint_slope: log_r.last().copied().unwrap_or(f64::NAN) / sqrt_n.last().copied().unwrap_or(f64::NAN),
        predicted_slope: weight.predicted_slope(p),
        holder_ok,
        rule: *rule,
        verdict: rule.classify(&values),
        r_values,
        log_r,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityCheck {
    pub p: LpExponent,
    pub n: u32,
    pub r_p: Real,
    pub r_conjugate: Real,
    pub rel_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const DUALITY_TOLERANCE: f64 = 1e-15;

/// `R_n(p) = R_n(p')`.
pub fn duality_symmetry_check(w: &dyn RadialWeight, p: &LpExponent, n: u32, ctx: &PrecCtx, memo: &MomentMemo) -> Result<DualityCheck, IrregularityError> {
    let a = irregularity_ratio(w, p, n, ctx, memo)?;
    let b = irregularity_ratio(w, &p.conjugate(), n, ctx, memo)?;
    let rel_diff = Real::rel_diff(&a, &b).to_f64();
    Ok(DualityCheck { p: p.clone(), n, r_p: a, r_conjugate: b, rel_diff, tolerance: DUALITY_TOLERANCE, pass: rel_diff <= DUALITY_TOLERANCE })
}
