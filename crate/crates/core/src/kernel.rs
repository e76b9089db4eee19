//! Weighted Bergman kernels `B_j(z, t) = Σ_n (z t̄)ⁿ / m_{j,n}` and the
//! inflated Szegő kernel `S((z₁,z₂),(t₁,t₂)) = Σ_j z₂ʲ B_j(z₁,t₁) t̄₂ʲ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moments::{MomentCache, MomentError, MomentTable};
use crate::quad::{integrate_finite, PrecCtx, QuadResult};
use crate::real::{Complex, Real};
use crate::weight::{grad_norm_sq, phi, Verdict, WeightParams};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("moment table for j = {j} ends at n = {available:?}, need n = {needed}")]
    TruncationFailure { j: u32, needed: u32, available: Option<u32> },
    #[error("tables up to j = {j_max} are too few for the requested tolerance in z2")]
    InsufficientInflation { j_max: u32 },
    #[error("series may diverge: {0}")]
    DivergenceRisk(String),
    #[error(transparent)]
    Moment(#[from] MomentError),
}

/// `B_j` backed by a moment table. `truncation` is the minimum number of
/// terms summed before the tail bound is consulted.
#[derive(Clone, Debug)]
pub struct KernelSeries {
    pub j: u32,
    pub table: MomentTable,
    pub truncation: u32,
}

impl KernelSeries {
    pub fn new(table: MomentTable) -> Self {
        KernelSeries { j: table.j, table, truncation: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: Complex,
    pub tail_bound: Real,
    /// Highest power of `z t̄` included.
    pub last_term: u32,
}

/// `Σ_{n≤N} (z t̄)ⁿ / m_{j,n}` with `N` raised until the tail bound is at most `tol`.
///
/// With `ρ = |z t̄|` and `q = m_{N+2}/m_{N+1}`, nondecreasing ratios give
/// `tail ≤ ρ^{N+1} / (m_{N+1}(1 - ρ/q))` whenever `ρ < q`.
pub fn bergman_kernel_eval(series: &KernelSeries, z: &Complex, t: &Complex, tol: f64) -> Result<KernelValue, KernelError> {
    series_sum(&series.table, series.truncation, z, t, tol)
}

fn series_sum(table: &MomentTable, truncation: u32, z: &Complex, t: &Complex, tol: f64) -> Result<KernelValue, KernelError> {
    let w = z * &t.conj();
    let rho = w.abs();
    let bits = rho.precision();
    let one = Real::one(bits);
    if rho >= one {
        return Err(KernelError::DivergenceRisk(format!("|z conj(t)| = {} >= 1", rho.to_f64())));
    }
    let m = |n: u32| -> Result<&Real, KernelError> { table.get(n).ok_or(KernelError::TruncationFailure { j: table.j, needed: n, available: table.n_max() }) };
    let tol_r = Real::from_f64(tol, bits);
    let mut value = Complex::zero(bits);
    let mut power = Complex::one(bits);
    let mut rho_pow = one.clone();
    let mut n = 0u32;
    loop {
        value += &power.scale(&m(n)?.recip());
        power = &power * &w;
        rho_pow = &rho_pow * &rho;
        if n >= truncation {
            let tail = if rho.is_zero() {
                Some(Real::zero(bits))
            } else {
                let (m1, m2) = (m(n + 1)?, m(n + 2)?);
                let q = m2 / m1;
                (rho < q).then(|| &rho_pow / &(m1 * &(&one - &(&rho / &q))))
            };
            if let Some(tail) = tail {
                if tail <= tol_r {
                    return Ok(KernelValue { value, tail_bound: tail, last_term: n });
                }
            }
        }
        n += 1;
    }
}

/// Tables `m_{j,·}` for `j = 0..=j_max`, the data behind `S`.
#[derive(Clone, Debug)]
pub struct SzegoKernel {
    pub params: WeightParams,
    pub tables: Vec<MomentTable>,
}

impl SzegoKernel {
    pub fn build(params: &WeightParams, j_max: u32, n_max: u32, ctx: &PrecCtx, cache: Option<&MomentCache>) -> Result<Self, KernelError> {
        let tables = (0..=j_max)
            .map(|j| match cache {
                Some(c) => c.table(params, j, n_max, ctx),
                None => crate::moments::moment_table(params, j, n_max, ctx),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SzegoKernel { params: *params, tables })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SzegoEval {
    pub value: Complex,
    pub tail_bound: Real,
    /// Last `z₁`-power summed for each `j`.
    pub n_truncation: Vec<u32>,
    /// Last `z₂`-power summed.
    pub j_truncation: u32,
    /// Radius used for the `j`-tail domination.
    pub domination_radius: f64,
}

fn ln_phi_f64(params: &WeightParams, r: f64) -> f64 {
    let u = 1.0 - r * r;
    params.a * u.ln() - params.b / u.powf(params.alpha)
}

/// Bound on `Σ_{j>J} Σ_n |z₂t₂|ʲ |z₁t₁|ⁿ / m_{j,n}` through a radius `R`.
///
/// `m_{j,n} ≥ (2π)² φ(R)^{2j+1} R^{2n+2}/(2n+2)` since `φ` decreases and the
/// surface factor is at least one, so with `x = ρ₁/R²`, `y = ρ₂/φ(R)²` the
/// tail is at most `2 y^{J+1} / ((1-x)²(1-y)(2π)² R² φ(R))`.
fn j_tail_ln_f64(params: &WeightParams, rho1: f64, rho2: f64, r: f64, big_j: u32) -> f64 {
    let lp = ln_phi_f64(params, r);
    let x = rho1 / (r * r);
    let ln_y = rho2.ln() - 2.0 * lp;
    if x >= 1.0 || ln_y >= 0.0 {
        return f64::INFINITY;
    }
    let y = ln_y.exp();
    2f64.ln() + (big_j as f64 + 1.0) * ln_y - 2.0 * (1.0 - x).ln() - (1.0 - y).ln() - 2.0 * (2.0 * std::f64::consts::PI).ln() - 2.0 * r.ln() - lp
}

fn j_tail_bound(params: &WeightParams, rho1: &Real, rho2: &Real, r: f64, big_j: u32) -> Option<Real> {
    let bits = rho1.precision();
    let one = Real::one(bits);
    let rr = Real::from_f64(r, bits);
    let ph = phi(params, &rr);
    let r2 = &rr * &rr;
    let x = rho1 / &r2;
    let y = rho2 / &(&ph * &ph);
    if x >= one || y >= one {
        return None;
    }
    let omx = &one - &x;
    let den = &omx * &omx * (&one - &y) * crate::moments::two_pi_sq(bits) * &r2 * &ph;
    Some(Real::from_u64(2, bits) * y.powi(big_j as u64 + 1) / den)
}

/// `Ok(true)` inside `Ω`, `Ok(false)` on the lateral boundary `|z₂| = φ(|z₁|)`.
fn locate(params: &WeightParams, z1: &Complex, z2: &Complex, label: &str) -> Result<bool, KernelError> {
    let r = z1.abs();
    if r >= Real::one(r.precision()) {
        return Err(KernelError::DivergenceRisk(format!("|{label}1| >= 1")));
    }
    let ph = phi(params, &r);
    let r2 = z2.abs();
    // points within a few ulps of the boundary count as boundary points
    let slack = &ph * &Real::from_f64(2f64.powi(8 - r.precision() as i32), r.precision());
    if r2 > &ph + &slack {
        return Err(KernelError::DivergenceRisk(format!("|{label}2| > phi(|{label}1|): point is outside the domain")));
    }
    Ok(r2 < &ph - &slack)
}

/// `S((z₁,z₂),(t₁,t₂))` to absolute accuracy `tol`.
///
/// At least one point must be interior; the other may lie on the lateral
/// boundary, which is what integrating `S(z, ·)` against data on `bΩ` needs.
pub fn szego_kernel_eval(kernel: &SzegoKernel, z: (&Complex, &Complex), t: (&Complex, &Complex), tol: f64) -> Result<SzegoEval, KernelError> {
    let params = &kernel.params;
    let z_inside = locate(params, z.0, z.1, "z")?;
    let t_inside = locate(params, t.0, t.1, "t")?;
    if !(z_inside || t_inside) {
        return Err(KernelError::DivergenceRisk("both points lie on the boundary".into()));
    }
    let bits = z.0.re.precision();
    let w2 = z.1 * &t.1.conj();
    let rho1 = (z.0 * &t.0.conj()).abs();
    let rho2 = w2.abs();
    let (rho1_f, rho2_f) = (rho1.to_f64(), rho2.to_f64());

    // Smallest J whose best domination radius meets tol/2.
    let r0 = rho1_f.sqrt();
    let ln_goal = (tol / 2.0).ln();
    let mut choice: Option<(u32, f64)> = None;
    if rho2.is_zero() {
        choice = Some((0, 0.0));
    } else {
        'outer: for big_j in 0..kernel.tables.len() as u32 {
            let mut best: Option<(f64, f64)> = None;
            for k in 1..256 {
                let r = r0 + (1.0 - r0) * k as f64 / 256.0;
                let l = j_tail_ln_f64(params, rho1_f, rho2_f, r, big_j);
                if best.is_none_or(|(bl, _)| l < bl) {
                    best = Some((l, r));
                }
            }
            if let Some((l, r)) = best {
                if l < ln_goal {
                    choice = Some((big_j, r));
                    break 'outer;
                }
            }
        }
    }
    let Some((big_j, radius)) = choice else {
        return Err(KernelError::InsufficientInflation { j_max: kernel.tables.len().saturating_sub(1) as u32 });
    };
    let j_tail = if rho2.is_zero() {
        Real::zero(bits)
    } else {
        j_tail_bound(params, &rho1, &rho2, radius, big_j).ok_or_else(|| KernelError::DivergenceRisk("no domination radius available".into()))?
    };

    let mut value = Complex::zero(bits);
    let mut tail = j_tail;
    let mut n_truncation = Vec::new();
    let mut w2_pow = Complex::one(bits);
    let mut rho2_pow = Real::one(bits);
    let per_j = tol / (2.0 * (big_j as f64 + 1.0));
    for j in 0..=big_j {
        let scale = rho2_pow.to_f64();
        let tol_j = if scale > 0.0 { per_j / scale } else { f64::MAX };
        let b = series_sum(&kernel.tables[j as usize], 0, z.0, t.0, tol_j.min(1e300))?;
        value += &(&w2_pow * &b.value);
        tail += &(&rho2_pow * &b.tail_bound);
        n_truncation.push(b.last_term);
        w2_pow = &w2_pow * &w2;
        rho2_pow = &rho2_pow * &rho2;
    }
    Ok(SzegoEval { value, tail_bound: tail, n_truncation, j_truncation: big_j, domination_radius: radius })
}

/// `∫_{bΩ} |z₁ⁿ z₂ʲ|² dσ` through the boundary parametrisation
/// `z₂ = e^{iθ}φ(|z₁|)`: `2π · 2π ∫₀¹ r^{2n+1} φ^{2j+1} √(1+|∇φ|²) dr`, in `r`.
pub fn boundary_monomial_norm_sq(params: &WeightParams, n: u32, j: u32, ctx: &PrecCtx) -> Result<QuadResult, KernelError> {
    let bits = ctx.bits();
    let one = Real::one(bits);
    let f = |r: &Real| -> Real {
        let ph = phi(params, r);
        if ph.is_zero() {
            return Real::zero(bits);
        }
        let surface = &ph * &(&one + &grad_norm_sq(params, r)).sqrt();
        r.powi(2 * n as u64 + 1) * ph.powi(2 * j as u64) * surface
    };
    let q = integrate_finite(f, &Real::zero(bits), &one, ctx).map_err(MomentError::from)?;
    let tp = Real::pi(bits) * Real::from_u64(2, bits);
    let c = &tp * &tp;
    Ok(QuadResult { value: &q.value * &c, err_estimate: &q.err_estimate * &c, levels_used: q.levels_used })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InflationRow {
    pub n: u32,
    pub j: u32,
    pub boundary: Real,
    pub table: Real,
    pub rel_err: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InflationReport {
    /// The constant `c_j` the table moments were normalised with.
    pub normalization: String,
    pub tolerance: f64,
    pub rows: Vec<InflationRow>,
    pub verdict: Verdict,
}

/// Compares `‖z₁ⁿz₂ʲ‖²_{L²(bΩ)}` with `m_{j,n}` computed with constant `c_j`.
///
/// `tables[j]` must hold `m_{j,·}` under the standard `c_j = 2π`;
/// `normalization` rescales them by `c_j/(2π)` (pass `2π` for the standard check).
pub fn inflation_consistency_check(
    params: &WeightParams,
    grid: &[(u32, u32)],
    tables: &[MomentTable],
    normalization: &Real,
    tolerance: f64,
    ctx: &PrecCtx,
) -> Result<InflationReport, KernelError> {
    let bits = ctx.bits();
    let rescale = normalization / &(Real::pi(bits) * Real::from_u64(2, bits));
    let rows = grid
        .iter()
        .map(|&(n, j)| {
            let table = tables.get(j as usize).filter(|t| t.j == j);
            let m = table.and_then(|t| t.get(n)).ok_or(KernelError::TruncationFailure { j, needed: n, available: table.and_then(|t| t.n_max()) })?;
            let m = m * &rescale;
            let boundary = boundary_monomial_norm_sq(params, n, j, ctx)?.value;
            let rel_err = Real::rel_diff(&boundary, &m).to_f64();
            let verdict = if rel_err <= tolerance { Verdict::Pass } else { Verdict::Fail };
            Ok(InflationRow { n, j, boundary, table: m, rel_err, verdict })
        })
        .collect::<Result<Vec<_>, KernelError>>()?;
    let verdict = if rows.iter().all(|r| r.verdict == Verdict::Pass) { Verdict::Pass } else { Verdict::Fail };
    Ok(InflationReport { normalization: normalization.to_decimal_string(), tolerance, rows, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::moment_table;

    fn ctx() -> PrecCtx {
        PrecCtx::new(256, 1e-30, 12).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex {
        Complex::from_f64(re, im, 256)
    }

    #[test]
    fn origin_gives_first_coefficient() {
        let table = moment_table(&WeightParams::standard(), 0, 4, &ctx()).unwrap();
        let s = KernelSeries::new(table.clone());
        let v = bergman_kernel_eval(&s, &c(0.0, 0.0), &c(0.3, -0.2), 1e-30).unwrap();
        assert_eq!(v.value, Complex::from_real(table.get(0).unwrap().recip()));
        assert!(v.tail_bound.is_zero());
    }

    #[test]
    fn hermitian_partial_sums() {
        let table = moment_table(&WeightParams::standard(), 1, 120, &ctx()).unwrap();
        let s = KernelSeries::new(table);
        let (z, t) = (c(0.31, 0.42), c(-0.5, 0.17));
        let a = bergman_kernel_eval(&s, &z, &t, 1e-25).unwrap();
        let b = bergman_kernel_eval(&s, &t, &z, 1e-25).unwrap();
        assert_eq!(a.value, b.value.conj());
        assert_eq!(a.last_term, b.last_term);
    }

    #[test]
    fn truncation_and_divergence_errors() {
        let table = moment_table(&WeightParams::standard(), 0, 3, &ctx()).unwrap();
        let s = KernelSeries::new(table);
        assert!(matches!(bergman_kernel_eval(&s, &c(0.9, 0.0), &c(0.9, 0.0), 1e-30), Err(KernelError::TruncationFailure { .. })));
        assert!(matches!(bergman_kernel_eval(&s, &c(1.0, 0.0), &c(1.0, 0.0), 1e-3), Err(KernelError::DivergenceRisk(_))));
    }

    #[test]
    fn halving_tolerance_stays_within_tail() {
        let table = moment_table(&WeightParams::standard(), 0, 200, &ctx()).unwrap();
        let s = KernelSeries::new(table);
        let (z, t) = (c(0.4, 0.1), c(0.35, -0.3));
        let mut tol = 1e-6;
        let mut prev = bergman_kernel_eval(&s, &z, &t, tol).unwrap();
        for _ in 0..20 {
            tol /= 2.0;
            let next = bergman_kernel_eval(&s, &z, &t, tol).unwrap();
            assert!((&next.value - &prev.value).abs() <= prev.tail_bound);
            prev = next;
        }
    }

    #[test]
    fn szego_reduces_to_b0_when_z2_vanishes() {
        let k = SzegoKernel::build(&WeightParams::standard(), 3, 150, &ctx(), None).unwrap();
        let (z1, t1, t2) = (c(0.2, 0.3), c(-0.1, 0.4), c(0.01, 0.0));
        let s = szego_kernel_eval(&k, (&z1, &c(0.0, 0.0)), (&t1, &t2), 1e-25).unwrap();
        let b = bergman_kernel_eval(&KernelSeries::new(k.tables[0].clone()), &z1, &t1, 1e-25 / 2.0).unwrap();
        assert_eq!(s.value, b.value);
        assert_eq!(s.j_truncation, 0);
    }

    #[test]
    fn szego_rejects_exterior_points() {
        let k = SzegoKernel::build(&WeightParams::standard(), 1, 20, &ctx(), None).unwrap();
        let z1 = c(0.5, 0.0);
        let z2 = c(0.5, 0.0);
        assert!(matches!(szego_kernel_eval(&k, (&z1, &z2), (&z1, &c(0.0, 0.0)), 1e-10), Err(KernelError::DivergenceRisk(_))));
        let on = Complex::from_real(phi(&k.params, &z1.re));
        assert!(matches!(szego_kernel_eval(&k, (&z1, &on), (&z1, &on), 1e-10), Err(KernelError::DivergenceRisk(_))));
    }

    #[test]
    fn inflation_empty_grid_passes() {
        let r = inflation_consistency_check(&WeightParams::standard(), &[], &[], &Real::one(256), 1e-10, &ctx()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.rows.is_empty());
    }
}
