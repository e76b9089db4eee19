//! Moments `(2π)² ∫₀¹ r^{β+1} w(r) dr` of radial weights and their tables.
//!
//! Integration runs in `s = 1/(1-r²)`, where `r dr = ds/(2s²)` and
//! `r^β = (1 - 1/s)^{β/2}`. The integrand is split at its maximum, located in
//! double precision, so each piece is monotone-ish and well resolved.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::quad::{integrate_finite, integrate_semi_infinite, PrecCtx, QuadError, QuadResult};
use crate::real::Real;
use crate::weight::{RadialWeight, RadialWeightProfile, WeightParams};

/// Bumped whenever a change can alter cached moment values.
pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MomentError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("moment table for {key} is not log-convex at n = {n}")]
    LogConvexityViolation { key: String, n: usize },
    #[error("cache file {path} failed integrity check: {detail}")]
    CacheIntegrity { path: PathBuf, detail: String },
    #[error("cache i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("beta must be finite and >= 0, got {0}")]
    BadBeta(f64),
}

/// `(2π)²`.
pub fn two_pi_sq(bits: usize) -> Real {
    let tp = Real::pi(bits) * Real::from_u64(2, bits);
    &tp * &tp
}

/// Logarithm of the `s`-integrand in double precision.
fn log_integrand(w: &dyn RadialWeight, beta: f64, s: f64) -> f64 {
    let radial = if beta == 0.0 { 0.0 } else { 0.5 * beta * (-1.0 / s).ln_1p() };
    radial + w.ln_eval_s_f64(s) - (2.0 * s * s).ln()
}

/// Peak position of the integrand and the distance beyond it over which it drops by `e`.
fn locate_peak(w: &dyn RadialWeight, beta: f64) -> (f64, f64) {
    let l = |u: f64| log_integrand(w, beta, 1.0 + u.exp());
    let (mut lo, mut hi) = (-28.0f64, 25.0f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        let (la, lb) = (l(a), l(b));
        if la.is_nan() || lb.is_nan() {
            break;
        }
        if la < lb {
            lo = a;
        } else {
            hi = b;
        }
    }
    let u = 0.5 * (lo + hi);
    let peak = if u < -20.0 { 1.0 } else { 1.0 + u.exp() };
    let top = log_integrand(w, beta, peak.max(1.0 + 1e-12));
    let mut d = (peak * 1e-3).max(1e-6);
    let mut steps = 0;
    while log_integrand(w, beta, peak + d) > top - 1.0 && steps < 200 {
        d *= 1.5;
        steps += 1;
    }
    (peak, d)
}

/// `(2π)² ∫₀¹ r^{β+1} w(r) dr`.
pub fn moment(w: &dyn RadialWeight, beta: &Real, ctx: &PrecCtx) -> Result<QuadResult, MomentError> {
    let bits = ctx.bits();
    let beta_f = beta.to_f64();
    if !(beta_f.is_finite() && beta_f >= 0.0) {
        return Err(MomentError::BadBeta(beta_f));
    }
    let half_beta = beta / &Real::from_u64(2, bits);
    let one = Real::one(bits);
    let two = Real::from_u64(2, bits);
    let integrand = |s: &Real| -> Real {
        let base = w.eval_s(s) / (&two * s * s);
        if beta.is_zero() {
            base
        } else {
            (&one - &s.recip()).powf(&half_beta) * base
        }
    };
    let (peak, scale) = locate_peak(w, beta_f);
    let peak_r = Real::from_f64(peak, bits);
    let tail = integrate_semi_infinite(integrand, &peak_r, scale, ctx)?;
    let total = if peak > 1.0 + 1e-9 { integrate_finite(integrand, &one, &peak_r, ctx)?.combine(&tail) } else { tail };
    let c = two_pi_sq(bits);
    Ok(QuadResult { value: &total.value * &c, err_estimate: &total.err_estimate * &c, levels_used: total.levels_used })
}

/// `G(q, β) = (2π)² ∫₀¹ r^{β+1} φ^q √(1 + |∇φ|²) dr`.
pub fn generalized_moment(params: &WeightParams, phi_power: u32, beta: &Real, ctx: &PrecCtx) -> Result<QuadResult, MomentError> {
    moment(&RadialWeightProfile::with_power(*params, phi_power), beta, ctx)
}

/// `m_{j,n} = G(2j + 1, 2n)`.
pub fn moment_jn(params: &WeightParams, j: u32, n: u32, ctx: &PrecCtx) -> Result<QuadResult, MomentError> {
    generalized_moment(params, 2 * j + 1, &Real::from_u64(2 * n as u64, ctx.bits()), ctx)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentEntry {
    pub n: u32,
    #[serde(with = "crate::real::exact")]
    pub value: Real,
    #[serde(with = "crate::real::exact")]
    pub err_bound: Real,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentTable {
    pub weight_key: String,
    pub j: u32,
    pub params: Option<WeightParams>,
    pub precision: PrecCtx,
    pub entries: Vec<MomentEntry>,
}

impl MomentTable {
    pub fn n_max(&self) -> Option<u32> {
        self.entries.last().map(|e| e.n)
    }

    pub fn get(&self, n: u32) -> Option<&Real> {
        self.entries.get(n as usize).map(|e| &e.value)
    }

    /// `m_{n+1}/m_n`.
    pub fn ratio(&self, n: u32) -> Option<Real> {
        Some(self.get(n + 1)? / self.get(n)?)
    }

    /// `m_n² <= m_{n-1} m_{n+1}` up to the relative quadrature tolerance.
    pub fn check_log_convexity(&self) -> Result<(), MomentError> {
        let bits = self.precision.bits();
        let slack = Real::one(bits) + Real::from_f64(16.0 * self.precision.target_rel_err, bits);
        for n in 1..self.entries.len().saturating_sub(1) {
            let (a, b, c) = (&self.entries[n - 1].value, &self.entries[n].value, &self.entries[n + 1].value);
            if !b.is_positive() || b * b > a * c * &slack {
                return Err(MomentError::LogConvexityViolation { key: self.weight_key.clone(), n });
            }
        }
        if self.entries.iter().any(|e| !e.value.is_positive()) {
            return Err(MomentError::LogConvexityViolation { key: self.weight_key.clone(), n: 0 });
        }
        Ok(())
    }

    /// CSV with columns `n, m, err_bound`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "m", "err_bound"])?;
        for e in &self.entries {
            w.write_record([e.n.to_string(), e.value.to_decimal_string(), format!("{:e}", e.err_bound.to_f64())])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn compute_entries(w: &dyn RadialWeight, n_max: u32, ctx: &PrecCtx) -> Result<Vec<MomentEntry>, MomentError> {
    (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let q = moment(w, &Real::from_u64(2 * n as u64, ctx.bits()), ctx)?;
            Ok(MomentEntry { n, value: q.value, err_bound: q.err_estimate })
        })
        .collect()
}

/// Table `n = 0..=n_max` for an arbitrary radial weight.
///
/// On a log-convexity failure the table is recomputed once at doubled precision.
pub fn moment_table_for(w: &dyn RadialWeight, j: u32, params: Option<WeightParams>, n_max: u32, ctx: &PrecCtx) -> Result<MomentTable, MomentError> {
    let mut ctx = ctx.clone();
    for attempt in 0..2 {
        let table = MomentTable { weight_key: w.key(), j, params, precision: ctx.clone(), entries: compute_entries(w, n_max, &ctx)? };
        match table.check_log_convexity() {
            Ok(()) => return Ok(table),
            Err(e) if attempt == 1 => return Err(e),
            Err(_) => {
                log::warn!("log-convexity failed for {}; escalating to {} bits", w.key(), 2 * ctx.bits());
                ctx.significand_bits *= 2;
            }
        }
    }
    unreachable!("loop returns on the second attempt")
}

/// `m_{j,n}` for `n = 0..=n_max`.
pub fn moment_table(params: &WeightParams, j: u32, n_max: u32, ctx: &PrecCtx) -> Result<MomentTable, MomentError> {
    moment_table_for(&RadialWeightProfile::for_index(*params, j), j, Some(*params), n_max, ctx)
}

/// On-disk moment cache: one JSON file per `(weight, j, precision, version)`.
#[derive(Clone, Debug)]
pub struct MomentCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    key: String,
    version: u32,
    sha256: String,
    table: serde_json::Value,
}

fn digest(table: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(table.to_string().as_bytes()))
}

impl MomentCache {
    /// Creates the directory on demand.
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, MomentError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| MomentError::Io { path: dir.clone(), source })?;
        Ok(MomentCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(weight_key: &str, j: u32, ctx: &PrecCtx) -> String {
        format!(
            "{weight_key}|j={j}|bits={}|tol={:e}|levels={}|v{}|{}",
            ctx.significand_bits,
            ctx.target_rel_err,
            ctx.max_refinement_levels,
            CACHE_FORMAT_VERSION,
            env!("CARGO_PKG_VERSION")
        )
    }

    pub fn path_for(&self, weight_key: &str, j: u32, ctx: &PrecCtx) -> PathBuf {
        let h = hex::encode(Sha256::digest(Self::key(weight_key, j, ctx).as_bytes()));
        self.dir.join(format!("moments-{}.json", &h[..20]))
    }

    /// A cached table covering at least `n_max`, if present.
    pub fn load(&self, weight_key: &str, j: u32, n_max: u32, ctx: &PrecCtx) -> Result<Option<MomentTable>, MomentError> {
        let path = self.path_for(weight_key, j, ctx);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(MomentError::Io { path, source }),
        };
        let bad = |detail: String| MomentError::CacheIntegrity { path: path.clone(), detail };
        let file: CacheFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if file.key != Self::key(weight_key, j, ctx) || file.version != CACHE_FORMAT_VERSION {
            return Err(bad("key mismatch".into()));
        }
        if digest(&file.table) != file.sha256 {
            return Err(bad("sha256 mismatch".into()));
        }
        let table: MomentTable = serde_json::from_value(file.table).map_err(|e| bad(e.to_string()))?;
        if table.n_max().is_none_or(|m| m < n_max) {
            return Ok(None);
        }
        let mut table = table;
        table.entries.truncate(n_max as usize + 1);
        Ok(Some(table))
    }

    /// Atomic write: temp file in the same directory, then rename.
    pub fn store(&self, table: &MomentTable) -> Result<PathBuf, MomentError> {
        let path = self.path_for(&table.weight_key, table.j, &table.precision);
        let value = serde_json::to_value(table).expect("table serialises");
        let file =
            CacheFile { key: Self::key(&table.weight_key, table.j, &table.precision), version: CACHE_FORMAT_VERSION, sha256: digest(&value), table: value };
        let io = |source| MomentError::Io { path: path.clone(), source };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(serde_json::to_string_pretty(&file).expect("cache serialises").as_bytes()).map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(path)
    }

    /// Cached table or a freshly computed (and then stored) one.
    pub fn table_for(&self, w: &dyn RadialWeight, j: u32, params: Option<WeightParams>, n_max: u32, ctx: &PrecCtx) -> Result<MomentTable, MomentError> {
        if let Some(t) = self.load(&w.key(), j, n_max, ctx)? {
            return Ok(t);
        }
        let t = moment_table_for(w, j, params, n_max, ctx)?;
        if t.precision == *ctx {
            self.store(&t)?;
        }
        Ok(t)
    }

    pub fn table(&self, params: &WeightParams, j: u32, n_max: u32, ctx: &PrecCtx) -> Result<MomentTable, MomentError> {
        self.table_for(&RadialWeightProfile::for_index(*params, j), j, Some(*params), n_max, ctx)
    }
}
