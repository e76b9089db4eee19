//! Subcommand drivers and report rendering for the `szego` binary.
//!
//! Every driver returns an [`Outcome`] holding the structured result plus its
//! CSV and markdown renderings; [`execute`] adds provenance and picks a format.
//! Exit codes: 0 pass, 1 a check failed (or a computation could not finish),
//! 2 configuration error.

use std::fmt::Write as _;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{OutputFormat, RunConfig};
use crate::irregularity::{
    duality_symmetry_check, irregularity_scan, DualityCheck, GrowthVerdict, IrregularityReport, LpExponent, MomentMemo, ScanWeight, VerdictRule,
};
use crate::kernel::{
    bergman_kernel_eval, inflation_consistency_check, szego_kernel_eval, InflationReport, KernelError, KernelSeries, KernelValue, SzegoEval, SzegoKernel,
};
use crate::moments::{moment_table, moment_table_for, MomentCache, MomentError, MomentTable};
use crate::projection::{canned_f_set, lift_norm_identity, lift_projection_identity, LiftNormReport, LiftProjectionReport, ProjectionError};
use crate::real::{Complex, Real};
use crate::symbolic::{dz_certify, DzCertificate, SymbolicError};
use crate::weight::{pseudoconvexity_scan, PseudoconvexityScan, Verdict, DEFAULT_S_CAP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const PSEUDOCONVEXITY_TOLERANCE: f64 = 1e-25;
pub const INFLATION_TOLERANCE: f64 = 1e-10;
pub const LIFT_NORM_TOLERANCE: f64 = 1e-12;
pub const LIFT_PROJECTION_TOLERANCE: f64 = 1e-10;
pub const Z2_TOLERANCE: f64 = 1e-20;
/// `|R_n(2) - 1|` allowed by the irregularity command.
pub const HOLDER_EQUALITY_TOLERANCE: f64 = 1e-20;

pub const DEFAULT_SCAN_N: &[u32] = &[16, 64, 256, 1024, 4096];
pub const DEFAULT_MOMENT_N: u32 = 32;
pub const DEFAULT_KERNEL_N: u32 = 128;
pub const DEFAULT_SZEGO_J: u32 = 16;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Compute(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Compute(_) => EXIT_CHECK_FAILED,
        }
    }
}

macro_rules! compute_error {
    ($($t:ty),*) => {$(
        impl From<$t> for RunError {
            fn from(e: $t) -> Self {
                RunError::Compute(e.to_string())
            }
        }
    )*};
}
compute_error!(MomentError, KernelError, ProjectionError, crate::irregularity::IrregularityError, std::io::Error, csv::Error);

impl From<SymbolicError> for RunError {
    fn from(e: SymbolicError) -> Self {
        match e {
            SymbolicError::UnsupportedParams { .. } => RunError::Config(e.to_string()),
            other => RunError::Compute(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pseudoconvexity,
    DzCertify,
    Moments,
    KernelEval,
    IdentityChecks,
    Irregularity,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pseudoconvexity => "pseudoconvexity",
            Command::DzCertify => "dz-certify",
            Command::Moments => "moments",
            Command::KernelEval => "kernel-eval",
            Command::IdentityChecks => "identity-checks",
            Command::Irregularity => "irregularity",
            Command::Report => "report",
        }
    }
}

pub struct Outcome {
    pub pass: bool,
    pub result: Value,
    pub csv: String,
    pub markdown: String,
}

impl Outcome {
    fn new<T: Serialize>(pass: bool, result: &T, csv: String, markdown: String) -> Self {
        Outcome { pass, result: serde_json::to_value(result).expect("reports serialise"), csv, markdown }
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
    }
}

fn sci(x: &Real) -> String {
    format!("{:.6e}", x.to_f64())
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Compute(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn md_table(out: &mut String, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|c| c.replace('|', "\\|")).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out.push('\n');
}

/// `m_{j,·}` through the cache when one is configured.
fn table(c: &RunConfig, j: u32, n_max: u32) -> Result<MomentTable, RunError> {
    Ok(match &c.cache_dir {
        Some(dir) => MomentCache::new(dir)?.table(&c.params, j, n_max, &c.precision)?,
        None => moment_table(&c.params, j, n_max, &c.precision)?,
    })
}

fn tables(c: &RunConfig, j_max: u32, n_max: u32) -> Result<Vec<MomentTable>, RunError> {
    (0..=j_max).map(|j| table(c, j, n_max)).collect()
}

pub fn pseudoconvexity(c: &RunConfig) -> PseudoconvexityScan {
    pseudoconvexity_scan(&c.params, c.options.grid, DEFAULT_S_CAP, PSEUDOCONVEXITY_TOLERANCE, c.precision.bits())
}

fn pseudoconvexity_md(out: &mut String, s: &PseudoconvexityScan) {
    let _ = writeln!(
        out,
        "Minimum of Δ(−log φ) over {} grid points (s up to {:e}): {} at r = {:.6}. Tolerance −{:e}. **{}**\n",
        s.grid_size,
        s.s_cap,
        sci(&s.min_value),
        s.min_at_r,
        s.tolerance,
        word(s.verdict)
    );
}

pub fn cmd_pseudoconvexity(c: &RunConfig) -> Result<Outcome, RunError> {
    let s = pseudoconvexity(c);
    let csv = csv_string(
        &["A", "B", "alpha", "grid", "min", "min_at_r", "min_at_s", "verdict"],
        [vec![
            c.params.a.to_string(),
            c.params.b.to_string(),
            c.params.alpha.to_string(),
            s.grid_size.to_string(),
            s.min_value.to_decimal_string(),
            s.min_at_r.to_string(),
            s.min_at_s.to_string(),
            word(s.verdict).into(),
        ]],
    )?;
    let mut md = format!("# Pseudoconvexity ({})\n\n", c.params.label());
    pseudoconvexity_md(&mut md, &s);
    Ok(Outcome::new(s.verdict == Verdict::Pass, &s, csv, md))
}

fn dz_rows(cert: &DzCertificate) -> Vec<Vec<String>> {
    cert.orders
        .iter()
        .map(|o| {
            vec![
                o.structure.order.to_string(),
                o.structure.leading_sign.to_string(),
                o.tail.threshold.to_string(),
                word(o.limit.verdict).into(),
                sci(&o.sampled_min),
                o.samples.to_string(),
            ]
        })
        .collect()
}

const DZ_HEADER: [&str; 6] = ["order", "leading_sign", "s_n", "limit", "sampled_min", "samples"];

fn dz_md(out: &mut String, cert: &DzCertificate) {
    let _ = writeln!(
        out,
        "Sign law (−1)ⁿ dⁿν/dsⁿ ≥ 0 for s ≥ s_n, orders 0..={}. Radicand nonnegative: {}. **{}**\n",
        cert.max_order,
        cert.radicand_nonnegative,
        word(verdict(cert.valid))
    );
    md_table(out, &DZ_HEADER, dz_rows(cert));
    let _ = writeln!(out, "{}\n", cert.chain_rule_note);
}

pub fn cmd_dz_certify(c: &RunConfig) -> Result<Outcome, RunError> {
    let cert = dz_certify(&c.params, c.options.order, c.options.samples)?;
    let csv = csv_string(&DZ_HEADER, dz_rows(&cert))?;
    let mut md = format!("# Derivative sign certificate ({})\n\n", c.params.label());
    dz_md(&mut md, &cert);
    Ok(Outcome::new(cert.valid, &cert, csv, md))
}

pub fn cmd_moments(c: &RunConfig) -> Result<Outcome, RunError> {
    let n_max = c.options.n.as_ref().and_then(|n| n.last().copied()).unwrap_or(DEFAULT_MOMENT_N);
    let j = c.options.j.unwrap_or(0);
    let table = match c.options.weight.scan_weight(&c.params) {
        ScanWeight::Hartogs { .. } => table(c, j, n_max)?,
        w @ ScanWeight::Polynomial { .. } => moment_table_for(w.radial().as_ref(), 0, None, n_max, &c.precision)?,
    };
    let convex = table.check_log_convexity().is_ok();
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    let mut md = format!("# Moments `{}` (j = {})\n\nLog-convex: {}\n\n", table.weight_key, table.j, convex);
    md_table(&mut md, &["n", "m", "err_bound"], table.entries.iter().map(|e| vec![e.n.to_string(), sci(&e.value), format!("{:.1e}", e.err_bound.to_f64())]));
    Ok(Outcome::new(convex, &table, String::from_utf8(buf).expect("utf-8"), md))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum KernelEvalResult {
    Bergman { j: u32, z: Complex, t: Complex, eval: KernelValue },
    Szego { z: (Complex, Complex), t: (Complex, Complex), j_max: u32, eval: SzegoEval },
}

pub fn cmd_kernel_eval(c: &RunConfig) -> Result<Outcome, RunError> {
    let bits = c.precision.bits();
    let pt = |xs: &[(f64, f64)]| xs.iter().map(|&(re, im)| Complex::from_f64(re, im, bits)).collect::<Vec<_>>();
    let (z, t) = (pt(&c.options.z), pt(&c.options.t));
    let n_max = c.options.n.as_ref().and_then(|n| n.last().copied()).unwrap_or(DEFAULT_KERNEL_N);
    let tol = c.precision.target_rel_err;
    let res = match (z.as_slice(), t.as_slice()) {
        ([z], [t]) => {
            let j = c.options.j.unwrap_or(0);
            let eval = bergman_kernel_eval(&KernelSeries::new(table(c, j, n_max)?), z, t, tol)?;
            KernelEvalResult::Bergman { j, z: z.clone(), t: t.clone(), eval }
        }
        ([z1, z2], [t1, t2]) => {
            let j_max = c.options.j.unwrap_or(DEFAULT_SZEGO_J);
            let kernel = SzegoKernel { params: c.params, tables: tables(c, j_max, n_max)? };
            let eval = szego_kernel_eval(&kernel, (z1, z2), (t1, t2), tol)?;
            KernelEvalResult::Szego { z: (z1.clone(), z2.clone()), t: (t1.clone(), t2.clone()), j_max, eval }
        }
        _ => return Err(RunError::Config("kernel-eval needs --z and --t with one point each (disc) or two each (domain)".into())),
    };
    let (value, bound) = match &res {
        KernelEvalResult::Bergman { eval, .. } => (&eval.value, &eval.tail_bound),
        KernelEvalResult::Szego { eval, .. } => (&eval.value, &eval.tail_bound),
    };
    let row = vec![value.re.to_decimal_string(), value.im.to_decimal_string(), format!("{:e}", bound.to_f64())];
    let csv = csv_string(&["re", "im", "tail_bound"], [row.clone()])?;
    let mut md = String::from("# Kernel value\n\n");
    md_table(&mut md, &["re", "im", "tail_bound"], [row]);
    Ok(Outcome::new(true, &res, csv, md))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiftNormRow {
    pub f: String,
    pub report: LiftNormReport,
    pub tolerance: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiftProjectionRow {
    pub f: String,
    pub report: LiftProjectionReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityChecks {
    pub inflation: InflationReport,
    pub lift_norm: Vec<LiftNormRow>,
    pub lift_projection: Vec<LiftProjectionRow>,
    pub verdict: Verdict,
}

/// A user tolerance above a pinned one loosens the check; it never tightens it.
fn loosened(pinned: f64, c: &RunConfig) -> f64 {
    pinned.max(c.precision.target_rel_err)
}

pub fn identity_checks(c: &RunConfig) -> Result<IdentityChecks, RunError> {
    let bits = c.precision.bits();
    let t = tables(c, 4, 8)?;
    let grid: Vec<(u32, u32)> = (0..=4).flat_map(|j| (0..=8).map(move |n| (n, j))).collect();
    let two_pi = Real::pi(bits) * Real::from_u64(2, bits);
    let inflation = inflation_consistency_check(&c.params, &grid, &t, &two_pi, loosened(INFLATION_TOLERANCE, c), &c.precision)?;
    let fs = canned_f_set(bits);
    let norm_tol = loosened(LIFT_NORM_TOLERANCE, c);
    let mut lift_norm = Vec::new();
    for p in [2u64, 4] {
        for (label, f) in &fs {
            let report = lift_norm_identity(&c.params, f, &Real::from_u64(p, bits), &c.precision)?;
            let verdict = verdict(report.rel_diff <= norm_tol);
            lift_norm.push(LiftNormRow { f: label.clone(), report, tolerance: norm_tol, verdict });
        }
    }
    let lift_projection = fs
        .iter()
        .map(|(label, f)| {
            let report = lift_projection_identity(&c.params, f, &t, loosened(LIFT_PROJECTION_TOLERANCE, c), loosened(Z2_TOLERANCE, c), &c.precision)?;
            Ok(LiftProjectionRow { f: label.clone(), report })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let ok = inflation.verdict == Verdict::Pass
        && lift_norm.iter().all(|r| r.verdict == Verdict::Pass)
        && lift_projection.iter().all(|r| r.report.verdict == Verdict::Pass);
    Ok(IdentityChecks { inflation, lift_norm, lift_projection, verdict: verdict(ok) })
}

const INFLATION_HEADER: [&str; 6] = ["n", "j", "boundary", "table", "rel_err", "verdict"];

fn inflation_rows(r: &InflationReport) -> Vec<Vec<String>> {
    r.rows
        .iter()
        .map(|x| {
            vec![
                x.n.to_string(),
                x.j.to_string(),
                x.boundary.to_decimal_string(),
                x.table.to_decimal_string(),
                format!("{:.3e}", x.rel_err),
                word(x.verdict).into(),
            ]
        })
        .collect()
}

fn identities_md(out: &mut String, ic: &IdentityChecks) {
    let inf = &ic.inflation;
    let worst = inf.rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let _ = writeln!(
        out,
        "Boundary norms ‖z₁ⁿz₂ʲ‖² against inflated moments m_(j,n), c_j = {}, {} pairs, worst relative error {:.3e} (tolerance {:e}). **{}**\n",
        inf.normalization,
        inf.rows.len(),
        worst,
        inf.tolerance,
        word(inf.verdict)
    );
    out.push_str("Lift norm identity ∫|F|^p dσ = 2π‖f‖^p:\n\n");
    md_table(
        out,
        &["f", "p", "boundary", "disc", "rel_diff", "verdict"],
        ic.lift_norm.iter().map(|r| {
            vec![
                r.f.clone(),
                r.report.p.to_string(),
                sci(&r.report.boundary_side),
                sci(&r.report.disc_side),
                format!("{:.3e}", r.report.rel_diff),
                word(r.verdict).into(),
            ]
        }),
    );
    out.push_str("Szegő projection of lifts against B₀:\n\n");
    md_table(
        out,
        &["f", "max rel err", "max z2 coefficient", "verdict"],
        ic.lift_projection
            .iter()
            .map(|r| vec![r.f.clone(), format!("{:.3e}", r.report.max_rel_err), sci(&r.report.max_z2_coefficient), word(r.report.verdict).into()]),
    );
    if let Some(r) = ic.lift_projection.first() {
        let _ = writeln!(out, "{}\n", r.report.convention_note);
    }
}

pub fn cmd_identity_checks(c: &RunConfig) -> Result<Outcome, RunError> {
    let ic = identity_checks(c)?;
    let csv = csv_string(&INFLATION_HEADER, inflation_rows(&ic.inflation))?;
    let mut md = format!("# Identity checks ({})\n\n", c.params.label());
    identities_md(&mut md, &ic);
    Ok(Outcome::new(ic.verdict == Verdict::Pass, &ic, csv, md))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRun {
    pub weight: ScanWeight,
    /// Contrast mode expects plateaus instead of growth.
    pub contrast: bool,
    pub scans: Vec<IrregularityReport>,
    pub duality: Vec<DualityCheck>,
    pub verdict: Verdict,
}

fn scan_ok(s: &IrregularityReport, contrast: bool) -> bool {
    if !s.holder_ok {
        return false;
    }
    if s.p.is_two() {
        let tol = Real::from_f64(HOLDER_EQUALITY_TOLERANCE, 64);
        return s.r_values.iter().all(|r| (r - &Real::one(r.precision())).abs() <= tol);
    }
    let want = if contrast { GrowthVerdict::BoundedPlateau } else { GrowthVerdict::UnboundedTrend };
    s.verdict == want
}

pub fn irregularity(c: &RunConfig) -> Result<ScanRun, RunError> {
    let weight = c.options.weight.scan_weight(&c.params);
    let ps = c.options.p.clone().unwrap_or_else(|| ["4/3", "2", "4"].iter().map(|p| p.parse().expect("literal")).collect());
    let ns = c.options.n.clone().unwrap_or_else(|| DEFAULT_SCAN_N.to_vec());
    let memo = MomentMemo::new();
    let rule = VerdictRule::default();
    let scans = ps.iter().map(|p| irregularity_scan(&weight, p, &ns, &rule, &c.precision, &memo)).collect::<Result<Vec<_>, _>>()?;
    let w = weight.radial();
    let last = *ns.last().expect("nonempty");
    let mut seen: Vec<LpExponent> = Vec::new();
    let mut duality = Vec::new();
    for p in ps.iter().filter(|p| !p.is_two()) {
        if seen.contains(&p.conjugate()) {
            continue;
        }
        seen.push(p.clone());
        duality.push(duality_symmetry_check(w.as_ref(), p, last, &c.precision, &memo)?);
    }
    let contrast = c.options.weight.is_contrast();
    let ok = scans.iter().all(|s| scan_ok(s, contrast)) && duality.iter().all(|d| d.pass);
    Ok(ScanRun { weight, contrast, scans, duality, verdict: verdict(ok) })
}

fn scan_rows(run: &ScanRun) -> Vec<Vec<String>> {
    run.scans
        .iter()
        .flat_map(|s| {
            s.n_list.iter().zip(&s.r_values).zip(&s.log_r).map(move |((n, r), l)| {
                vec![s.p.to_string(), n.to_string(), r.to_decimal_string(), format!("{l:.17e}"), format!("{:.17e}", (*n as f64).sqrt())]
            })
        })
        .collect()
}

fn scan_md(out: &mut String, run: &ScanRun) {
    let mode = if run.contrast { "contrast weight, plateaus expected" } else { "growth expected for p ≠ 2" };
    let _ = writeln!(out, "Weight {} ({mode}).\n", run.weight.label());
    for s in &run.scans {
        let predicted = s.predicted_slope.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(
            out,
            "p = {} (p′ = {}): fitted slope of log R_n against √n {:.6}, endpoint log R_n/√n {:.6}, predicted limit {predicted}. {}\n",
            s.p, s.p_conjugate, s.fitted_slope, s.endpoint_slope, s.verdict
        );
        md_table(
            out,
            &["n", "R_n", "log R_n"],
            s.n_list.iter().zip(&s.r_values).zip(&s.log_r).map(|((n, r), l)| vec![n.to_string(), format!("{:.9}", r.to_f64()), format!("{l:.9}")]),
        );
    }
    for d in &run.duality {
        let _ = writeln!(
            out,
            "Duality R_{}({}) = R_{}({}): relative difference {:.3e}. **{}**\n",
            d.n,
            d.p,
            d.n,
            d.p.conjugate(),
            d.rel_diff,
            word(verdict(d.pass))
        );
    }
}

const SCAN_HEADER: [&str; 5] = ["p", "n", "R_n", "log R_n", "sqrt n"];

pub fn cmd_irregularity(c: &RunConfig) -> Result<Outcome, RunError> {
    let run = irregularity(c)?;
    let csv = csv_string(&SCAN_HEADER, scan_rows(&run))?;
    let mut md = String::from("# Lower bounds R_n(p)\n\n");
    scan_md(&mut md, &run);
    let _ = writeln!(md, "**{}**", word(run.verdict));
    Ok(Outcome::new(run.verdict == Verdict::Pass, &run, csv, md))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DzPart {
    Certified { certificate: Box<DzCertificate> },
    Unsupported { reason: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FullReport {
    pub pseudoconvexity: PseudoconvexityScan,
    pub identities: IdentityChecks,
    pub dz: DzPart,
    pub irregularity: ScanRun,
    pub verdict: Verdict,
    pub conclusion: String,
}

pub fn full_report(c: &RunConfig) -> Result<FullReport, RunError> {
    let pc = pseudoconvexity(c);
    let identities = identity_checks(c)?;
    let dz = match dz_certify(&c.params, c.options.order, c.options.samples) {
        Ok(cert) => DzPart::Certified { certificate: Box::new(cert) },
        Err(e @ SymbolicError::UnsupportedParams { .. }) => DzPart::Unsupported { reason: e.to_string() },
        Err(e) => return Err(e.into()),
    };
    let mut scan_cfg = c.clone();
    scan_cfg.options.weight = crate::config::WeightChoice::Hartogs;
    let irregularity = irregularity(&scan_cfg)?;
    let dz_ok = matches!(&dz, DzPart::Certified { certificate } if certificate.valid);
    let ok = pc.verdict == Verdict::Pass && identities.verdict == Verdict::Pass && dz_ok && irregularity.verdict == Verdict::Pass;
    let conclusion = if ok {
        "Every sub-check passed. The domain is pseudoconvex and the inflated moments reproduce the boundary norms. \
The lift identities hold and the derivative sign law is certified. R_n(2) = 1 while R_n(p) grows for each tested p ≠ 2, \
consistent with the Szegő projection being L^p-bounded only at p = 2."
    } else {
        "At least one sub-check failed; the chain does not support the boundedness conclusion for these settings."
    };
    Ok(FullReport { pseudoconvexity: pc, identities, dz, irregularity, verdict: verdict(ok), conclusion: conclusion.into() })
}

pub fn cmd_report(c: &RunConfig) -> Result<Outcome, RunError> {
    let r = full_report(c)?;
    let mut csv = csv_string(&INFLATION_HEADER, inflation_rows(&r.identities.inflation))?;
    csv.push('\n');
    csv.push_str(&csv_string(&SCAN_HEADER, scan_rows(&r.irregularity))?);
    let mut md = format!("# Szegő projection report ({})\n\n", c.params.label());
    md.push_str("## 1. Pseudoconvexity\n\n");
    pseudoconvexity_md(&mut md, &r.pseudoconvexity);
    md.push_str("## 2. Inflation consistency and lift identities\n\n");
    identities_md(&mut md, &r.identities);
    md.push_str("## 3. Derivative sign certificate\n\n");
    match &r.dz {
        DzPart::Certified { certificate } => dz_md(&mut md, certificate),
        DzPart::Unsupported { reason } => {
            let _ = writeln!(md, "Not run: {reason}. **FAIL**\n");
        }
    }
    md.push_str("## 4. Lower bounds R_n(p)\n\n");
    scan_md(&mut md, &r.irregularity);
    let _ = writeln!(md, "## 5. Verdict\n\n**{}**. {}\n", word(r.verdict), r.conclusion);
    Ok(Outcome::new(r.verdict == Verdict::Pass, &r, csv, md))
}

pub fn run(cmd: Command, c: &RunConfig) -> Result<Outcome, RunError> {
    match cmd {
        Command::Pseudoconvexity => cmd_pseudoconvexity(c),
        Command::DzCertify => cmd_dz_certify(c),
        Command::Moments => cmd_moments(c),
        Command::KernelEval => cmd_kernel_eval(c),
        Command::IdentityChecks => cmd_identity_checks(c),
        Command::Irregularity => cmd_irregularity(c),
        Command::Report => cmd_report(c),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub precision: crate::quad::PrecCtx,
    /// The only block that differs between identical runs.
    pub timing: Timing,
}

/// Renders an outcome in the configured format.
pub fn render(cmd: Command, c: &RunConfig, o: &Outcome, prov: &Provenance) -> String {
    match c.format {
        OutputFormat::Json => {
            let doc = json!({
                "command": cmd.name(),
                "pass": o.pass,
                "config": c,
                "result": o.result,
                "provenance": prov,
            });
            serde_json::to_string_pretty(&doc).expect("json") + "\n"
        }
        OutputFormat::Csv => o.csv.clone(),
        OutputFormat::Markdown => {
            let mut md = o.markdown.clone();
            let _ = writeln!(
                md,
                "\n---\n{} {} `{}`, {} bits, target relative error {:e}, started {} (unix), {:.2} s.",
                prov.tool,
                prov.version,
                cmd.name(),
                prov.precision.significand_bits,
                prov.precision.target_rel_err,
                prov.timing.started_unix,
                prov.timing.elapsed_seconds
            );
            md
        }
    }
}

/// Runs a command, writes the rendering to `--out` or returns it, and yields the exit code.
pub fn execute(cmd: Command, c: &RunConfig) -> (i32, String) {
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let t0 = Instant::now();
    let outcome = match run(cmd, c) {
        Ok(o) => o,
        Err(e) => return (e.exit_code(), format!("error: {e}\n")),
    };
    let prov = Provenance {
        tool: "szego".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        precision: c.precision.clone(),
        timing: Timing { started_unix, elapsed_seconds: t0.elapsed().as_secs_f64() },
    };
    let text = render(cmd, c, &outcome, &prov);
    let code = if outcome.pass { EXIT_OK } else { EXIT_CHECK_FAILED };
    match &c.out {
        Some(path) => match std::fs::write(path, &text) {
            Ok(()) => (code, String::new()),
            Err(e) => (EXIT_CONFIG, format!("error: cannot write {}: {e}\n", path.display())),
        },
        None => (code, text),
    }
}
