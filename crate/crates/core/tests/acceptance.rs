//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints one line, `criterion <id> ... PASS|FAIL`, into the `cargo test` log.
//! Exits nonzero if any asserted line fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use szego_core::irregularity::{duality_symmetry_check, irregularity_ratio, irregularity_scan, GrowthVerdict, LpExponent, MomentMemo, ScanWeight, VerdictRule};
use szego_core::kernel::inflation_consistency_check;
use szego_core::moments::{moment_table, moment_table_for, MomentTable};
use szego_core::projection::{canned_f_set, lift_norm_identity, lift_projection_identity};
use szego_core::quad::PrecCtx;
use szego_core::real::Real;
use szego_core::symbolic::{dz_certify, nth_derivative};
use szego_core::weight::{pseudoconvexity_scan, PolynomialWeight, RadialWeight, RadialWeightProfile, Verdict, WeightParams, DEFAULT_S_CAP};

const HOLDER_TOL: f64 = 1e-20;
const TREND_FINAL_MIN: f64 = 5.0;
const SLOPE_REL_TOL: f64 = 0.25;
/// Literal slope constant `2(√2 - 1/2 - √3/2)`, checked as stated.
const LITERAL_SLOPE_C4: f64 = 0.09643;
const DUALITY_TOL: f64 = 1e-15;
const INFLATION_TOL: f64 = 1e-10;
const LIFT_NORM_TOL: f64 = 1e-12;
const LIFT_PROJECTION_TOL: f64 = 1e-10;
const Z2_TOL: f64 = 1e-20;
const DZ_SAMPLES: usize = 1000;
const PSEUDOCONVEXITY_GRID: usize = 10_000;
const PSEUDOCONVEXITY_TOL: f64 = 1e-25;
const DERIVATIVE_TOL: f64 = 1e-12;
/// r-form against s-form, in units of the condition-scaled ulp `κ 2^-bits`.
const FORM_ULPS: f64 = 64.0;

/// Moments of the (0,1,1) base weight from an independent 50-digit quadrature
/// (log substitution around the saddle, split panels), frozen here.
const ORACLE_M_16384: f64 = 5.911154571141e-81;
const ORACLE_M_8192: f64 = 1.0510516250862e-57;
const ORACLE_M_16384_3: f64 = 2.2551730809266e-47;

struct Line {
    id: &'static str,
    title: &'static str,
    pass: bool,
    asserted: bool,
    detail: String,
}

impl Line {
    fn asserted(id: &'static str, title: &'static str, pass: bool, detail: String) -> Self {
        Line { id, title, pass, asserted: true, detail }
    }
}

fn ctx(bits: usize) -> PrecCtx {
    PrecCtx::new(bits, 1e-30, 12).unwrap()
}

fn within_runtime(t: Duration, limit_s: u64) -> (bool, String) {
    (t.as_secs_f64() < limit_s as f64, format!("{:.1} s of {limit_s} s", t.as_secs_f64()))
}

fn c1_holder_equality() -> Vec<Line> {
    let t0 = Instant::now();
    let c = ctx(256);
    let w = ScanWeight::Hartogs { params: WeightParams::standard() };
    let ns: Vec<u32> = (0..=10).map(|k| 1 << k).collect();
    let rep = irregularity_scan(&w, &LpExponent::integer(2).unwrap(), &ns, &VerdictRule::default(), &c, &MomentMemo::new()).unwrap();
    let one = Real::one(256);
    let worst = rep.r_values.iter().map(|r| (r - &one).abs().to_f64()).fold(0.0, f64::max);
    let (fast, rt) = within_runtime(t0.elapsed(), 120);
    vec![Line::asserted(
        "1",
        "Hölder equality R_n(2) = 1, n = 1..1024, 256 bits",
        worst <= HOLDER_TOL && fast,
        format!("max |R_n(2) - 1| = {worst:.3e} (tol {HOLDER_TOL:e}), {rt}"),
    )]
}

fn c2_irregularity_trend() -> Vec<Line> {
    let t0 = Instant::now();
    let c = ctx(256);
    let params = WeightParams::standard();
    let w = ScanWeight::Hartogs { params };
    let p4 = LpExponent::integer(4).unwrap();
    let ns = [16u32, 64, 256, 1024, 4096];
    let memo = MomentMemo::new();
    let rep = irregularity_scan(&w, &p4, &ns, &VerdictRule::default(), &c, &memo).unwrap();
    let r: Vec<f64> = rep.r_values.iter().map(Real::to_f64).collect();
    let increasing = r.windows(2).all(|x| x[1] > x[0]);
    let last = *r.last().unwrap();
    let slope = last.ln() / 64.0;

    // Laplace: log m(β) = -√(2Bβ) + o(√β) with saddle s = √(β/2B)
    let derived = 2.0 - (2.0f64 / 4.0).sqrt() - (2.0f64 / (4.0 / 3.0)).sqrt();
    let slope_err = (slope - derived).abs() / derived;

    let oracle_r = ORACLE_M_16384.powf(0.25) * ORACLE_M_16384_3.powf(0.75) / ORACLE_M_8192;
    let oracle_err = (oracle_r - last).abs() / oracle_r;

    let radial = w.radial();
    let q = LpExponent::new(BigRational::new(BigInt::from(4), BigInt::from(3))).unwrap();
    let worst_dual = ns
        .iter()
        .map(|&n| {
            let d = duality_symmetry_check(radial.as_ref(), &q, n, &c, &MomentMemo::new()).unwrap();
            let direct = irregularity_ratio(radial.as_ref(), &p4, n, &c, &memo).unwrap();
            d.rel_diff.max(Real::rel_diff(&d.r_p, &direct).to_f64())
        })
        .fold(0.0, f64::max);
    let (fast, rt) = within_runtime(t0.elapsed(), 600);
    let ok = increasing
        && last > TREND_FINAL_MIN
        && slope_err <= SLOPE_REL_TOL
        && oracle_err < 1e-10
        && worst_dual <= DUALITY_TOL
        && rep.verdict == GrowthVerdict::UnboundedTrend
        && fast;
    let literal_err = (slope - LITERAL_SLOPE_C4).abs() / LITERAL_SLOPE_C4;
    vec![
        Line::asserted(
            "2",
            "R_n(4) increasing, final > 5, slope within 25% of the Laplace limit, duality at 4/3",
            ok,
            format!(
                "R = {r:.4?}, log R_4096/64 = {slope:.6} vs derived {derived:.6} ({:.1}%), oracle R_4096 rel err {oracle_err:.1e}, duality {worst_dual:.1e}, {rt}",
                100.0 * slope_err
            ),
        ),
        Line {
            id: "2-literal",
            title: "slope within 25% of the literal constant 0.09643",
            pass: literal_err <= SLOPE_REL_TOL,
            asserted: false,
            detail: format!(
                "log R_4096/64 = {slope:.6} is {:.1}% from 0.09643; that constant assumes log m(β) ≈ -2√β, the computed and oracle moments follow -√(2β) (reported, not asserted)",
                100.0 * literal_err
            ),
        },
    ]
}

fn std_tables(bits: usize, j_max: u32, n_max: u32) -> Vec<MomentTable> {
    (0..=j_max).map(|j| moment_table(&WeightParams::standard(), j, n_max, &ctx(bits)).unwrap()).collect()
}

fn c3_inflation() -> Vec<Line> {
    let c = ctx(256);
    let tables = std_tables(256, 4, 8);
    let grid: Vec<(u32, u32)> = (0..=4).flat_map(|j| (0..=8).map(move |n| (n, j))).collect();
    let two_pi = Real::pi(256) * Real::from_u64(2, 256);
    let rep = inflation_consistency_check(&WeightParams::standard(), &grid, &tables, &two_pi, INFLATION_TOL, &c).unwrap();
    let worst = rep.rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    // negative control: c_j = 1 must fail everywhere
    let control = inflation_consistency_check(&WeightParams::standard(), &grid, &tables, &Real::one(256), INFLATION_TOL, &c).unwrap();
    let control_fails = control.rows.iter().all(|r| r.verdict == Verdict::Fail);
    vec![Line::asserted(
        "3",
        "boundary norms of z1^n z2^j match m_{j,n} with c_j = 2π, 45 pairs",
        rep.verdict == Verdict::Pass && rep.rows.len() == 45 && control_fails,
        format!("worst rel err {worst:.3e} (tol {INFLATION_TOL:e}); c_j = 1 control fails on all pairs: {control_fails}"),
    )]
}

fn c4_lift_identities() -> Vec<Line> {
    let c = ctx(256);
    let params = WeightParams::standard();
    let tables = std_tables(256, 0, 8);
    let fs = canned_f_set(256);
    let mut worst_norm: f64 = 0.0;
    for p in [2u64, 4] {
        for (_, f) in &fs {
            worst_norm = worst_norm.max(lift_norm_identity(&params, f, &Real::from_u64(p, 256), &c).unwrap().rel_diff);
        }
    }
    let (mut worst_coeff, mut worst_z2): (f64, f64) = (0.0, 0.0);
    for (_, f) in &fs {
        let r = lift_projection_identity(&params, f, &tables, LIFT_PROJECTION_TOL, Z2_TOL, &c).unwrap();
        worst_coeff = worst_coeff.max(r.max_rel_err);
        worst_z2 = worst_z2.max(r.max_z2_coefficient.to_f64());
    }
    let ok = worst_norm <= LIFT_NORM_TOL && worst_coeff <= LIFT_PROJECTION_TOL && worst_z2 < Z2_TOL;
    vec![Line::asserted(
        "4",
        "lift norm identity at p = 2, 4; S(lift f) = B_0 f; no z2 terms",
        ok,
        format!("{} functions: norm rel diff {worst_norm:.3e}, coefficient rel err {worst_coeff:.3e}, max z2 coefficient {worst_z2:.1e}", fs.len()),
    )]
}

fn c5_dz_certificate() -> Vec<Line> {
    let t0 = Instant::now();
    let cert = dz_certify(&WeightParams::standard(), 8, DZ_SAMPLES).unwrap();
    let mut problems = Vec::new();
    if cert.orders.len() != 9 {
        problems.push(format!("{} orders", cert.orders.len()));
    }
    for (n, o) in cert.orders.iter().enumerate() {
        let sign = if n % 2 == 0 { 1 } else { -1 };
        if o.structure.k0_part.as_constant() != Some(BigRational::from_integer(sign.into())) {
            problems.push(format!("order {n}: k = 0 part is not {sign}"));
        }
        if o.limit.verdict != Verdict::Pass {
            problems.push(format!("order {n}: limit"));
        }
        if o.samples != DZ_SAMPLES || o.sampled_min.is_negative() {
            problems.push(format!("order {n}: sampled min {}", o.sampled_min.to_f64()));
        }
    }
    let s1 = &cert.orders[1].tail.threshold;
    if *s1 != BigRational::from_integer(1.into()) {
        problems.push(format!("s_1 = {s1}"));
    }
    // independent spot check of the order 1 claim just above s_1 = 1
    let w = RadialWeightProfile::for_index(WeightParams::standard(), 0);
    let (a, b) = (Real::from_f64(1.001, 256), Real::from_f64(1.002, 256));
    if w.eval_s(&b) >= w.eval_s(&a) {
        problems.push("ν not decreasing just above s = 1".into());
    }
    let thresholds: Vec<String> = cert.orders.iter().map(|o| o.tail.threshold.to_string()).collect();
    let (fast, rt) = within_runtime(t0.elapsed(), 60);
    vec![Line::asserted(
        "5",
        "sign certificate for (0,1,1), orders 0..8",
        cert.valid && problems.is_empty() && fast,
        format!(
            "s_n = [{}], {DZ_SAMPLES} samples per order, {rt}{}",
            thresholds.join(", "),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )]
}

fn c6_pseudoconvexity() -> Vec<Line> {
    let triples = [(0.0, 1.0, 1.0), (2.0, 3.0, 1.0), (0.0, 1.0, 2.0), (1.0, 1.0, 2.0)];
    let scans: Vec<_> = triples
        .iter()
        .map(|&(a, b, al)| pseudoconvexity_scan(&WeightParams::new(a, b, al).unwrap(), PSEUDOCONVEXITY_GRID, DEFAULT_S_CAP, PSEUDOCONVEXITY_TOL, 256))
        .collect();
    let ok = scans.iter().all(|s| s.verdict == Verdict::Pass && s.min_value.to_f64() >= -PSEUDOCONVEXITY_TOL && s.grid_size == PSEUDOCONVEXITY_GRID);
    let mins: Vec<String> = scans.iter().map(|s| format!("{}: {:.3e}", s.params.label(), s.min_value.to_f64())).collect();
    vec![Line::asserted("6", "Δ(-log φ) >= -1e-25 on a 10^4-point grid, four triples", ok, format!("min {}", mins.join("; ")))]
}

fn c7_contrast() -> Vec<Line> {
    let c = ctx(256);
    let w = ScanWeight::Polynomial { exponent: 2 };
    let rep = irregularity_scan(&w, &LpExponent::integer(4).unwrap(), &[16, 64, 256, 1024, 4096], &VerdictRule::default(), &c, &MomentMemo::new()).unwrap();
    let r: Vec<f64> = rep.r_values.iter().map(Real::to_f64).collect();
    vec![Line::asserted(
        "7",
        "contrast weight (1-r²)², p = 4: BOUNDED_PLATEAU",
        rep.verdict == GrowthVerdict::BoundedPlateau && rep.holder_ok,
        format!("R = {r:.6?}, verdict {}", rep.verdict),
    )]
}

/// `f^{(n)}(s)` by the central difference `δ_h^n f / h^n` with one Richardson step.
fn finite_difference(f: &dyn Fn(&Real) -> Real, s: &Real, n: u32, h: f64) -> Real {
    let bits = s.precision();
    let stencil = |h: &Real| -> Real {
        let mut acc = Real::zero(bits);
        let mut binom = Real::one(bits);
        for k in 0..=n {
            let offset = Real::from_f64(n as f64 / 2.0 - k as f64, bits) * h;
            let term = &binom * &f(&(s + &offset));
            acc = if k % 2 == 0 { acc + term } else { acc - term };
            binom = binom * Real::from_u64((n - k) as u64, bits) / Real::from_u64(k as u64 + 1, bits);
        }
        acc / h.powi(n as u64)
    };
    let h1 = Real::from_f64(h, bits);
    let h2 = Real::from_f64(h / 2.0, bits);
    let (d1, d2) = (stencil(&h1), stencil(&h2));
    (Real::from_u64(4, bits) * d2 - d1) / Real::from_u64(3, bits)
}

fn c8_cross_validation() -> Vec<Line> {
    // 512 bits so that the h^-8 amplification of rounding stays far below the tolerance
    let bits = 512;
    let params = WeightParams::standard();
    let nu = RadialWeightProfile::for_index(params, 0);
    let f = |s: &Real| nu.eval_s(s);
    let mut worst_d: f64 = 0.0;
    for n in 0..=8 {
        let expr = nth_derivative(&params, n).unwrap();
        for s in [1.5, 2.0, 3.7, 6.0, 10.0] {
            let s = Real::from_f64(s, bits);
            let sym = expr.eval_real(&s);
            let fd = finite_difference(&f, &s, n, 1e-8);
            let scale = sym.abs().max(&f(&s));
            worst_d = worst_d.max(((&sym - &fd).abs() / scale).to_f64());
        }
    }

    // Rounding s = 1/(1-r²) perturbs s by a few ulps; w = φ^q √(1+g) turns that into
    // a relative error of about κ = q(A + αB s^α) + 2 ulps, so the comparison is in units of κ ulps.
    let bits = 256;
    let ulp = 2f64.powi(-(bits as i32));
    let mut worst_form: f64 = 0.0;
    for (a, b, al) in [(0.0, 1.0, 1.0), (2.0, 3.0, 1.0), (1.0, 1.0, 2.0)] {
        let p = WeightParams::new(a, b, al).unwrap();
        for j in 0..=3 {
            let w = RadialWeightProfile::for_index(p, j);
            for i in 0..=40 {
                let rf = 0.98 * i as f64 / 40.0;
                let r = Real::from_f64(rf, bits);
                let s = (Real::one(bits) - &r * &r).recip();
                let sf = s.to_f64();
                let kappa = (2 * j + 1) as f64 * (a + al * b * sf.powf(al)) + 2.0;
                worst_form = worst_form.max(Real::rel_diff(&w.eval_r(&r), &w.eval_s(&s)).to_f64() / (kappa * ulp));
            }
        }
    }
    let form_tol = FORM_ULPS;

    let c = ctx(128);
    let mut tables: Vec<MomentTable> = Vec::new();
    for (a, b, al) in [(0.0, 1.0, 1.0), (2.0, 3.0, 1.0), (1.0, 1.0, 2.0)] {
        for j in 0..=2 {
            tables.push(moment_table(&WeightParams::new(a, b, al).unwrap(), j, 40, &c).unwrap());
        }
    }
    tables.push(moment_table_for(&PolynomialWeight { exponent: 2 }, 0, None, 40, &c).unwrap());
    let convex = tables.iter().all(|t| t.check_log_convexity().is_ok());

    vec![Line::asserted(
        "8",
        "symbolic derivatives vs finite differences; r-form vs s-form; log-convex tables",
        worst_d <= DERIVATIVE_TOL && worst_form <= form_tol && convex,
        format!(
            "derivative rel err {worst_d:.3e} (tol {DERIVATIVE_TOL:e}), form diff {worst_form:.1} κ-ulps (tol {form_tol}), {} tables log-convex: {convex}",
            tables.len()
        ),
    )]
}

fn main() {
    let criteria: [(&str, fn() -> Vec<Line>); 8] = [
        ("1", c1_holder_equality),
        ("2", c2_irregularity_trend),
        ("3", c3_inflation),
        ("4", c4_lift_identities),
        ("5", c5_dz_certificate),
        ("6", c6_pseudoconvexity),
        ("7", c7_contrast),
        ("8", c8_cross_validation),
    ];
    let mut failed = Vec::new();
    for (id, run) in criteria {
        let t0 = Instant::now();
        let lines = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(lines) => lines,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
                vec![Line { id, title: "aborted", pass: false, asserted: true, detail: msg }]
            }
        };
        for l in lines {
            let tag = if l.pass { "PASS" } else { "FAIL" };
            let note = if l.asserted { "" } else { " [not asserted]" };
            println!("criterion {} {}: {tag}{note} ({:.1} s) {}", l.id, l.title, t0.elapsed().as_secs_f64(), l.detail);
            if l.asserted && !l.pass {
                failed.push(l.id);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("asserted criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
