//! Run configuration: flat `key = value` settings from a file and from flags.
//!
//! Keys are the long flag names without dashes (`A`, `B`, `alpha`, `j`, `p`,
//! `n`, `precision-bits`, `tol`, `levels`, `cache-dir`, `format`, `out`,
//! `weight`, `order`, `samples`, `grid`, `z`, `t`). Flags override the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::irregularity::{LpExponent, ScanWeight};
use crate::quad::PrecCtx;
use crate::weight::WeightParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {detail}")]
    BadValue { key: String, detail: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("cannot read config file {path}: {detail}")]
    Read { path: PathBuf, detail: String },
}

pub const KEYS: &[&str] =
    &["A", "B", "alpha", "j", "p", "n", "precision-bits", "tol", "levels", "cache-dir", "format", "out", "weight", "order", "samples", "grid", "z", "t"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            _ => Err(format!("expected json, csv or markdown, got {s:?}")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
            OutputFormat::Markdown => "markdown",
        })
    }
}

/// Which radial weight the irregularity scan and moment tables use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightChoice {
    /// The Hartogs profile built from `(A, B, α)`.
    #[default]
    Hartogs,
    /// `(1 - r²)^k`, the contrast weight.
    Poly(u32),
}

impl WeightChoice {
    pub fn scan_weight(&self, params: &WeightParams) -> ScanWeight {
        match *self {
            WeightChoice::Hartogs => ScanWeight::Hartogs { params: *params },
            WeightChoice::Poly(k) => ScanWeight::Polynomial { exponent: k },
        }
    }

    pub fn is_contrast(&self) -> bool {
        matches!(self, WeightChoice::Poly(_))
    }
}

impl FromStr for WeightChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "hartogs" {
            return Ok(WeightChoice::Hartogs);
        }
        s.strip_prefix("poly").and_then(|k| k.parse().ok()).map(WeightChoice::Poly).ok_or_else(|| format!("expected hartogs or poly<k>, got {s:?}"))
    }
}

impl fmt::Display for WeightChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightChoice::Hartogs => f.write_str("hartogs"),
            WeightChoice::Poly(k) => write!(f, "poly{k}"),
        }
    }
}

/// Options that only some subcommands read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandOptions {
    /// Inflation index (moments, Bergman kernel) or top index (Szegő kernel).
    pub j: Option<u32>,
    pub p: Option<Vec<LpExponent>>,
    pub n: Option<Vec<u32>>,
    pub weight: WeightChoice,
    /// Highest derivative order in the sign certificate.
    pub order: u32,
    /// Sign spot checks per order.
    pub samples: usize,
    /// Grid size of the pseudoconvexity scan.
    pub grid: usize,
    /// Kernel evaluation points: one complex number (disc) or two (domain).
    pub z: Vec<(f64, f64)>,
    pub t: Vec<(f64, f64)>,
}

impl Default for CommandOptions {
    fn default() -> Self {
        CommandOptions { j: None, p: None, n: None, weight: WeightChoice::Hartogs, order: 8, samples: 1000, grid: 10_000, z: Vec::new(), t: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: WeightParams,
    pub precision: PrecCtx,
    pub cache_dir: Option<PathBuf>,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub options: CommandOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: WeightParams::standard(),
            precision: PrecCtx::default(),
            cache_dir: None,
            format: OutputFormat::Json,
            out: None,
            options: CommandOptions::default(),
        }
    }
}

/// Flat settings, ordered so that rendering is deterministic.
pub type Settings = BTreeMap<String, String>;

fn bad(key: &str, detail: impl fmt::Display) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), detail: detail.to_string() }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.trim().parse().map_err(|e: T::Err| bad(key, e))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

/// `re,im` pairs separated by `;`, e.g. `0.1,0.2;0.01,0`.
fn parse_points(key: &str, v: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pt| match parse_list::<f64>(key, pt)?.as_slice() {
            [re] => Ok((*re, 0.0)),
            [re, im] => Ok((*re, *im)),
            _ => Err(bad(key, format!("expected re,im, got {pt:?}"))),
        })
        .collect()
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_points(xs: &[(f64, f64)]) -> String {
    xs.iter().map(|(a, b)| format!("{a},{b}")).collect::<Vec<_>>().join(";")
}

/// Parses the flat file format: `key = value`, `#` comments, blank lines.
pub fn parse_settings(text: &str) -> Result<Settings, ConfigError> {
    let mut out = Settings::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let k = k.trim().trim_start_matches("--");
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn render_settings(s: &Settings) -> String {
    s.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

impl RunConfig {
    /// Defaults overridden by `settings`; values are validated here.
    pub fn from_settings(settings: &Settings) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        let get = |k: &str| settings.get(k).map(String::as_str);
        if let Some(k) = settings.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let a = get("A").map(|v| parse("A", v)).transpose()?.unwrap_or(c.params.a);
        let b = get("B").map(|v| parse("B", v)).transpose()?.unwrap_or(c.params.b);
        let alpha = get("alpha").map(|v| parse("alpha", v)).transpose()?.unwrap_or(c.params.alpha);
        c.params = WeightParams::new(a, b, alpha).map_err(|e| bad("A/B/alpha", e))?;

        let bits = get("precision-bits").map(|v| parse("precision-bits", v)).transpose()?.unwrap_or(c.precision.significand_bits);
        let tol = get("tol").map(|v| parse("tol", v)).transpose()?.unwrap_or(c.precision.target_rel_err);
        let levels = get("levels").map(|v| parse("levels", v)).transpose()?.unwrap_or(c.precision.max_refinement_levels);
        c.precision = PrecCtx::new(bits, tol, levels).map_err(|e| bad("precision-bits/tol/levels", e))?;

        c.cache_dir = get("cache-dir").filter(|v| !v.is_empty()).map(PathBuf::from);
        c.out = get("out").filter(|v| !v.is_empty()).map(PathBuf::from);
        if let Some(v) = get("format") {
            c.format = parse("format", v)?;
        }
        let o = &mut c.options;
        o.j = get("j").map(|v| parse("j", v)).transpose()?;
        if let Some(v) = get("p") {
            let ps: Vec<LpExponent> = parse_list("p", v)?;
            if ps.is_empty() {
                return Err(bad("p", "empty list"));
            }
            o.p = Some(ps);
        }
        if let Some(v) = get("n") {
            let ns: Vec<u32> = parse_list("n", v)?;
            if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
                return Err(bad("n", "expected a nonempty ascending list"));
            }
            o.n = Some(ns);
        }
        if let Some(v) = get("weight") {
            o.weight = parse("weight", v)?;
        }
        if let Some(v) = get("order") {
            o.order = parse("order", v)?;
        }
        if let Some(v) = get("samples") {
            o.samples = parse("samples", v)?;
        }
        if let Some(v) = get("grid") {
            o.grid = parse("grid", v)?;
        }
        if let Some(v) = get("z") {
            o.z = parse_points("z", v)?;
        }
        if let Some(v) = get("t") {
            o.t = parse_points("t", v)?;
        }
        Ok(c)
    }

    /// Inverse of [`RunConfig::from_settings`].
    pub fn to_settings(&self) -> Settings {
        let mut s = Settings::new();
        let mut put = |k: &str, v: String| {
            s.insert(k.to_string(), v);
        };
        put("A", self.params.a.to_string());
        put("B", self.params.b.to_string());
        put("alpha", self.params.alpha.to_string());
        put("precision-bits", self.precision.significand_bits.to_string());
        put("tol", format!("{:e}", self.precision.target_rel_err));
        put("levels", self.precision.max_refinement_levels.to_string());
        if let Some(d) = &self.cache_dir {
            put("cache-dir", d.display().to_string());
        }
        if let Some(d) = &self.out {
            put("out", d.display().to_string());
        }
        put("format", self.format.to_string());
        let o = &self.options;
        if let Some(j) = o.j {
            put("j", j.to_string());
        }
        if let Some(p) = &o.p {
            put("p", join(p));
        }
        if let Some(n) = &o.n {
            put("n", join(n));
        }
        put("weight", o.weight.to_string());
        put("order", o.order.to_string());
        put("samples", o.samples.to_string());
        put("grid", o.grid.to_string());
        if !o.z.is_empty() {
            put("z", join_points(&o.z));
        }
        if !o.t.is_empty() {
            put("t", join_points(&o.t));
        }
        s
    }

    /// File settings first, then flag settings on top.
    pub fn load(file: Option<&std::path::Path>, flags: &Settings) -> Result<Self, ConfigError> {
        let mut s = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.to_path_buf(), detail: e.to_string() })?;
                parse_settings(&text)?
            }
            None => Settings::new(),
        };
        s.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));
        RunConfig::from_settings(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn settings(pairs: &[(&str, &str)]) -> Settings {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::from_settings(&Settings::new()).unwrap();
        assert_eq!(c, RunConfig::default());
        let c = RunConfig::from_settings(&settings(&[("A", "2"), ("B", "3"), ("p", "4/3, 2,4"), ("n", "1,4,16"), ("weight", "poly2"), ("z", "0.1,0.2;0.01")]))
            .unwrap();
        assert_eq!(c.params, WeightParams::new(2.0, 3.0, 1.0).unwrap());
        assert_eq!(c.options.p.as_ref().unwrap().len(), 3);
        assert_eq!(c.options.weight, WeightChoice::Poly(2));
        assert_eq!(c.options.z, vec![(0.1, 0.2), (0.01, 0.0)]);
    }

    #[test]
    fn rejections() {
        for (k, v) in [("B", "-1"), ("alpha", "0"), ("precision-bits", "64"), ("n", "4,2"), ("p", "1"), ("format", "xml"), ("weight", "poly"), ("z", "1,2,3")] {
            assert!(matches!(RunConfig::from_settings(&settings(&[(k, v)])), Err(ConfigError::BadValue { .. })), "{k}={v}");
        }
        assert!(matches!(RunConfig::from_settings(&settings(&[("colour", "red")])), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(parse_settings("A = 1\njunk\n"), Err(ConfigError::Syntax { line: 2 })));
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nA = 1\nB = 2 # trailing\nformat = csv\n").unwrap();
        let c = RunConfig::load(Some(&path), &settings(&[("B", "5")])).unwrap();
        assert_eq!((c.params.a, c.params.b), (1.0, 5.0));
        assert_eq!(c.format, OutputFormat::Csv);
    }

    proptest! {
        #[test]
        fn round_trip(a in 0.0f64..10.0, b in 0.01f64..10.0, alpha in 0.1f64..4.0, bits in 128usize..1024,
                      j in proptest::option::of(0u32..50), ns in proptest::collection::btree_set(1u32..5000, 0..6),
                      order in 0u32..12, poly in proptest::option::of(0u32..6), re in -1.0f64..1.0) {
            let mut c = RunConfig::default();
            c.params = WeightParams::new(a, b, alpha).unwrap();
            c.precision = PrecCtx::new(bits, 1e-25, 9).unwrap();
            c.cache_dir = Some(PathBuf::from("/tmp/cache dir"));
            c.format = OutputFormat::Markdown;
            c.options.j = j;
            c.options.n = if ns.is_empty() { None } else { Some(ns.into_iter().collect()) };
            c.options.p = Some(vec!["4/3".parse().unwrap(), "5/2".parse().unwrap()]);
            c.options.order = order;
            c.options.weight = poly.map_or(WeightChoice::Hartogs, WeightChoice::Poly);
            c.options.z = vec![(re, -re / 3.0)];
            let text = render_settings(&c.to_settings());
            let back = RunConfig::from_settings(&parse_settings(&text).unwrap()).unwrap();
            prop_assert_eq!(&back, &c);
            let json = serde_json::to_string(&c).unwrap();
            prop_assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
        }
    }
}
