use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use szego_core::config::{RunConfig, Settings};
use szego_core::report::{execute, Command, EXIT_CONFIG};

/// Szegő and weighted Bergman projections on the Hartogs domain
/// {|z₂| < φ(|z₁|)}, φ = (1-r²)^A exp(-B/(1-r²)^α).
#[derive(Parser)]
#[command(name = "szego", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Subharmonicity scan of -log φ.
    Pseudoconvexity,
    /// Exact sign certificate for the derivatives of the base weight.
    DzCertify,
    /// Moment table m_{j,n} (CSV or JSON).
    Moments,
    /// Bergman kernel (one point each in --z, --t) or Szegő kernel (two each).
    KernelEval,
    /// Inflation consistency and lift identities on the canned function set.
    IdentityChecks,
    /// Lower bounds R_n(p) for the L^p norm of the projection.
    Irregularity,
    /// The whole pipeline.
    Report,
}

#[derive(Args)]
struct Flags {
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "A", global = true, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long = "B", global = true, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Inflation index, or top index for the Szegő kernel.
    #[arg(long, global = true)]
    j: Option<String>,
    /// Comma list of exponents, e.g. 4/3,2,4.
    #[arg(long, global = true)]
    p: Option<String>,
    /// Comma list of indices; the last one is the table size where one is needed.
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long = "precision-bits", global = true)]
    precision_bits: Option<String>,
    /// Quadrature target relative error; also loosens pinned check tolerances if larger.
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    levels: Option<String>,
    #[arg(long = "cache-dir", global = true)]
    cache_dir: Option<String>,
    /// json, csv or markdown.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// hartogs or poly<k> for (1-r²)^k.
    #[arg(long, global = true)]
    weight: Option<String>,
    #[arg(long, global = true)]
    order: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Points as re,im separated by `;`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    z: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    t: Option<String>,
}

impl Flags {
    fn settings(&self) -> Settings {
        let pairs = [
            ("A", &self.a),
            ("B", &self.b),
            ("alpha", &self.alpha),
            ("j", &self.j),
            ("p", &self.p),
            ("n", &self.n),
            ("precision-bits", &self.precision_bits),
            ("tol", &self.tol),
            ("levels", &self.levels),
            ("cache-dir", &self.cache_dir),
            ("format", &self.format),
            ("out", &self.out),
            ("weight", &self.weight),
            ("order", &self.order),
            ("samples", &self.samples),
            ("grid", &self.grid),
            ("z", &self.z),
            ("t", &self.t),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect()
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Pseudoconvexity => Command::Pseudoconvexity,
        Cmd::DzCertify => Command::DzCertify,
        Cmd::Moments => Command::Moments,
        Cmd::KernelEval => Command::KernelEval,
        Cmd::IdentityChecks => Command::IdentityChecks,
        Cmd::Irregularity => Command::Irregularity,
        Cmd::Report => Command::Report,
    };
    let config = match RunConfig::load(cli.flags.config.as_deref(), &cli.flags.settings()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let (code, text) = execute(command, &config);
    if code == 0 || !text.starts_with("error:") {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    ExitCode::from(code as u8)
}
