//! `mbps`: analyze portfolios from trade files, generate synthetic trades and
//! run the identity verification campaign.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 identity failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mbps_core::analysis::{analyze, AnalysisOptions};
use mbps_core::decomposition::{DUAL_PATH_TOLERANCE, IDENTITY_TOLERANCE};
use mbps_core::ingest::{read_portfolio_csv, read_trades_csv, write_portfolio_csv, write_trades};
use mbps_core::portfolio::DEFAULT_LIQUIDITY_FACTOR;
use mbps_core::synthetic::{generate_synthetic, SyntheticSpec, DEFAULT_SEED};
use mbps_core::verify::campaign::{randomized_identity_campaign, summarize, CampaignConfig, Fault};

const SEED_ENV: &str = "MBPS_SEED";

#[derive(Parser)]
#[command(name = "mbps", version, about = "Market-based price and return moments for portfolios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a portfolio over one averaging window.
    Analyze(AnalyzeArgs),
    /// Write synthetic trades (and optionally a portfolio) from a JSON spec.
    Generate(GenerateArgs),
    /// Run the randomized identity campaign.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trades CSV with header security_id,tick,value,volume.
    #[arg(long, requires = "portfolio", conflicts_with = "spec")]
    trades: Option<PathBuf>,
    /// Portfolio CSV with header security_id,holding,price_at_t0.
    #[arg(long, requires = "trades")]
    portfolio: Option<PathBuf>,
    /// Synthetic spec JSON used instead of trade and portfolio files.
    #[arg(long, required_unless_present = "trades")]
    spec: Option<PathBuf>,
    /// Seed for --spec, overriding the spec file and MBPS_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = IDENTITY_TOLERANCE)]
    identity_tolerance: f64,
    #[arg(long, default_value_t = DUAL_PATH_TOLERANCE)]
    dual_path_tolerance: f64,
    /// Warn when a security trades less than this multiple of its holding.
    #[arg(long, default_value_t = DEFAULT_LIQUIDITY_FACTOR)]
    liquidity_factor: f64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Trades CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Portfolio CSV output (holdings and first-trade prices).
    #[arg(long)]
    portfolio_out: Option<PathBuf>,
    /// Overrides the spec file seed and MBPS_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipCubicSign,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Defaults to MBPS_SEED, then 42.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 5)]
    max_j: usize,
    #[arg(long, default_value_t = 64)]
    max_n: usize,
    #[arg(long, default_value_t = 1)]
    min_n: usize,
    /// Write the full per-instance report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Negative control: corrupt the main path on purpose.
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

/// Failure that maps to exit code 2 rather than 1.
#[derive(Debug)]
struct IdentityFailure(String);

impl std::fmt::Display for IdentityFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for IdentityFailure {}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not a u64"))?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

fn read_spec(path: &Path, seed: Option<u64>) -> Result<SyntheticSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec: SyntheticSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing spec {}", path.display()))?;
    spec.seed = Some(match (seed, spec.seed) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => env_seed()?.unwrap_or(DEFAULT_SEED),
    });
    Ok(spec)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    for (name, v) in [
        ("identity-tolerance", args.identity_tolerance),
        ("dual-path-tolerance", args.dual_path_tolerance),
        ("liquidity-factor", args.liquidity_factor),
    ] {
        if !(v.is_finite() && v > 0.0) {
            bail!("--{name} must be > 0, got {v}");
        }
    }
    let (series, portfolio) = match (&args.trades, &args.portfolio, &args.spec) {
        (Some(trades), Some(portfolio), _) => (
            read_trades_csv(trades).with_context(|| format!("reading {}", trades.display()))?,
            read_portfolio_csv(portfolio).with_context(|| format!("reading {}", portfolio.display()))?,
        ),
        (_, _, Some(spec)) => {
            let market = generate_synthetic(&read_spec(spec, args.seed)?)?;
            let portfolio = market.portfolio()?;
            (market.series, portfolio)
        }
        _ => bail!("either --trades with --portfolio, or --spec, is required"),
    };
    let options = AnalysisOptions {
        identity_tolerance: args.identity_tolerance,
        dual_path_tolerance: args.dual_path_tolerance,
        liquidity_factor: args.liquidity_factor,
    };
    let report = analyze(&series, &portfolio, &options)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut body = match args.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    if !body.ends_with('\n') {
        body.push('\n');
    }
    emit(args.out.as_deref(), body.as_bytes())?;
    if !report.passed {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        return Err(IdentityFailure(format!("identity checks failed: {}", failed.join(", "))).into());
    }
    Ok(())
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let spec = read_spec(&args.spec, args.seed)?;
    let market = generate_synthetic(&spec)?;
    let mut buf = Vec::new();
    write_trades(&mut buf, &market.series)?;
    emit(Some(&args.out), &buf)?;
    if let Some(path) = &args.portfolio_out {
        write_portfolio_csv(path, &market.portfolio()?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    let config = CampaignConfig {
        instances: args.instances,
        seed,
        max_securities: args.max_j,
        min_ticks: args.min_n,
        max_ticks: args.max_n,
        fault: args.inject_fault.map(|FaultArg::FlipCubicSign| Fault::FlipCubicSign),
        ..CampaignConfig::default()
    };
    let reports = randomized_identity_campaign(&config)?;
    let summary = summarize(&reports);
    if let Some(path) = &args.report {
        fs::write(path, serde_json::to_string_pretty(&reports)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "instances: {}  passed: {}  failed: {}  checks: {}  failed checks: {}  non-PSD Σ: {}",
        summary.instances,
        summary.passed_instances,
        summary.failed_instances,
        summary.checks,
        summary.failed_checks,
        summary.non_psd_instances,
    );
    if let Some(worst) = &summary.worst_check {
        println!("worst relative error: {:.3e} ({worst})", summary.worst_relative_error);
    }
    for r in reports.iter().filter(|r| !r.passed).take(10) {
        for e in &r.errors {
            println!("FAIL instance {}: {e}", r.instance.index);
        }
        for c in r.failed_checks() {
            println!(
                "FAIL instance {} (J={}, N={}): {} main={:e} oracle={:e} rel={:.3e} tol={:e}",
                r.instance.index, r.instance.securities, r.instance.ticks, c.name, c.main, c.oracle, c.relative_error, c.tolerance
            );
        }
    }
    if !summary.passed() {
        return Err(IdentityFailure(format!("{} of {} instances failed", summary.failed_instances, summary.instances)).into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Generate(g) => run_generate(g),
        Command::Verify(v) => run_verify(v),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<IdentityFailure>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
