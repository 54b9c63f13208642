use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, ValueEnum};
use transit_cli::commands;
use transit_cli::config::{KRange, Mode};
use transit_cli::verify::{run_verify, Fault, Oracles};
use transit_cli::{CliError, MapSpec, OutputFormat, RunConfig, Subcommand};
use transit_core::sampling::DEFAULT_SEED;

#[derive(Parser)]
#[command(name = "transit", version, about = "Exit, transit and return-time statistics for volume-preserving maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Check sampled decompositions and Kac's lemma against closed forms.
    Verify(VerifyArgs),
    /// Estimate the exit-time decomposition of the entry set.
    Decompose(DecomposeArgs),
    /// Build the Hénon fixed-point resonance zone and its lobes.
    HenonZone(ZoneArgs),
    /// Measure of bounded Hénon orbits over a range of k.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapArg {
    Linear,
    Diag,
    Shear,
    Henon,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Random,
    Grid,
}

#[derive(Args)]
struct VerifyArgs {
    /// Samples per sampled decomposition.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    t_max: u64,
    /// Exit-time bins J.
    #[arg(long, default_value_t = 1_000)]
    bins: u64,
    /// Replace a closed form by a wrong one (negative control).
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long, value_enum, default_value_t = MapArg::Linear)]
    map: MapArg,
    /// Expansion rate of the linear map.
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// Eigenvalues of the diagonal map, expanding first; fractions like 1/3 allowed.
    #[arg(long, value_delimiter = ',', default_value = "2,1.5,1/3", value_parser = parse_number)]
    eigenvalues: Vec<f64>,
    /// Hénon parameter.
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    /// Lobe resolution N for the Hénon map.
    #[arg(long, default_value_t = 2000)]
    n_pixels: usize,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Random)]
    mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    t_max: u64,
    /// Exit-time bins J; longer exit times are counted as censored.
    #[arg(long, default_value_t = 1_000)]
    bins: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ZoneArgs {
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    #[arg(long, default_value_t = 2000)]
    n_pixels: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    k_min: f64,
    #[arg(long)]
    k_max: f64,
    /// Number of k values, both ends included.
    #[arg(long, default_value_t = 11)]
    steps: usize,
    #[arg(long, default_value_t = 2000)]
    n_pixels: usize,
    #[arg(long, default_value_t = 100_000)]
    t_max: u64,
    /// Bisection tolerance, relative to each fiber integral.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Record per-row wall-clock seconds (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            Ok(a / b)
        }
        None => s.parse().map_err(|e| format!("{s}: {e}")),
    }
}

fn apply_output(cfg: &mut RunConfig, o: OutputArgs) {
    cfg.out = o.out;
    cfg.format = match o.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    cfg.jobs = o.jobs;
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Verify(a) => {
            let mut cfg = RunConfig::new(Subcommand::Verify);
            cfg.samples = a.samples;
            cfg.seed = a.seed;
            cfg.t_max = a.t_max;
            cfg.bins = a.bins;
            apply_output(&mut cfg, a.output);
            init_threads(&cfg)?;
            let oracles = a.inject_fault.map(Oracles::with_fault).unwrap_or_default();
            let report = run_verify(&cfg, &oracles)?;
            write!(out, "{}", report.render())?;
            if let Some(path) = &cfg.out {
                let doc = serde_json::json!({ "config": cfg, "report": report });
                std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
            }
            Ok(report.passed())
        }
        Command::Decompose(a) => {
            let mut cfg = RunConfig::new(Subcommand::Decompose);
            let map = match a.map {
                MapArg::Linear => MapSpec::Linear { lambda: a.lambda },
                MapArg::Diag => MapSpec::Diag { eigenvalues: a.eigenvalues },
                MapArg::Shear => MapSpec::Shear,
                MapArg::Henon => MapSpec::Henon { k: a.k },
            };
            cfg.region = Some(map.region());
            cfg.map = Some(map);
            cfg.n_pixels = a.n_pixels;
            cfg.samples = a.samples;
            cfg.mode = match a.mode {
                ModeArg::Random => Mode::Random,
                ModeArg::Grid => Mode::Grid,
            };
            cfg.seed = a.seed;
            cfg.t_max = a.t_max;
            cfg.bins = a.bins;
            apply_output(&mut cfg, a.output);
            init_threads(&cfg)?;
            let result = commands::decompose(&cfg)?;
            commands::write_decompose(&cfg, &result, &mut out)?;
            let s = &result.summary;
            eprintln!(
                "mu(I) = {:.6} +- {:.1e}, <t+>_I = {:.6} +- {:.1e}, censored fraction {:.2e}",
                s.mu_entry.value, s.mu_entry.stderr, s.avg_exit_entry.value, s.avg_exit_entry.stderr, s.censored_fraction
            );
            Ok(true)
        }
        Command::HenonZone(a) => {
            let mut cfg = RunConfig::new(Subcommand::HenonZone);
            let map = MapSpec::Henon { k: a.k };
            cfg.region = Some(map.region());
            cfg.map = Some(map);
            cfg.n_pixels = a.n_pixels;
            apply_output(&mut cfg, a.output);
            init_threads(&cfg)?;
            let s = commands::henon_zone(&cfg, &mut out)?;
            eprintln!(
                "k = {}: mu(A) = {:.8} (shoelace {:.8}), mu(I) = {:.8} (shoelace {:.8}), {} boundary vertices",
                s.k, s.areas.zone_action, s.areas.zone_shoelace, s.areas.lobe_action, s.areas.lobe_shoelace, s.boundary_vertices
            );
            Ok(true)
        }
        Command::Sweep(a) => {
            let mut cfg = RunConfig::new(Subcommand::Sweep);
            cfg.k_range = Some(KRange { k_min: a.k_min, k_max: a.k_max, steps: a.steps });
            cfg.region = Some(MapSpec::Henon { k: a.k_min }.region());
            cfg.n_pixels = a.n_pixels;
            cfg.t_max = a.t_max;
            cfg.value_tol = a.tol;
            cfg.timing = a.timing;
            apply_output(&mut cfg, a.output);
            init_threads(&cfg)?;
            let rows = commands::sweep(&cfg, &mut out)?;
            let failed = rows.iter().filter(|r| r.status.starts_with("error")).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows failed; see the status column", rows.len());
            }
            Ok(true)
        }
    }
}

fn init_threads(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    if let Some(j) = cfg.jobs {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
