use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use side_fd::harness::{emit, parse_list, parse_region, parse_schemes, run_study, study_log, StudyConfig};
use side_fd::Error;

#[derive(Parser)]
#[command(name = "side-fd", version, about = "Convergence studies for finite-difference SIDE solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo convergence study on the benchmark problem.
    Study(StudyArgs),
}

#[derive(clap::Args)]
struct StudyArgs {
    /// TOML file with [measure], [coefficients] and [study] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated spacings, e.g. 2^-2,2^-3,2^-4.
    #[arg(long)]
    h_list: Option<String>,
    /// `h2` or `list:tau1,tau2,...`.
    #[arg(long)]
    tau_rule: Option<String>,
    /// Number of Monte Carlo replications.
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of explicit,imex.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, env = "SIDE_FD_THREADS")]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Radius of the error region, or `full`.
    #[arg(long)]
    inner_region: Option<String>,
}

fn build_config(args: &StudyArgs) -> side_fd::Result<StudyConfig> {
    let mut cfg = match &args.config {
        Some(path) => StudyConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
        None => StudyConfig::default(),
    };
    if let Some(h) = &args.h_list {
        cfg.h_list = parse_list(h)?;
    }
    if let Some(t) = &args.tau_rule {
        cfg.tau_rule = t.parse()?;
    }
    if let Some(m) = args.mc {
        cfg.replications = m;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(s) = &args.scheme {
        cfg.schemes = parse_schemes(s)?;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Some(r) = &args.inner_region {
        cfg.error_region = parse_region(r)?;
    }
    Ok(cfg)
}

fn study(args: &StudyArgs) -> side_fd::Result<()> {
    let cfg = build_config(args)?;
    let report = run_study(&cfg)?;
    emit(&report, &args.out)?;
    print!("{}", study_log(&report));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Study(args) => study(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::CflViolation { .. } => 2,
                Error::Io(_) => 3,
                _ => 1,
            })
        }
    }
}
