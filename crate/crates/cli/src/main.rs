//! `heliosolve` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heliosolve::Error;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "heliosolve", version, about = "Helioseismic scattering forward model and inversion")]
struct Cli {
    /// TOML config file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Print the effective config and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact diagonals of the model and the scattering table recovered from them.
    Forward,
    /// χ² power-spectrum draw on top of the exact diagonals.
    Simulate,
    /// Scattering extraction, Gauss–Newton reconstruction and parameter recovery.
    Invert,
    /// Near-singular observation heights for a reference height.
    SingularScan,
    /// Writes the model (reference background, optionally perturbed).
    ReferenceModel,
    /// F, F', G, G' of the Coulomb functions.
    #[command(hide = true)]
    SpecfunProbe { ell: usize, eta: f64, rho: f64 },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 4,
        Error::Config(_) | Error::Parse { .. } | Error::BelowCutoff { .. } | Error::ModelInvariant(_) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> heliosolve::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.dump_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    env_logger::Builder::new().filter_level(cfg.log_level.filter()).format_timestamp(None).init();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let Some(command) = cli.command else {
        return Err(Error::Config("no subcommand given".into()));
    };
    cfg.check_paths(matches!(command, Command::Invert))?;
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match command {
        Command::Forward => commands::forward(&cfg, out),
        Command::Simulate => commands::simulate(&cfg, out),
        Command::Invert => commands::invert(&cfg, out),
        Command::SingularScan => commands::singular_scan(&cfg, out),
        Command::ReferenceModel => commands::reference_model(&cfg, out),
        Command::SpecfunProbe { ell, eta, rho } => commands::specfun_probe(ell, eta, rho),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("E:{}:{}:{}", e.module(), e.code(), detail);
            ExitCode::from(exit_code(&e))
        }
    }
}
