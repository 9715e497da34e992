mod manifest;

use cavcool::experiments::{
    run_budget, run_confocal, run_cool, run_diffscan, run_forcescan, run_table1, run_validate,
    ExperimentConfig, ExperimentOutput,
};
use cavcool::Error;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_VALIDATION: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "cavcool", version, about = "Friction, diffusion and cooling of polarizable particles in pumped cavities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration, or a manifest.json from an earlier run to reproduce it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Seed for every stochastic part of the command.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Pass/fail tolerance of the command's check (relative deviation for
    /// table1 and cool, grid tolerance for confocal).
    #[arg(long, global = true, value_name = "F")]
    tolerance: Option<f64>,
    /// Species catalogue overriding the shipped one.
    #[arg(long, global = true, value_name = "PATH")]
    catalogue: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Derived recoil, coupling and loss rates for every catalogued species.
    #[command(after_help = manifest::defaults_help(&["cavity", "table1"]))]
    Table1,
    /// Position-averaged force against Doppler rate for several detunings.
    #[command(after_help = manifest::defaults_help(&["forcescan"]))]
    Forcescan,
    /// Position-resolved momentum diffusion of one standing wave.
    #[command(after_help = manifest::defaults_help(&["diffscan"]))]
    Diffscan,
    /// Multimode friction of a confocal resonator and its growth with mode count.
    #[command(after_help = manifest::defaults_help(&["confocal"]))]
    Confocal,
    /// Langevin ensemble in one pumped standing wave.
    #[command(after_help = manifest::defaults_help(&["cool"]))]
    Cool,
    /// Cavity, absorption and scattering diffusion per species and pump geometry.
    #[command(after_help = manifest::defaults_help(&["cavity", "pump", "budget"]))]
    Budget,
    /// Weak-coupling and shearing checks per species.
    #[command(after_help = manifest::defaults_help(&["cavity", "pump", "validate"]))]
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Table1 => "table1",
            Command::Forcescan => "forcescan",
            Command::Diffscan => "diffscan",
            Command::Confocal => "confocal",
            Command::Cool => "cool",
            Command::Budget => "budget",
            Command::Validate => "validate",
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        None => ExperimentConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            if path.extension().is_some_and(|e| e == "json") {
                ExperimentConfig::parse(&manifest::config_from_manifest(&text)?)?
            } else {
                ExperimentConfig::parse(&text)?
            }
        }
    };
    if let Some(seed) = common.seed {
        config.forcescan.seed = seed;
        config.cool.seed = seed;
    }
    if let Some(path) = &common.catalogue {
        config.catalogue = Some(path.clone());
    }
    Ok(config)
}

fn apply_tolerance(config: &mut ExperimentConfig, command: Command, tolerance: f64) -> Result<(), Error> {
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    match command {
        Command::Table1 => config.table1.tolerance = tolerance,
        Command::Cool => config.cool.tolerance = tolerance,
        Command::Confocal => config.confocal.grid_tolerance = tolerance,
        _ => log::warn!("--tolerance has no effect on {}", command.name()),
    }
    Ok(())
}

fn execute(command: Command, config: &ExperimentConfig) -> Result<ExperimentOutput, Error> {
    match command {
        Command::Table1 => run_table1(config, &config.load_catalogue(None)?),
        Command::Forcescan => run_forcescan(config),
        Command::Diffscan => run_diffscan(config),
        Command::Confocal => run_confocal(config),
        Command::Cool => run_cool(config),
        Command::Budget => run_budget(config, &config.load_catalogue(None)?),
        Command::Validate => run_validate(config, &config.load_catalogue(None)?),
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let mut config = load_config(&cli.common)?;
    if let Some(t) = cli.common.tolerance {
        apply_tolerance(&mut config, cli.command, t)?;
    }
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.common.out)?;
    let started = Instant::now();
    let output = execute(cli.command, &config)?;
    let elapsed = started.elapsed().as_secs_f64();
    let inputs: Vec<&Path> = [cli.common.config.as_deref(), config.catalogue.as_deref()]
        .into_iter()
        .flatten()
        .collect();
    manifest::write_outputs(&cli.common.out, &config, &output, &inputs, elapsed)?;
    println!(
        "{}: {} ({} table(s) in {}, {:.2} s)",
        output.name,
        if output.passed { "ok" } else { "validation failed" },
        output.tables.len(),
        cli.common.out.display(),
        elapsed
    );
    println!("{}", serde_json::to_string_pretty(&output.summary).unwrap_or_default());
    Ok(output.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}
