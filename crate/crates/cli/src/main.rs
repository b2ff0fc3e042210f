use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qbm_cli::{presets, CliError, Format, SimulationConfig};

#[derive(Parser)]
#[command(
    name = "qbm",
    version,
    about = "Energy backflow and non-Markovianity in quantum Brownian motion"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "qbm-out")]
        out: PathBuf,
    },
    /// Run a configuration over its sweep axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce a packaged figure configuration.
    Preset {
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// List the available presets.
        #[arg(long)]
        list: bool,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let format = cli.format;
    let files = match cli.command {
        Command::Run { config, out } => {
            let cfg = SimulationConfig::load(&config)?;
            if cfg.sweep.is_some() {
                return Err(CliError::Config(
                    "configuration has a sweep axis; use `qbm sweep`".into(),
                ));
            }
            qbm_cli::with_threads(cli.threads, || qbm_cli::run_to_dir(&cfg, &out, format))??
        }
        Command::Sweep { config, out } => {
            let cfg = SimulationConfig::load(&config)?;
            if cfg.sweep.is_none() {
                return Err(CliError::Config("configuration has no [sweep] axis".into()));
            }
            qbm_cli::with_threads(cli.threads, || qbm_cli::sweep_to_dir(&cfg, &out, format))??
        }
        Command::Preset { list: true, .. } | Command::Preset { name: None, .. } => {
            for name in presets::NAMES {
                let p = presets::get(name).expect("listed preset exists");
                println!("{name:10} {}", p.description);
            }
            return Ok(());
        }
        Command::Preset {
            name: Some(name), out, ..
        } => {
            let out = out.unwrap_or_else(|| PathBuf::from(&name));
            qbm_cli::with_threads(cli.threads, || qbm_cli::run_preset(&name, &out, format))??
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
