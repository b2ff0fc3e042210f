//! Configuration, orchestration and output for the `qbm` command.

pub mod config;
pub mod emit;
pub mod error;
pub mod presets;
pub mod run;
pub mod svg;

use std::path::{Path, PathBuf};

use log::info;

pub use config::{Output, SimulationConfig, SweepAxis, SweepParameter};
pub use emit::{emit_run, emit_sweep, read_config_echo, Format};
pub use error::{CliError, CliResult};
pub use run::{run, sweep, with_threads, ResultBundle, SweepTable};

/// Runs a single configuration and writes its files into `out`.
pub fn run_to_dir(cfg: &SimulationConfig, out: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    let bundle = run(cfg)?;
    emit_run(&bundle, out, format)
}

/// Runs a sweep and writes its files into `out`. Fails only if every row failed.
pub fn sweep_to_dir(cfg: &SimulationConfig, out: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    let table = sweep(cfg)?;
    let files = emit_sweep(&table, out, format)?;
    if table.failures() == table.rows.len() {
        let first = table
            .rows
            .iter()
            .find_map(|r| r.outcome.as_ref().err())
            .cloned()
            .unwrap_or_default();
        return Err(CliError::numeric(
            "every sweep row failed",
            qbm_core::Error::InvalidParameter(first),
        ));
    }
    Ok(files)
}

/// Runs whichever of `run`/`sweep` the configuration calls for.
pub fn execute(cfg: &SimulationConfig, out: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    if cfg.sweep.is_some() {
        sweep_to_dir(cfg, out, format)
    } else {
        run_to_dir(cfg, out, format)
    }
}

pub fn run_preset(name: &str, out: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    let preset = presets::get(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown preset '{name}'; available: {}",
            presets::NAMES.join(", ")
        ))
    })?;
    info!("preset {}: {}", preset.name, preset.description);
    let mut files = Vec::new();
    for (label, cfg) in &preset.runs {
        let dir = if label.is_empty() {
            out.to_path_buf()
        } else {
            out.join(label)
        };
        files.extend(execute(cfg, &dir, format)?);
    }
    Ok(files)
}
