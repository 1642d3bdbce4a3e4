mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Options, DEFAULT_P_LIST};
use crate::config::{RawConfig, RunConfig};
use crate::error::CliError;

/// Quantum walk on a phase-space circle: the standard stepped walk against
/// the continuous coin+shift evolution it approximates.
#[derive(Parser)]
#[command(name = "dtqw", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-step phase distributions of both dynamics.
    Simulate(Common),
    /// Multistart search for the frequencies that best reproduce the walk.
    Optimize(Common),
    /// Long-run Hellinger distance, spread and negativity of both dynamics.
    Compare(Common),
    /// Spread and Hellinger distance under coin dephasing.
    Decohere(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweep points and optimizer restarts.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Step count; 0 stops at π peak separation.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// optimize: run every r in {1, 2, 4, 8, 10}.
    #[arg(long)]
    r_sweep: bool,
    /// decohere: comma-separated dephasing strengths.
    #[arg(long)]
    p_list: Option<String>,
    /// simulate/compare/decohere: optimize the frequencies first.
    #[arg(long)]
    optimize_first: bool,
    /// Override a config key, e.g. --set d=125.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, Options), CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        for pair in &self.overrides {
            raw.set_pair(pair)?;
        }
        if let Some(seed) = self.seed {
            raw.set("seed", &seed.to_string())?;
        }
        if let Some(steps) = self.steps {
            raw.set("steps", &steps.to_string())?;
        }
        if let Some(restarts) = self.restarts {
            raw.set("restarts", &restarts.to_string())?;
        }
        let p_list = match &self.p_list {
            Some(text) => commands::parse_p_list(text)?,
            None => DEFAULT_P_LIST.to_vec(),
        };
        if self.jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        Ok((
            raw.resolve()?,
            Options {
                out: self.out.clone(),
                optimize_first: self.optimize_first,
                r_sweep: self.r_sweep,
                p_list,
            },
        ))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, action): (&Common, fn(&RunConfig, &Options) -> _) = match &cli.command {
        Cmd::Simulate(c) => (c, commands::simulate),
        Cmd::Optimize(c) => (c, commands::optimize_cmd),
        Cmd::Compare(c) => (c, commands::compare),
        Cmd::Decohere(c) => (c, commands::decohere),
    };
    let (run_cfg, opts) = common.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let manifest = pool.install(|| action(&run_cfg, &opts))?;
    println!(
        "wrote {} files to {}",
        manifest.emitted_files.len(),
        manifest.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dtqw: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
