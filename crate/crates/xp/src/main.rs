use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hfi_xp::noise_study::{run_noise_study, NoiseStudyError};
use hfi_xp::output::{emit_csv, ensure_dir, write_toml, OutputError};
use hfi_xp::scenario::RunError;
use hfi_xp::sweep::{run_order_study, StudyError};
use hfi_xp::{run_scenario, Scenario};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "hfi-xp", version, about = "Run injection-based output feedback experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Simulate one scenario; writes trajectory.csv and metrics.toml.
    Run { config: PathBuf, outdir: PathBuf },
    /// Order study over the scenario's `epsilons`; writes order_study.csv and order_fits.toml.
    Sweep { config: PathBuf, outdir: PathBuf },
    /// Noise study; writes noise_study.toml, trajectory.csv and metrics.toml.
    Noise { config: PathBuf, outdir: PathBuf },
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Numerical(_) => Failure::Numerical(e.to_string()),
            RunError::Setup(_) => Failure::Config(e.to_string()),
        }
    }
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        match &e {
            StudyError::Averaging(hfi_core::averaging::AveragingError::Sim(_)) => Failure::Numerical(e.to_string()),
            StudyError::Field { .. } => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<NoiseStudyError> for Failure {
    fn from(e: NoiseStudyError) -> Self {
        match e {
            NoiseStudyError::Run(r) => r.into(),
            other => Failure::Config(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct FitsFile<'a> {
    fits: &'a [hfi_xp::sweep::SeriesFit],
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure::Config(e.to_string()))
}

fn run(verb: Verb) -> Result<(), Failure> {
    match verb {
        Verb::Run { config, outdir } => {
            let sc = load(&config)?;
            let res = run_scenario(&sc)?;
            ensure_dir(&outdir)?;
            emit_csv(&res, &outdir.join("trajectory.csv"))?;
            write_toml(&res.metrics, &outdir.join("metrics.toml"))?;
        }
        Verb::Sweep { config, outdir } => {
            let sc = load(&config)?;
            let study = run_order_study(&sc, &sc.epsilons)?;
            ensure_dir(&outdir)?;
            let path = outdir.join("order_study.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Io(e.to_string()))?;
            for row in &study.rows {
                w.serialize(row).map_err(|e| Failure::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| Failure::Io(e.to_string()))?;
            write_toml(&FitsFile { fits: &study.fits }, &outdir.join("order_fits.toml"))?;
        }
        Verb::Noise { config, outdir } => {
            let sc = load(&config)?;
            let (study, res) = run_noise_study(&sc)?;
            ensure_dir(&outdir)?;
            write_toml(&study, &outdir.join("noise_study.toml"))?;
            emit_csv(&res, &outdir.join("trajectory.csv"))?;
            write_toml(&res.metrics, &outdir.join("metrics.toml"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hfi-xp: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
