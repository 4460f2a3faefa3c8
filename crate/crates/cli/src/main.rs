use anyhow::Result;
use clap::{Parser, Subcommand};
use lvdelay_cli::presets::{reproduce, Figure};
use lvdelay_cli::report::ScenarioReport;
use lvdelay_cli::scenario;
use lvdelay_cli::ScenarioConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Numerical laboratory for a delayed predator-prey system: simulate the
/// delay and age-structured models, verify Lyapunov monotonicity, construct
/// the delay-length periodic orbit and certify characteristic spectra.
#[derive(Parser)]
#[command(name = "lvdelay", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Thresholds, equilibria, periodicity index and the partition label of
    /// the configured initial condition; no integration.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the delay system from the configured initial condition and
    /// run the toggled analyses.
    SimulateDde {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate the age-structured model directly (initial condition of kind
    /// "pde").
    SimulatePde {
        #[arg(long)]
        config: PathBuf,
    },
    /// Construct the delay-length periodic orbit when the periodicity index
    /// exceeds one.
    FindOrbit {
        #[arg(long)]
        config: PathBuf,
        /// Sample intervals per period.
        #[arg(long, default_value_t = 1024)]
        samples: usize,
    },
    /// Roots of the characteristic quasi-polynomial in a complex rectangle,
    /// certified by a winding count.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = -0.01, allow_hyphen_values = true)]
        re_min: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        re_max: f64,
        #[arg(long, default_value_t = -50.0, allow_hyphen_values = true)]
        im_min: f64,
        #[arg(long, default_value_t = 50.0, allow_hyphen_values = true)]
        im_max: f64,
        /// Newton seeds per rectangle side.
        #[arg(long, default_value_t = 24)]
        grid: usize,
    },
    /// Run a built-in preset and check its quoted values; exits with status 2
    /// on a reproduction mismatch.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        /// Output directory (default `out/<figure>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Path) -> Result<(ScenarioConfig, PathBuf)> {
    let parsed = ScenarioConfig::from_path(config)?;
    let base = config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((parsed, base))
}

fn summarize(report: &ScenarioReport) {
    if let Some(index) = report.periodicity_index {
        println!("periodicity index: {index:.6}");
    }
    if let Some(partition) = report.partition {
        println!("partition: {partition}");
    }
    if let Some(verdict) = &report.verdict {
        println!("verdict: {}", serde_json::to_string(verdict).unwrap_or_default());
    }
    if let Some(d) = report.distances.final_state_distance {
        println!("final distance to E*: {d:.6e}");
    }
    println!("files: {}", report.files.join(", "));
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze { config } => {
            let (cfg, base) = load(&config)?;
            summarize(&scenario::analyze(&cfg, &base)?);
        }
        Command::SimulateDde { config } => {
            let (cfg, base) = load(&config)?;
            summarize(&scenario::run(&cfg, &base)?);
        }
        Command::SimulatePde { config } => {
            let (cfg, base) = load(&config)?;
            summarize(&scenario::run_pde(&cfg, &base)?);
        }
        Command::FindOrbit { config, samples } => {
            let (cfg, _) = load(&config)?;
            summarize(&scenario::find_orbit(&cfg, samples)?);
        }
        Command::Spectrum {
            config,
            re_min,
            re_max,
            im_min,
            im_max,
            grid,
        } => {
            let (cfg, _) = load(&config)?;
            summarize(&scenario::spectrum(
                &cfg,
                (re_min, re_max),
                (im_min, im_max),
                grid,
            )?);
        }
        Command::Reproduce { figure, out } => {
            let outcome = reproduce(figure, out)?;
            println!("{}: {}", figure.name(), outcome.details);
            summarize(&outcome.report);
            if !outcome.matched {
                eprintln!("reproduction mismatch for {}", figure.name());
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
