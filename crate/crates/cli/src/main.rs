//! `timebin` — run, sweep, and analyze simulated spin-photon time-bin
//! entanglement experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 insufficient signal.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use timebin_core::config::{ExperimentConfig, Scenario};
use timebin_core::report::{events_from_csv, sweep_to_csv, write_outputs, OutputFormat};
use timebin_core::runner::{run_phase_trace, run_scenario, sweep};
use timebin_core::tomography::estimate;
use timebin_core::Error;

#[derive(Parser)]
#[command(
    name = "timebin",
    about = "Monte Carlo simulator of spin-photon time-bin entanglement distribution",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigSource {
    /// Flat key-value config file (starts from its scenario's preset).
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Scenario preset: red-zz, telecom-zz, telecom-x, telecom-y,
    /// noise-budget.
    #[arg(long, value_name = "SCENARIO")]
    preset: Option<String>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of heralded events to accumulate.
    #[arg(long)]
    trials: Option<u64>,
    /// Run trials/cycles across worker threads (bit-identical to serial).
    #[arg(long)]
    parallel: Option<bool>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => ExperimentConfig::from_file(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name.parse::<Scenario>()?),
            (None, None) => {
                return Err(Error::Config(
                    "provide either --config FILE or --preset SCENARIO".into(),
                ))
            }
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(parallel) = self.parallel {
            cfg.parallel = parallel;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write report.json plus event/phase data files.
    Run {
        #[command(flatten)]
        source: ConfigSource,
        /// Output directory (default: current directory).
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        /// Data file format.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Write the fully resolved config to this path and continue.
        #[arg(long, value_name = "FILE")]
        dump_config: Option<PathBuf>,
    },
    /// Run the scenario once per value of one numeric parameter.
    Sweep {
        #[command(flatten)]
        source: ConfigSource,
        /// Dotted parameter path, e.g. conversion.snr.
        #[arg(long, value_name = "PATH")]
        param: String,
        /// Comma-separated values, e.g. 4.8,6.25,7.7.
        #[arg(long, value_name = "LIST")]
        values: String,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Exercise only the stabilization scheduler and export the phase trace.
    PhaseTrace {
        #[command(flatten)]
        source: ConfigSource,
        /// Number of 1-second cycles to simulate.
        #[arg(long, default_value_t = 1000)]
        cycles: u64,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Re-run the tomography analysis over a previously written event CSV.
    Report {
        /// Event CSV produced by `run`.
        #[arg(long, value_name = "FILE")]
        events: PathBuf,
        #[command(flatten)]
        source: ConfigSource,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            source,
            out_dir,
            format,
            dump_config,
        } => {
            let cfg = source.load()?;
            if let Some(path) = dump_config {
                std::fs::write(&path, cfg.to_flat_string())?;
                eprintln!("wrote {}", path.display());
            }
            let format: OutputFormat = format.parse()?;
            let output = run_scenario(&cfg)?;
            let written = write_outputs(&output, &out_dir, format)?;
            for path in &written {
                eprintln!("wrote {}", path.display());
            }
            print_summary(&output.report);
            Ok(())
        }
        Command::Sweep {
            source,
            param,
            values,
            out_dir,
            format,
        } => {
            let cfg = source.load()?;
            let values = parse_values(&values)?;
            let format: OutputFormat = format.parse()?;
            let rows = sweep(&cfg, &param, &values)?;
            std::fs::create_dir_all(&out_dir)?;
            let table_path = out_dir.join("sweep.csv");
            std::fs::write(&table_path, sweep_to_csv(&rows))?;
            eprintln!("wrote {}", table_path.display());
            for (i, row) in rows.iter().enumerate() {
                let dir = out_dir.join(format!("point_{i:03}"));
                write_outputs(&row.output, &dir, format)?;
            }
            println!("{}", sweep_to_csv(&rows));
            Ok(())
        }
        Command::PhaseTrace {
            source,
            cycles,
            out_dir,
            format,
        } => {
            let cfg = source.load()?;
            let trace = run_phase_trace(&cfg, cycles)?;
            std::fs::create_dir_all(&out_dir)?;
            match format.parse()? {
                OutputFormat::Csv => {
                    let path = out_dir.join("phase_trace.csv");
                    std::fs::write(&path, trace.to_csv())?;
                    eprintln!("wrote {}", path.display());
                }
                OutputFormat::Json => {
                    let path = out_dir.join("phase_trace.json");
                    std::fs::write(&path, serde_json_string(&trace)?)?;
                    eprintln!("wrote {}", path.display());
                }
            }
            Ok(())
        }
        Command::Report { events, source } => {
            let cfg = source.load()?;
            let text = std::fs::read_to_string(&events)?;
            let records = events_from_csv(&text)?;
            let result = estimate(&records, &cfg.tomography)?;
            println!("{}", serde_json_string(&result)?);
            Ok(())
        }
    }
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value).map_err(Error::from)
}

fn parse_values(list: &str) -> Result<Vec<f64>, Error> {
    if list.trim().is_empty() {
        return Ok(Vec::new());
    }
    list.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad sweep value '{v}': {e}")))
        })
        .collect()
}

fn print_summary(report: &timebin_core::RunReport) {
    println!(
        "scenario {}  seed {}  heralds {}  events {}",
        report.scenario, report.seed, report.counts.heralds, report.counts.events
    );
    let fmt = |name: &str, c: &Option<timebin_core::tomography::ContrastEstimate>| match c {
        Some(c) => println!("  {name} = {:.4} ± {:.4}", c.value, c.std),
        None => println!("  {name} = (not measured)"),
    };
    fmt("E_X", &report.tomography.e_x);
    fmt("E_Y", &report.tomography.e_y);
    fmt("E_Z", &report.tomography.e_z);
    match &report.tomography.fidelity {
        Some(f) => println!(
            "  F = {:.4} ± {:.4}  ({:.1}σ above classical)",
            f.value, f.std, f.sigma_above_classical
        ),
        None => println!("  F = (requires all three bases)"),
    }
}
