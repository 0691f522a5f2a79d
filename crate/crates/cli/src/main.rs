use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noonpol_core::config::{Run, RunConfig};
use noonpol_core::estimator::{calibrate, track, GridSpec};
use noonpol_core::fisher::bounds_table;
use noonpol_core::kinetics::trajectory;
use noonpol_core::model::CANONICAL_SETTINGS;
use noonpol_core::pipeline::run_to_dir;
use noonpol_core::simulator::simulate_run;
use noonpol_core::{io, Error, Result};

/// Two-photon polarimetric tracking of sucrose inversion.
#[derive(Debug, Parser)]
#[command(name = "noonpol", version, about)]
struct Cli {
    /// Override the random seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a reaction run; writes the record and truth tables.
    Simulate {
        config: PathBuf,
        /// Output directory.
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Estimate phase and visibility per cycle from a record table.
    Estimate {
        records: PathBuf,
        /// Water record table, or a reference phase in radians.
        #[arg(long)]
        calibration: String,
        /// Run config supplying settings and grid; defaults apply without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Tabulate phase and visibility bounds over one phase period.
    Crb {
        #[arg(long)]
        v_min: f64,
        #[arg(long)]
        v_max: f64,
        /// Number of phase points.
        #[arg(long, default_value_t = 256)]
        grid: usize,
        /// Coincidences per bound.
        #[arg(long, default_value_t = 1.0)]
        n_events: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Tabulate the reaction's composition, rotation and phase.
    Kinetics {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Calibrate, simulate, estimate and compare against the truth.
    Pipeline {
        config: PathBuf,
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
        /// Print the report as JSON on stdout.
        #[arg(long)]
        json_summary: bool,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Run> {
    let mut run = RunConfig::load(path)?.resolve()?;
    if let Some(s) = seed {
        run.probe.seed = s;
    }
    Ok(run)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out_dir } => {
            let run = load(&config, cli.seed)?;
            let sim = simulate_run(&run.reaction, &run.probe, &run.drift, run.duration)?;
            create_dir(&out_dir)?;
            io::write_records(&out_dir.join(&run.output.records), &sim.records)?;
            io::write_truth(&out_dir.join(&run.output.truth), &sim.truth)?;
        }
        Command::Estimate {
            records,
            calibration,
            config,
            out,
        } => {
            let (settings, grid) = match &config {
                Some(path) => {
                    let run = load(path, cli.seed)?;
                    (run.probe.settings, run.grid)
                }
                None => (CANONICAL_SETTINGS.to_vec(), GridSpec::default()),
            };
            let records = io::read_records(&records)?;
            if records.is_empty() {
                return Err(Error::Input("record table has no rows".into()));
            }
            let phi_ref = match calibration.trim().parse::<f64>() {
                Ok(phi) if phi.is_finite() => phi,
                Ok(phi) => return Err(Error::Input(format!("calibration phase {phi} is not finite"))),
                Err(_) => {
                    let water = io::read_records(Path::new(&calibration))?;
                    calibrate(&water, &settings, &grid)?.phi_ref
                }
            };
            let t = track(&records, phi_ref, &settings, &grid)?;
            for w in &t.warnings {
                eprintln!("warning: {w}");
            }
            io::write_estimates(&out, &t.estimates)?;
        }
        Command::Crb {
            v_min,
            v_max,
            grid,
            n_events,
            out,
        } => {
            io::write_bounds(&out, &bounds_table(v_min, v_max, grid, n_events)?)?;
        }
        Command::Kinetics { config, out } => {
            let run = load(&config, cli.seed)?;
            let step = run.output.kinetics_step_s.unwrap_or(run.probe.cycle_s);
            io::write_kinetics(&out, &trajectory(&run.reaction, run.duration, step)?)?;
        }
        Command::Pipeline {
            config,
            out_dir,
            json_summary,
        } => {
            let run = load(&config, cli.seed)?;
            let out = run_to_dir(&run, &out_dir)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let r = &out.report;
            if json_summary {
                let s = serde_json::to_string_pretty(r).map_err(|e| Error::Input(e.to_string()))?;
                println!("{s}");
            } else {
                let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.1} s"));
                println!("cycles            {}", r.cycles);
                println!("phi_ref           {:.6} rad", r.phi_ref_rad);
                println!("rmse              {:.6} rad", r.rmse_rad);
                println!("mean crb sigma    {:.6} rad", r.mean_crb_sigma_rad);
                println!("coverage (2σ)     {:.3}", r.coverage_2sigma);
                println!("true crossing     {}", opt(r.true_crossing_s));
                println!("est. crossing     {}", opt(r.estimated_crossing_s));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}
