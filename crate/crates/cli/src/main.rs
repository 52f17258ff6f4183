use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use locsim::experiment::{self, ExperimentConfig, ExperimentError, NetlistSource};
use locsim::export;

/// Single-photon linear-optics simulator.
#[derive(Debug, Parser)]
#[command(name = "locsim", version, about)]
struct Cli {
    /// TOML experiment config. Built-in defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the config netlist.
    #[arg(long, global = true)]
    netlist: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan the phase parameter and record per-detector click rates.
    Fringe,
    /// Correlate the configured detector pair.
    Hbt,
    /// Set the dark-port phase, then check suppression and antibunching together.
    #[command(name = "dualty-check", alias = "duality")]
    Duality,
    /// Write the raw emission and click streams.
    Simulate,
    /// Lint the netlist and config without simulating.
    Validate,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &cli.netlist {
        cfg.netlist = NetlistSource::File(p.clone());
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)
        .map_err(ExperimentError::Io)
        .with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_report(dir: &Path, report: &str) -> Result<()> {
    fs::write(dir.join("report.txt"), report).map_err(ExperimentError::Io)?;
    print!("{report}");
    Ok(())
}

fn written(r: export::Result<()>) -> Result<()> {
    Ok(r.map_err(ExperimentError::Io)?)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if !matches!(cli.command, Command::Validate) {
        fs::create_dir_all(&cli.out)
            .map_err(ExperimentError::Io)
            .with_context(|| format!("cannot create {}", cli.out.display()))?;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Fringe => {
            let r = experiment::run_fringe(&cfg)?;
            written(export::write_fringe_csv(
                create(out, "fringe.csv")?,
                &r.result,
            ))?;
            write_report(out, &export::fringe_report(&r))?;
        }
        Command::Hbt => {
            let r = experiment::run_hbt(&cfg)?;
            let name = format!("g2_{}{}.csv", r.pair.0, r.pair.1);
            written(export::write_histogram_csv(
                create(out, &name)?,
                &r.histogram,
            ))?;
            write_report(out, &export::hbt_report(&r))?;
        }
        Command::Duality => {
            let r = experiment::run_duality(&cfg)?;
            let name = format!("g2_{}{}.csv", r.hbt.pair.0, r.hbt.pair.1);
            written(export::write_histogram_csv(
                create(out, &name)?,
                &r.hbt.histogram,
            ))?;
            write_report(out, &export::duality_report(&r))?;
        }
        Command::Simulate => {
            let (em, recs) = experiment::run_simulate(&cfg)?;
            written(export::write_emissions_csv(
                create(out, "emissions.csv")?,
                &em,
            ))?;
            written(export::write_clicks_csv(create(out, "clicks.csv")?, &recs))?;
            println!("emissions: {}", em.len());
            for r in &recs {
                println!("clicks {}: {}", r.detector_id, r.len());
            }
        }
        Command::Validate => {
            for line in experiment::validate(&cfg)? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<ExperimentError>())
        .map_or(2, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
