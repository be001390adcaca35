use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac::config::SnrGrid;
use isac::harness::single_map;
use isac::{run_experiment, to_csv, Experiment, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "isac", version, about = "Sensing-pilot OFDM ISAC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write a CSV table.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// ber-perfect-csi, ber-estimated-csi, nmse, doppler-error or ccdf
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the trial count of every experiment section.
        #[arg(long)]
        trials: Option<usize>,
        /// `start:stop:step` in dB, or a single value.
        #[arg(long)]
        snr: Option<SnrGrid>,
    },
    /// Dump the correlation map of one sensing frame as `k,l,vd` CSV.
    Map {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10.0)]
        snr: f64,
        /// Doppler grid size; defaults to the first configured size.
        #[arg(long)]
        doppler_taps: Option<usize>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            experiment,
            out,
            seed,
            trials,
            snr,
        } => {
            let mut cfg = load(&config, seed)?;
            if let Some(t) = trials {
                cfg.comm.trials = t;
                cfg.sensing.trials = t;
                cfg.ccdf.trials = t;
            }
            if let Some(snr) = snr {
                cfg.snr_db = snr;
            }
            log::info!("running {experiment} (config {})", cfg.config_hash());
            let rows = run_experiment(&cfg, experiment)?;
            write_out(Some(&out), &to_csv(&rows))?;
            log::info!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Map {
            config,
            out,
            seed,
            snr,
            doppler_taps,
        } => {
            let cfg = load(&config, seed)?;
            let n = doppler_taps.unwrap_or(cfg.sensing.doppler_taps[0]);
            let (report, targets) = single_map(&cfg, n, snr)?;
            for p in &targets.paths {
                log::info!("target: delay {} taps, Doppler {:.3} taps", p.delay_taps, p.doppler_taps);
            }
            for d in &report.detections {
                log::info!("detection: delay {}, Doppler {}, metric {:.4}", d.delay, d.doppler, d.metric);
            }
            let mut text = String::new();
            report.map.write_csv(&mut text).expect("writing to a String cannot fail");
            write_out(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
