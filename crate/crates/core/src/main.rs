use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use solarcast::config::RunConfig;
use solarcast::pipeline::{run_forecast, run_report};
use solarcast::synth::{simulate, write_dataset, TruthConfig};
use solarcast::{Error, Result};

#[derive(Parser)]
#[command(name = "solarcast", version, about = "Probabilistic PV production trajectory forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset drawn from a known model instance.
    Simulate {
        #[arg(long)]
        days: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// First issue date (YYYY-MM-DD).
        #[arg(long)]
        start: Option<NaiveDate>,
        /// Amplitude of the slow sinusoidal intercept drift.
        #[arg(long)]
        drift: Option<f64>,
        #[arg(long)]
        drift_period: Option<f64>,
    },
    /// Rolling-window forecasts with verification.
    Forecast {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory with forecasts.csv, production.csv and mask.csv.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        model: Option<String>,
        /// Couple lead times with a Gaussian copula (`full` or `ar1`).
        #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "full")]
        copula: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        window_days: Option<String>,
        #[arg(long)]
        copula_window_days: Option<String>,
        #[arg(long)]
        iters: Option<String>,
        #[arg(long)]
        burn_in: Option<String>,
        #[arg(long)]
        samples: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        /// Comma-separated training window lengths for the sensitivity sweep.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        sweep_samples: Option<String>,
        /// Skip writing trajectories.csv.
        #[arg(long)]
        no_trajectories: bool,
    },
    /// Recompute scores and histograms from a forecast output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        histograms: PathBuf,
    },
}

fn simulate_cmd(
    days: usize,
    seed: u64,
    out: PathBuf,
    start: Option<NaiveDate>,
    drift: Option<f64>,
    drift_period: Option<f64>,
) -> Result<()> {
    let mut truth = TruthConfig {
        seed,
        ..TruthConfig::default()
    };
    if let Some(s) = start {
        truth.start = s;
    }
    if let Some(a) = drift {
        truth.drift_amplitude = a;
    }
    if let Some(p) = drift_period {
        truth.drift_period_days = p;
    }
    let data = simulate(days, &truth)?;
    write_dataset(&out, &data)?;
    println!("wrote {days} days to {}", out.display());
    Ok(())
}

fn forecast_cmd(cmd: Command) -> Result<()> {
    let Command::Forecast {
        config,
        data,
        from,
        to,
        model,
        copula,
        out,
        window_days,
        copula_window_days,
        iters,
        burn_in,
        samples,
        seed,
        sweep,
        sweep_samples,
        no_trajectories,
    } = cmd
    else {
        unreachable!()
    };
    let mut cfg = match &config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let overrides = [
        ("from", from),
        ("to", to),
        ("model", model),
        ("copula", copula),
        ("window_days", window_days),
        ("copula_window_days", copula_window_days),
        ("iters", iters),
        ("burn_in", burn_in),
        ("samples", samples),
        ("seed", seed),
        ("sweep", sweep),
        ("sweep_samples", sweep_samples),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if let Some(d) = data {
        cfg.data_dir = d;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if no_trajectories {
        cfg.write_trajectories = false;
    }
    cfg.validate()?;
    let run = run_forecast(&cfg)?;
    println!(
        "forecast {} dates with {} into {}",
        run.records.len(),
        run.label(),
        cfg.out_dir.display()
    );
    if run.jitter_events > 0 {
        eprintln!("note: {} factorizations needed diagonal jitter", run.jitter_events);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            days,
            seed,
            out,
            start,
            drift,
            drift_period,
        } => {
            if days == 0 {
                return Err(Error::Config {
                    field: "days",
                    reason: "must be at least 1".into(),
                });
            }
            simulate_cmd(days, seed, out, start, drift, drift_period)
        }
        cmd @ Command::Forecast { .. } => forecast_cmd(cmd),
        Command::Report { input, histograms } => {
            let report = run_report(&input, &histograms)?;
            println!("scored {} dates into {}", report.n_cases, histograms.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
