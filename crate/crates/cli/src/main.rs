use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gauge_cspi::commands::{self, Context, IngestOptions, Outcome};
use gauge_cspi::price_sheet::SheetFormat;
use gauge_cspi::CliError;
use gauge_cspi_core::estimator::DEFAULT_OVERLAP_BAND;
use gauge_cspi_core::market::DEFAULT_GAP_FACTOR;

/// Path-integral Monte Carlo for the stock price distribution of a
/// gauge-invariant market model.
#[derive(Parser, Debug)]
#[command(name = "gauge-cspi", version)]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Orderless model against the analytic normal.
    Baseline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full model with order flow.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Brute-force quadrature for tiny instances (N <= 3, M <= 4).
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 32)]
        grid_points: usize,
    },
    /// Log-return histogram of a price sheet.
    Ingest {
        data: PathBuf,
        /// Sampling interval in seconds.
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        /// Histogram half-width in log-return.
        #[arg(long)]
        range: f64,
        /// Gaps longer than this many intervals break the series.
        #[arg(long, default_value_t = DEFAULT_GAP_FACTOR)]
        gap_factor: f64,
        /// Field separator; detected from the header when omitted.
        #[arg(long)]
        delimiter: Option<char>,
        #[arg(long, default_value = "timestamp")]
        timestamp_column: String,
        #[arg(long, default_value = "price")]
        price_column: String,
        /// Also write the normal PDF for this volatility (per sqrt second).
        #[arg(long)]
        reference_sigma: Option<f64>,
    },
    /// Compares two PDF files with identical bins.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Agreement band in decades of density.
        #[arg(long, default_value_t = DEFAULT_OVERLAP_BAND)]
        band: f64,
    },
    /// Moment table of a PDF file.
    Moments { pdf: PathBuf },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let ctx = Context::new(cli.out, cli.workers, cli.seed)?;
    match cli.command {
        Command::Baseline { config } => commands::cmd_baseline(&config, &ctx),
        Command::Simulate { config } => commands::cmd_simulate(&config, &ctx),
        Command::Oracle { config, grid_points } => commands::cmd_oracle(&config, grid_points, &ctx),
        Command::Ingest {
            data,
            tau,
            bins,
            range,
            gap_factor,
            delimiter,
            timestamp_column,
            price_column,
            reference_sigma,
        } => {
            let delimiter = match delimiter {
                Some(d) if d.is_ascii() => Some(d as u8),
                Some(d) => return Err(CliError::config(format!("delimiter must be ASCII, got {d:?}"))),
                None => None,
            };
            let opts = IngestOptions {
                gap_factor,
                format: SheetFormat { delimiter, timestamp_column, price_column },
                reference_sigma,
                ..IngestOptions::new(tau, bins, range)
            };
            commands::cmd_ingest(&data, &opts, &ctx)
        }
        Command::Compare { a, b, band } => commands::cmd_compare(&a, &b, band, &ctx),
        Command::Moments { pdf } => commands::cmd_moments(&pdf, &ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            println!("wrote {}", outcome.manifest.display());
            for (k, v) in &outcome.summary {
                println!("{k}\t{v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
