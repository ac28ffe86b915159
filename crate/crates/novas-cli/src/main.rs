//! `novas`: simulate GARCH-type series, calibrate NoVaS transforms,
//! forecast squared returns, run rolling evaluations and Clark-West tests.
//!
//! Exit codes: 0 on success, 1 on runtime failure (one-line diagnostic on
//! stderr), 2 on usage errors.

mod commands;
mod config;
mod io;

use clap::{Args, Parser, Subcommand};
use config::ConfigFile;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "novas",
    version,
    about = "Model-free volatility forecasting with NoVaS transforms"
)]
struct Cli {
    /// Flat `key = value` configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: available parallelism; the NOVAS_THREADS
    /// environment variable overrides the default).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Where the input series comes from: a returns CSV, a prices CSV, or a
/// built-in simulation model.
#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Returns CSV (`t,return`).
    #[arg(long)]
    returns: Option<PathBuf>,

    /// Closing-price CSV (`date,close`); converted to percent log-returns.
    #[arg(long)]
    prices: Option<PathBuf>,

    /// Simulation model 1..=8.
    #[arg(long)]
    model: Option<u8>,

    /// Number of simulated returns.
    #[arg(long)]
    n: Option<usize>,

    /// Simulation seed.
    #[arg(long)]
    sim_seed: Option<u64>,

    /// Route simulated values through an exponentiated price path.
    #[arg(long)]
    through_prices: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated return series as CSV.
    Simulate {
        /// Model 1..=8.
        #[arg(long)]
        model: Option<u8>,
        /// Series length.
        #[arg(long)]
        n: Option<usize>,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Route generated values through an exponentiated price path.
        #[arg(long)]
        through_prices: bool,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate a NoVaS transform and print the selected coefficients.
    Calibrate {
        /// Method kind: s, e, gs, ge, ga, pge, pga.
        #[arg(long)]
        kind: Option<String>,
        /// Fixed scale-invariant weight.
        #[arg(long)]
        alpha: Option<f64>,
        /// Reduced-budget grids.
        #[arg(long)]
        fast: bool,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Forecast squared returns from the end of the input series.
    Forecast {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Comma-separated aggregation horizons.
        #[arg(long)]
        horizons: Option<String>,
        /// Risk criterion: l1 or l2.
        #[arg(long)]
        criterion: Option<String>,
        /// Innovation source: normal (trimmed) or bootstrap.
        #[arg(long)]
        source: Option<String>,
        /// Simulated paths per ensemble.
        #[arg(long)]
        paths: Option<usize>,
        /// Forecast seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        fast: bool,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Rolling pseudo-out-of-sample evaluation with relative-P tables.
    Evaluate {
        /// Comma-separated methods (ge, ga, pge, pga, garch).
        #[arg(long)]
        methods: Option<String>,
        /// Comma-separated aggregation horizons.
        #[arg(long)]
        horizons: Option<String>,
        /// Rolling window width.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Variant selection: oracle or fixed.
        #[arg(long)]
        selection: Option<String>,
        /// Alpha for fixed selection.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        criterion: Option<String>,
        #[arg(long)]
        source: Option<String>,
        /// Recalibrate transforms every k-th window.
        #[arg(long)]
        recalibrate_every: Option<usize>,
        #[arg(long)]
        fast: bool,
        /// Output directory for report.csv, report.txt, series.csv and
        /// manifest.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Clark-West test comparing two forecast files against realized values.
    Cwtest {
        /// Realized values CSV (`t,return` shape).
        #[arg(long)]
        realized: Option<PathBuf>,
        /// Parsimonious model forecasts CSV.
        #[arg(long)]
        small: Option<PathBuf>,
        /// Larger model forecasts CSV.
        #[arg(long)]
        large: Option<PathBuf>,
    },
}

fn init_threads(flag: Option<usize>) {
    let from_env = std::env::var("NOVAS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(from_env) {
        // Ignore failure: the global pool can only be set once (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let config = match cli.config.as_deref().map(ConfigFile::load) {
        Some(Ok(c)) => c,
        Some(Err(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
        None => ConfigFile::default(),
    };
    if let Err(e) = commands::run(cli.command, &config) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
