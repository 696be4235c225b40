use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use marloc::breakdown::BreakdownConfig;
use marloc::io::{breakdown_command, estimate_command, exit_code, load_csv, Config, EstimateOptions};
use marloc::sim::{generate_replicate, run_study, run_sweep, Estimator};
use marloc::{Error, Result};

#[derive(Parser)]
#[command(name = "marloc", version, about = "Robust location of responses missing at random")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "MARLOC_THREADS")]
    threads: Option<usize>,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the response location of a CSV dataset.
    Estimate(EstimateArgs),
    /// Monte Carlo study on the default design, clean or contaminated.
    Simulate(SimulateArgs),
    /// Empirical finite-sample breakdown over a grid of contamination sizes.
    Breakdown(BreakdownArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV with a header row.
    data: PathBuf,
    /// mean, median, mm90 or mm95.
    #[arg(long)]
    functional: Option<String>,
    /// Report a standard error and confidence interval.
    #[arg(long)]
    se: bool,
    #[arg(long)]
    response: Option<String>,
    /// 0/1 column marking observed responses.
    #[arg(long)]
    indicator: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// `x*` or `x*:start:end:step`; sweeps y* and prints MSE curves as CSV.
    #[arg(long)]
    contaminate: Option<String>,
    /// Print the clean-study table as CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct BreakdownArgs {
    /// Dataset to contaminate; a generated sample when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    functional: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Contamination sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    kappas: Option<Vec<f64>>,
    /// Seeded trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if let Some(t) = cli.threads.or(config.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let stdout = std::io::stdout().lock();
    match cli.command {
        Command::Estimate(a) => {
            config.functional = a.functional.or(config.functional);
            config.response = a.response.or(config.response);
            config.indicator = a.indicator.or(config.indicator);
            let dataset = load_csv(&a.data, &config.schema())?;
            let mut options = EstimateOptions::new(config.pipeline()?);
            options.se = a.se || config.se.unwrap_or(options.se);
            options.max_pairs = config.max_pairs;
            options.level = config.level;
            let report = estimate_command(&dataset, &options)?;
            match a.format {
                Format::Json => println!("{}", report.to_json()),
                Format::Text => print!("{}", report.to_text()),
            }
        }
        Command::Simulate(a) => {
            config.replications = a.replications.or(config.replications);
            config.n = a.n.or(config.n);
            config.contaminate = a.contaminate.or(config.contaminate);
            let scenario = config.scenario()?;
            if scenario.contamination.is_some() {
                let report = run_sweep(&scenario, &Estimator::ALL)?;
                report.write_csv(stdout)?;
                eprintln!("{} replications, {:.1} s", report.replications, report.runtime_secs);
            } else {
                let report = run_study(&scenario, &Estimator::ALL)?;
                if a.csv {
                    report.write_csv(stdout)?;
                } else {
                    print!("{}", report.to_table());
                }
            }
        }
        Command::Breakdown(a) => {
            config.functional = a.functional.or(config.functional);
            config.n = a.n.or(config.n);
            let sample = match &a.data {
                Some(path) => load_csv(path, &config.schema())?.sample,
                None => generate_replicate(&config.scenario()?, 0),
            };
            let pipeline = config.pipeline()?;
            let kappas = a
                .kappas
                .or(config.kappas.clone())
                .unwrap_or_else(|| vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45]);
            let trials = a.trials.or(config.trials).unwrap_or(10) as u64;
            let base_seed = config.seed.unwrap_or(0);
            let bconfig = BreakdownConfig {
                seeds: (base_seed..base_seed + trials).collect(),
                ..BreakdownConfig::default()
            };
            let report = breakdown_command(&sample, &pipeline, &kappas, &bconfig)?;
            report.write_csv(stdout)?;
            eprintln!(
                "{}: clean {:.6}, lower bound {}, first escape {}",
                pipeline.functional.name(),
                report.clean,
                report.lower_bound.map(|b| format!("{b:.4}")).unwrap_or_else(|| "-".into()),
                report.first_escape.map(|k| format!("{k:.4}")).unwrap_or_else(|| "none on grid".into())
            );
        }
    }
    Ok(())
}
