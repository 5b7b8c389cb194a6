use std::path::PathBuf;

use amcbo_harness::config::{PotentialName, SweepSection};
use amcbo_harness::{reference, run_experiment, run_sweep, table, Overrides, SweepAxis};
use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "amcbo",
    version,
    about = "Adaptive multi-objective consensus-based optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (R seeded runs) and write metrics, manifests and a summary.
    Run {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Repeat the experiment for each value of one parameter.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Parameter to vary.
        #[arg(long, value_enum)]
        axis: Option<SweepAxis>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
    },
    /// Generate (or fetch from the cache) a reference front and write it as CSV.
    Reference {
        #[command(flatten)]
        overrides: Overrides,
        /// Number of front points.
        #[arg(long)]
        size: Option<usize>,
        /// Interaction spreading the points.
        #[arg(long, value_enum)]
        reference_potential: Option<PotentialName>,
    },
    /// Recompute the summary table from a run or sweep directory.
    Table {
        /// Directory written by `run` or `sweep`.
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { overrides } => {
            let config = overrides.resolve()?;
            let result = run_experiment(&config)?;
            print!("{}", result.summary.to_csv());
        }
        Command::Sweep {
            overrides,
            axis,
            values,
        } => {
            let mut config = overrides.resolve()?;
            if axis.is_some() || values.is_some() {
                let current = config.sweep.take();
                config.sweep = Some(SweepSection {
                    axis: axis
                        .or(current.as_ref().map(|s| s.axis))
                        .unwrap_or(SweepAxis::Tau),
                    values: values.or(current.map(|s| s.values)).unwrap_or_default(),
                });
            }
            let result = run_sweep(&config)?;
            print!("{}", result.summary().to_csv());
        }
        Command::Reference {
            overrides,
            size,
            reference_potential,
        } => {
            let mut config = overrides.resolve()?;
            if let Some(m) = size {
                config.metrics.reference_size = m;
            }
            if let Some(p) = reference_potential {
                config.metrics.reference_potential = p;
            }
            config.validate()?;
            let (front, _) = reference::load_or_generate(&config, &config.run.cache_dir())?;
            let path = config.run.out.join("reference.csv");
            reference::write(&path, &front, &reference::describe(&config))?;
            println!("{}", path.display());
        }
        Command::Table { dir } => {
            let summary = table::recompute(&dir)?;
            std::fs::write(dir.join("summary.csv"), summary.to_csv())?;
            print!("{}", summary.to_csv());
        }
    }
    Ok(())
}
