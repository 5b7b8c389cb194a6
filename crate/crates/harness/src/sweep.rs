//! Parameter sweeps: one experiment per value of a single axis.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use amcbo::ReferenceFront64;
use anyhow::{Context, Result};

use crate::config::{ExperimentConfig, SweepAxis};
use crate::experiment::{self, ExperimentResult, SummaryTable};
use crate::reference;

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// One experiment per value, in `values` order.
    pub experiments: Vec<ExperimentResult>,
}

impl SweepResult {
    /// All summary rows, one per value.
    pub fn summary(&self) -> SummaryTable {
        SummaryTable {
            rows: self
                .experiments
                .iter()
                .flat_map(|e| e.summary.rows.iter().cloned())
                .collect(),
        }
    }

    /// Long format: `value,metric,mean`, one line per (value, metric).
    pub fn long_csv(&self) -> String {
        let mut out = String::from("value,metric,mean\n");
        for (value, e) in self.values.iter().zip(&self.experiments) {
            if let Some(means) = e.means() {
                for (name, mean) in means.pairs() {
                    writeln!(out, "{value},{name},{mean:e}").unwrap();
                }
            }
        }
        out
    }

    /// Mean of `metric` at every sweep value (`None` where all runs failed).
    pub fn series(&self, metric: &str) -> Vec<(f64, Option<f64>)> {
        self.values
            .iter()
            .zip(&self.experiments)
            .map(|(&v, e)| (v, e.means().and_then(|m| m.get(metric))))
            .collect()
    }
}

/// Directory holding the experiment for one sweep value.
pub fn value_dir(out: &Path, axis: SweepAxis, value: f64) -> PathBuf {
    out.join(format!("{axis}={value}"))
}

fn sweep_of(config: &ExperimentConfig) -> Result<(SweepAxis, Vec<f64>)> {
    let sweep = config
        .sweep
        .as_ref()
        .context("no sweep axis configured (set [sweep] or pass --axis/--values)")?;
    Ok((sweep.axis, sweep.values.clone()))
}

/// Runs the sweep without writing anything. `reference` maps each
/// per-value configuration to its reference front.
pub fn execute(
    config: &ExperimentConfig,
    mut reference: impl FnMut(&ExperimentConfig) -> Result<ReferenceFront64>,
) -> Result<SweepResult> {
    config.validate()?;
    let (axis, values) = sweep_of(config)?;
    let mut experiments = Vec::with_capacity(values.len());
    for &value in &values {
        let c = axis.apply(config, value)?;
        let front = reference(&c)?;
        experiments.push(experiment::execute(&c, &front)?);
    }
    Ok(SweepResult {
        axis,
        values,
        experiments,
    })
}

/// Runs the sweep and writes one experiment directory per value, a combined
/// `summary.csv` and the long-format `sweep.csv`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let out = config.run.out.clone();
    let cache = config.run.cache_dir();
    let result = execute(config, |c| Ok(reference::load_or_generate(c, &cache)?.0))?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for (value, e) in result.values.iter().zip(&result.experiments) {
        experiment::persist(e, &value_dir(&out, result.axis, *value))?;
    }
    fs::write(out.join("config.toml"), config.to_toml()?)?;
    fs::write(out.join("summary.csv"), result.summary().to_csv())?;
    fs::write(out.join("sweep.csv"), result.long_csv())?;
    crate::plot::emit_sweep_plots(&result, &out.join("plots"))?;
    Ok(result)
}
