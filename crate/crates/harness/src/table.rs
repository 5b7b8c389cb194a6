//! Rebuilds summary tables from the per-run artifacts on disk.

use std::fs;
use std::path::{Path, PathBuf};

use amcbo::Objective;
use anyhow::{bail, Context, Result};

use crate::experiment::{parse_metrics_csv, MetricMeans, RunManifest, SummaryRow, SummaryTable};

fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("manifest.json").is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Summary row of one experiment directory (the output of a `run`).
pub fn experiment_row(dir: &Path) -> Result<SummaryRow> {
    let dirs = run_dirs(dir)?;
    if dirs.is_empty() {
        bail!("no run directories under {}", dir.display());
    }
    let mut manifests = Vec::new();
    let mut finals = Vec::new();
    for d in &dirs {
        let path = d.join("manifest.json");
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if manifest.status == "ok" {
            let path = d.join("metrics.csv");
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let history =
                parse_metrics_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
            finals.push(history.last().cloned().context("empty metrics history")?);
        }
        manifests.push(manifest);
    }
    let config = &manifests[0].config;
    let m = config.problem.build()?.n_objectives();
    Ok(SummaryRow {
        problem: config.problem.label(),
        scenario: config.solver.scenario(m),
        runs: finals.len(),
        failed: manifests.len() - finals.len(),
        seed_base: config.run.seed,
        means: MetricMeans::of(&finals),
    })
}

/// Summary of a `run` directory, or of every value directory of a `sweep`.
pub fn recompute(dir: &Path) -> Result<SummaryTable> {
    if !run_dirs(dir)?.is_empty() {
        return Ok(SummaryTable {
            rows: vec![experiment_row(dir)?],
        });
    }
    // a sweep: one experiment per subdirectory, in the order of sweep.csv
    let mut values: Vec<String> = Vec::new();
    let long = fs::read_to_string(dir.join("sweep.csv"))
        .with_context(|| format!("no run or sweep under {}", dir.display()))?;
    for line in long.lines().skip(1) {
        let v = line.split(',').next().unwrap_or_default().to_string();
        if values.last() != Some(&v) {
            values.push(v);
        }
    }
    let config = crate::config::ExperimentConfig::load(&dir.join("config.toml"))?;
    let axis = config
        .sweep
        .as_ref()
        .context("sweep directory without a sweep axis")?
        .axis;
    let rows = values
        .iter()
        .map(|v| experiment_row(&dir.join(format!("{axis}={v}"))))
        .collect::<Result<_>>()?;
    Ok(SummaryTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, PotentialName, SweepAxis, SweepSection};
    use crate::{experiment, sweep};

    fn small(out: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.solver.n_particles = 10;
        c.solver.k_max = 20;
        c.metrics.reference_size = 10;
        c.run.runs = 3;
        c.run.out = out.to_path_buf();
        c
    }

    #[test]
    fn recomputed_summary_matches_the_written_one() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(dir.path());
        experiment::run_experiment(&c).unwrap();
        let written = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(recompute(dir.path()).unwrap().to_csv(), written);
    }

    #[test]
    fn recomputes_sweeps() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(dir.path());
        c.solver.potential = PotentialName::Morse;
        c.sweep = Some(SweepSection {
            axis: SweepAxis::Tau,
            values: vec![0.1, 0.0],
        });
        sweep::run_sweep(&c).unwrap();
        let written = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(recompute(dir.path()).unwrap().to_csv(), written);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(recompute(dir.path()).is_err());
    }
}
