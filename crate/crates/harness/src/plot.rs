//! Plot data: CSV files plus a small matplotlib script per figure kind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::experiment::{metrics_csv, ExperimentResult, MetricMeans};
use crate::sweep::SweepResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// One CSV per run plus the mean over runs.
    MetricsVsIteration,
    /// Mean of each metric against the sweep value.
    MetricVsSweep,
    /// Final images of the first completed run next to the reference front.
    FrontScatter,
    /// Histogram of the first weight component of the first completed run.
    WeightHistogram,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::MetricsVsIteration => "metrics_vs_iteration",
            PlotKind::MetricVsSweep => "metric_vs_sweep",
            PlotKind::FrontScatter => "front_scatter",
            PlotKind::WeightHistogram => "weight_histogram",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    Experiment(&'a ExperimentResult),
    Sweep(&'a SweepResult),
}

pub const HISTOGRAM_BINS: usize = 20;

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(())
}

/// Writes the data and script for `kind` under `dir/<kind>/` and returns the
/// paths written.
pub fn emit_plot_data(kind: PlotKind, source: PlotSource<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = dir.join(kind.name());
    let mut written = Vec::new();
    match (kind, source) {
        (PlotKind::MetricsVsIteration, PlotSource::Experiment(e)) => {
            for run in &e.runs {
                write(
                    dir.join(format!("run-{:03}.csv", run.index)),
                    &metrics_csv(&run.history),
                    &mut written,
                )?;
            }
            write(dir.join("mean.csv"), &mean_history_csv(e), &mut written)?;
            write(dir.join("plot.py"), METRICS_SCRIPT, &mut written)?;
        }
        (PlotKind::MetricVsSweep, PlotSource::Sweep(s)) => {
            write(dir.join("sweep.csv"), &s.long_csv(), &mut written)?;
            write(
                dir.join("plot.py"),
                &sweep_script(&s.axis.to_string()),
                &mut written,
            )?;
        }
        (PlotKind::FrontScatter, PlotSource::Experiment(e)) => {
            write(dir.join("front.csv"), &front_csv(e), &mut written)?;
            write(dir.join("plot.py"), FRONT_SCRIPT, &mut written)?;
        }
        (PlotKind::WeightHistogram, PlotSource::Experiment(e)) => {
            write(
                dir.join("histogram.csv"),
                &histogram_csv(e, HISTOGRAM_BINS),
                &mut written,
            )?;
            write(dir.join("plot.py"), HISTOGRAM_SCRIPT, &mut written)?;
        }
        (kind, _) => bail!("plot kind {} does not apply to this result", kind.name()),
    }
    Ok(written)
}

pub fn emit_experiment_plots(e: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for kind in [
        PlotKind::MetricsVsIteration,
        PlotKind::FrontScatter,
        PlotKind::WeightHistogram,
    ] {
        out.extend(emit_plot_data(kind, PlotSource::Experiment(e), dir)?);
    }
    Ok(out)
}

pub fn emit_sweep_plots(s: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    emit_plot_data(PlotKind::MetricVsSweep, PlotSource::Sweep(s), dir)
}

/// Mean over completed runs at each recorded iteration. Runs stopped early
/// drop out of later rows; the `runs` column counts the contributors.
fn mean_history_csv(e: &ExperimentResult) -> String {
    let completed: Vec<_> = e.completed().collect();
    let longest = completed.iter().map(|r| r.history.len()).max().unwrap_or(0);
    let mut out = String::from("k,runs");
    for name in MetricMeans::NAMES {
        write!(out, ",{name}").unwrap();
    }
    out.push('\n');
    for row in 0..longest {
        let records: Vec<_> = completed
            .iter()
            .filter_map(|r| r.history.get(row))
            .collect();
        let k = records[0].iteration;
        let records: Vec<_> = records.into_iter().filter(|r| r.iteration == k).collect();
        let Some(means) = MetricMeans::of(records.iter().copied()) else {
            continue;
        };
        write!(out, "{k},{}", records.len()).unwrap();
        for name in MetricMeans::NAMES {
            match means.get(name) {
                Some(v) => write!(out, ",{v:e}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn front_csv(e: &ExperimentResult) -> String {
    let m = e.reference.points().dim();
    let mut out = String::from("set");
    for k in 1..=m {
        write!(out, ",g{k}").unwrap();
    }
    out.push('\n');
    let mut push = |set: &str, row: &[f64]| {
        out.push_str(set);
        for v in row {
            write!(out, ",{v:e}").unwrap();
        }
        out.push('\n');
    };
    if let Some(state) = e.completed().find_map(|r| r.final_state.as_ref()) {
        for row in state.images.rows() {
            push("particles", row);
        }
    }
    for row in e.reference.points().rows() {
        push("reference", row);
    }
    out
}

/// Counts of the first weight component over `bins` equal bins of `[0, 1]`
/// (the last bin is closed).
pub fn weight_histogram(weights: impl IntoIterator<Item = f64>, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for w in weights {
        let b = ((w * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

fn histogram_csv(e: &ExperimentResult, bins: usize) -> String {
    let counts = e
        .completed()
        .find_map(|r| r.final_state.as_ref())
        .map(|s| weight_histogram(s.weights.iter().map(|w| w[0]), bins))
        .unwrap_or_else(|| vec![0; bins]);
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (b, c) in counts.iter().enumerate() {
        writeln!(
            out,
            "{},{},{c}",
            b as f64 / bins as f64,
            (b + 1) as f64 / bins as f64
        )
        .unwrap();
    }
    out
}

const METRICS_SCRIPT: &str = r#"import csv
import sys

import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("mean.csv")))
k = [int(r["k"]) for r in rows]
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for name in ["gd", "igd"]:
    axes[0].semilogy(k, [float(r[name]) for r in rows], label=name.upper())
axes[0].set_xlabel("iteration")
axes[0].legend()
for name in ["u_riesz", "u_newton", "u_morse"]:
    axes[1].plot(k, [float(r[name]) for r in rows], label=name)
axes[1].set_xlabel("iteration")
axes[1].legend()
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "metrics_vs_iteration.png", dpi=150)
"#;

const FRONT_SCRIPT: &str = r#"import csv
import sys

import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("front.csv")))
ref = [r for r in rows if r["set"] == "reference"]
pts = [r for r in rows if r["set"] == "particles"]
plt.plot([float(r["g1"]) for r in ref], [float(r["g2"]) for r in ref], "k-", lw=1, label="reference")
plt.scatter([float(r["g1"]) for r in pts], [float(r["g2"]) for r in pts], s=12, label="particles")
plt.xlabel("g1")
plt.ylabel("g2")
plt.legend()
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else "front_scatter.png", dpi=150)
"#;

const HISTOGRAM_SCRIPT: &str = r#"import csv
import sys

import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("histogram.csv")))
lo = [float(r["bin_lo"]) for r in rows]
width = [float(r["bin_hi"]) - float(r["bin_lo"]) for r in rows]
plt.bar(lo, [int(r["count"]) for r in rows], width=width, align="edge")
plt.xlabel("w1")
plt.ylabel("particles")
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else "weight_histogram.png", dpi=150)
"#;

fn sweep_script(axis: &str) -> String {
    format!(
        r#"import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

series = defaultdict(list)
for r in csv.DictReader(open("sweep.csv")):
    series[r["metric"]].append((float(r["value"]), float(r["mean"])))
names = [n for n in ["gd", "igd", "hv", "u_riesz", "u_newton", "u_morse"] if n in series]
fig, axes = plt.subplots(1, len(names), figsize=(3 * len(names), 3))
for ax, name in zip(axes, names):
    xs, ys = zip(*sorted(series[name]))
    ax.plot(xs, ys, "o-")
    ax.set_xscale("symlog", linthresh=min([x for x in xs if x > 0] or [1.0]))
    ax.set_xlabel("{axis}")
    ax.set_title(name)
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "metric_vs_sweep.png", dpi=150)
"#
    )
}
