//! Multi-run experiments: `R` independent runs with seeds `base + r`, their
//! metric histories, and the table of final-iteration means.

use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use amcbo::metrics::mean_field_error;
use amcbo::{
    EdgeMinimizer, Error as EngineError, MetricsEvaluator64, MetricsRecord64, Objective, Points64,
    ReferenceFront64, Solver, WeightVector64,
};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::reference;

/// State of a run after its last iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalState {
    pub positions: Points64,
    pub images: Points64,
    pub weights: Vec<WeightVector64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub index: usize,
    pub seed: u64,
    pub history: Vec<MetricsRecord64>,
    /// `None` when the run blew up.
    pub final_state: Option<FinalState>,
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    pub fn last(&self) -> Option<&MetricsRecord64> {
        self.history.last()
    }
}

/// Means of the final-iteration metrics over the completed runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMeans {
    pub gd: f64,
    pub igd: f64,
    pub hv: f64,
    pub u_riesz: f64,
    pub u_newton: f64,
    pub u_morse: f64,
    pub mf_err: Option<f64>,
    pub oob_frac: f64,
}

impl MetricMeans {
    pub const NAMES: [&'static str; 8] = [
        "gd", "igd", "hv", "u_riesz", "u_newton", "u_morse", "mf_err", "oob_frac",
    ];

    /// Arithmetic means in record order; `None` if `records` is empty.
    pub fn of<'a>(records: impl IntoIterator<Item = &'a MetricsRecord64>) -> Option<Self> {
        let records: Vec<&MetricsRecord64> = records.into_iter().collect();
        if records.is_empty() {
            return None;
        }
        let n = records.len() as f64;
        let mean = |f: fn(&MetricsRecord64) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / n;
        let mf_err = if records.iter().all(|r| r.mean_field_error.is_some()) {
            Some(mean(|r| r.mean_field_error.unwrap_or(f64::NAN)))
        } else {
            None
        };
        Some(Self {
            gd: mean(|r| r.gd),
            igd: mean(|r| r.igd),
            hv: mean(|r| r.hypervolume),
            u_riesz: mean(|r| r.u_riesz),
            u_newton: mean(|r| r.u_newton),
            u_morse: mean(|r| r.u_morse),
            mf_err,
            oob_frac: mean(|r| r.out_of_box),
        })
    }

    /// `(name, value)` pairs in [`Self::NAMES`] order; a missing mean-field
    /// error is skipped.
    pub fn pairs(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("gd", self.gd),
            ("igd", self.igd),
            ("hv", self.hv),
            ("u_riesz", self.u_riesz),
            ("u_newton", self.u_newton),
            ("u_morse", self.u_morse),
        ];
        if let Some(v) = self.mf_err {
            out.push(("mf_err", v));
        }
        out.push(("oob_frac", self.oob_frac));
        out
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.pairs()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub problem: String,
    pub scenario: String,
    /// Completed runs entering the means.
    pub runs: usize,
    /// Runs that blew up and were excluded.
    pub failed: usize,
    pub seed_base: u64,
    /// `None` when every run failed.
    pub means: Option<MetricMeans>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub const HEADER: &'static str =
        "problem,scenario,runs,failed,seed_base,gd,igd,hv,u_riesz,u_newton,u_morse,mf_err,oob_frac";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for row in &self.rows {
            write!(
                out,
                "{},{},{},{},{}",
                row.problem, row.scenario, row.runs, row.failed, row.seed_base
            )
            .unwrap();
            match &row.means {
                Some(m) => {
                    let mf = m.mf_err.map(|v| format!("{v:e}")).unwrap_or_default();
                    write!(
                        out,
                        ",{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
                        m.gd, m.igd, m.hv, m.u_riesz, m.u_newton, m.u_morse, mf, m.oob_frac
                    )
                    .unwrap();
                }
                None => out.push_str(",,,,,,,,"),
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub reference: ReferenceFront64,
    pub runs: Vec<RunOutcome>,
    pub summary: SummaryTable,
}

impl ExperimentResult {
    pub fn completed(&self) -> impl Iterator<Item = &RunOutcome> {
        self.runs.iter().filter(|r| r.succeeded())
    }

    pub fn means(&self) -> Option<&MetricMeans> {
        self.summary.rows.first().and_then(|r| r.means.as_ref())
    }
}

/// Maps weights to the decision vector solving their sub-problem, caching
/// the last answer per particle (weights do not move when `tau = 0`).
struct MeanFieldMap {
    minimizer: EdgeMinimizer<f64>,
    cache: Vec<Option<(WeightVector64, Vec<f64>)>>,
}

impl MeanFieldMap {
    fn error(&mut self, positions: &Points64, weights: &[WeightVector64]) -> amcbo::Result<f64> {
        self.cache.resize(weights.len(), None);
        let mut targets = Vec::with_capacity(weights.len());
        for (w, slot) in weights.iter().zip(self.cache.iter_mut()) {
            match slot {
                Some((cw, x)) if cw == w => targets.push(x.clone()),
                _ => {
                    let x = self.minimizer.minimizer(w)?;
                    *slot = Some((w.clone(), x.clone()));
                    targets.push(x);
                }
            }
        }
        let mut it = targets.into_iter();
        mean_field_error(positions, weights, |_| Ok(it.next().unwrap_or_default()))
    }
}

/// Executes run `index` of `config` against `reference`. Blow-ups are
/// reported in the outcome; other engine errors abort.
pub fn execute_run(
    config: &ExperimentConfig,
    reference: &ReferenceFront64,
    index: usize,
) -> Result<RunOutcome> {
    let problem = config.problem.build()?;
    let seed = config.run.seed.wrapping_add(index as u64);
    let solver_config = config.solver.build(problem.n_objectives(), seed)?;
    let k_max = solver_config.k_max;
    let evaluator = MetricsEvaluator64::new(reference.clone(), config.metrics.gstar.clone())?;
    let mut mean_field = if config.metrics.mean_field {
        let chart = problem.front_chart()?;
        Some(MeanFieldMap {
            minimizer: EdgeMinimizer::new(chart, EdgeMinimizer::<f64>::DEFAULT_GRID)?,
            cache: Vec::new(),
        })
    } else {
        None
    };
    let every = config.metrics.every.max(1);
    let stall = config.metrics.stall_tolerance;
    let patience = config.metrics.stall_patience.max(1);

    let mut history = Vec::new();
    let mut failure: Option<amcbo::Error> = None;
    let mut stalled = 0usize;
    let mut solver = Solver::new(&problem, solver_config)?;
    let outcome = solver.run(|view| {
        if view.iteration % every != 0 && view.iteration != k_max {
            return ControlFlow::Continue(());
        }
        let record = evaluator.record(view).and_then(|mut r| {
            if let Some(map) = mean_field.as_mut() {
                r.mean_field_error = Some(map.error(view.positions, view.weights)?);
            }
            Ok(r)
        });
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        };
        if let (Some(tol), Some(prev)) = (stall, history.last().map(|r: &MetricsRecord64| r.gd)) {
            if (prev - record.gd).abs() <= tol * prev.abs() {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        history.push(record);
        if stall.is_some() && stalled >= patience {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    let error = match (outcome, failure) {
        (Err(e @ EngineError::NumericalBlowup { .. }), _) => Some(e.to_string()),
        (Err(e), _) | (Ok(()), Some(e)) => {
            return Err(e).context(format!("run {index} (seed {seed})"))
        }
        (Ok(()), None) => None,
    };
    let final_state = error.is_none().then(|| {
        let view = solver.view();
        FinalState {
            positions: view.positions.clone(),
            images: view.images.clone(),
            weights: view.weights.to_vec(),
        }
    });
    Ok(RunOutcome {
        index,
        seed,
        history,
        final_state,
        error,
    })
}

pub fn summarize(config: &ExperimentConfig, runs: &[RunOutcome]) -> Result<SummaryTable> {
    let problem = config.problem.build()?;
    let completed: Vec<&RunOutcome> = runs.iter().filter(|r| r.succeeded()).collect();
    let means = MetricMeans::of(completed.iter().filter_map(|r| r.last()));
    Ok(SummaryTable {
        rows: vec![SummaryRow {
            problem: config.problem.label(),
            scenario: config.solver.scenario(problem.n_objectives()),
            runs: completed.len(),
            failed: runs.len() - completed.len(),
            seed_base: config.run.seed,
            means,
        }],
    })
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// Runs every seed of `config` against `reference`, without touching disk.
/// Runs are scheduled in parallel; results are in seed order.
pub fn execute(
    config: &ExperimentConfig,
    reference: &ReferenceFront64,
) -> Result<ExperimentResult> {
    config.validate()?;
    let runs: Vec<RunOutcome> = pool(config.run.threads)?.install(|| {
        (0..config.run.runs)
            .into_par_iter()
            .map(|i| execute_run(config, reference, i))
            .collect::<Result<_>>()
    })?;
    let failed = runs.iter().filter(|r| !r.succeeded()).count();
    if failed > 0 {
        eprintln!(
            "warning: {failed} of {} runs blew up and are excluded from the means",
            runs.len()
        );
    }
    Ok(ExperimentResult {
        summary: summarize(config, &runs)?,
        config: config.clone(),
        reference: reference.clone(),
        runs,
    })
}

/// Loads (or generates) the reference front, executes all runs and writes
/// the artifacts under `config.run.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (front, _) = reference::load_or_generate(config, &config.run.cache_dir())?;
    let result = execute(config, &front)?;
    persist(&result, &config.run.out)?;
    Ok(result)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub run: usize,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub iterations: usize,
    pub records: usize,
    pub reference: String,
    pub version: String,
    pub config: ExperimentConfig,
}

pub fn run_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("run-{index:03}"))
}

pub fn metrics_csv(history: &[MetricsRecord64]) -> String {
    let mut out = format!("{}\n", MetricsRecord64::CSV_HEADER);
    for r in history {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRecord64>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == MetricsRecord64::CSV_HEADER => {}
        _ => bail!("missing metrics header"),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(MetricsRecord64::from_csv_row(l)?))
        .collect()
}

fn final_csv(state: &FinalState) -> String {
    let d = state.positions.dim();
    let m = state.images.dim();
    let mut cols: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    cols.extend((1..=m).map(|k| format!("g{k}")));
    cols.extend((1..=m).map(|k| format!("w{k}")));
    let mut out = cols.join(",");
    out.push('\n');
    for i in 0..state.positions.len() {
        let cells: Vec<String> = state
            .positions
            .row(i)
            .iter()
            .chain(state.images.row(i))
            .chain(state.weights[i].iter())
            .map(|v| format!("{v:e}"))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes `config.toml`, `reference.csv`, `summary.csv`, one directory per
/// run (`metrics.csv`, `manifest.json`, `final.csv`) and the plot data.
pub fn persist(result: &ExperimentResult, out: &Path) -> Result<()> {
    let config = &result.config;
    let description = reference::describe(config);
    write(&out.join("config.toml"), &config.to_toml()?)?;
    write(
        &out.join("reference.csv"),
        &reference::to_csv(&result.reference, &description),
    )?;
    for run in &result.runs {
        let dir = run_dir(out, run.index);
        write(&dir.join("metrics.csv"), &metrics_csv(&run.history))?;
        if let Some(state) = &run.final_state {
            write(&dir.join("final.csv"), &final_csv(state))?;
        }
        let manifest = RunManifest {
            run: run.index,
            seed: run.seed,
            status: if run.succeeded() {
                "ok".into()
            } else {
                "blowup".into()
            },
            error: run.error.clone(),
            iterations: run.last().map(|r| r.iteration).unwrap_or(0),
            records: run.history.len(),
            reference: description.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        write(&dir.join("manifest.json"), &json)?;
    }
    write(&out.join("summary.csv"), &result.summary.to_csv())?;
    crate::plot::emit_experiment_plots(result, &out.join("plots"))?;
    Ok(())
}
