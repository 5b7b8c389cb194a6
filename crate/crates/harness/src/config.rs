//! Experiment configuration: a TOML file with `[problem]`, `[solver]`,
//! `[metrics]`, `[run]` and optional `[sweep]` sections. Every field has a
//! default, and command-line flags override whatever the file sets.

use std::fmt;
use std::path::{Path, PathBuf};

use amcbo::{Diffusion, PotentialSpec64, Problem64, SolverConfig64, WeightRule};
use anyhow::{bail, ensure, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub metrics: MetricsSection,
    pub run: RunSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// `lame` or `do2dk`.
    pub name: String,
    pub gamma: f64,
    pub k: u32,
    pub s: f64,
    pub d: usize,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            name: "lame".into(),
            gamma: 1.0,
            k: 2,
            s: 1.0,
            d: 10,
        }
    }
}

impl ProblemSection {
    pub fn build(&self) -> Result<Problem64> {
        Ok(Problem64::from_name(
            &self.name, self.gamma, self.k, self.s, self.d,
        )?)
    }

    /// Human-readable label without the dimension, e.g. `lame gamma=0.25`.
    pub fn label(&self) -> String {
        match self.name.as_str() {
            "lame" => format!("lame gamma={}", self.gamma),
            "do2dk" => format!("do2dk k={} s={}", self.k, self.s),
            other => other.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PotentialName {
    None,
    Riesz,
    Newtonian,
    Morse,
}

impl fmt::Display for PotentialName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PotentialName::None => "none",
            PotentialName::Riesz => "riesz",
            PotentialName::Newtonian => "newtonian",
            PotentialName::Morse => "morse",
        })
    }
}

impl PotentialName {
    pub fn build(self, m: usize, morse_c: f64) -> Result<Option<PotentialSpec64>> {
        Ok(match self {
            PotentialName::None => None,
            PotentialName::Riesz => Some(PotentialSpec64::riesz(m)),
            PotentialName::Newtonian => Some(PotentialSpec64::newtonian(m)),
            PotentialName::Morse => Some(PotentialSpec64::morse(m, morse_c)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DiffusionName {
    Iso,
    Aniso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WeightRuleName {
    Auto,
    Gradient,
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub dt: f64,
    pub n_particles: usize,
    pub k_max: usize,
    pub diffusion: DiffusionName,
    pub potential: PotentialName,
    pub morse_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    pub box_projection: bool,
    pub weight_rule: WeightRuleName,
}

impl Default for SolverSection {
    fn default() -> Self {
        let base = SolverConfig64::default();
        Self {
            lambda: base.lambda,
            sigma: base.sigma,
            alpha: base.alpha,
            tau: base.tau,
            dt: base.dt,
            n_particles: base.n_particles,
            k_max: base.k_max,
            diffusion: DiffusionName::Aniso,
            potential: PotentialName::None,
            morse_c: amcbo::potentials::DEFAULT_MORSE_C,
            batch_size: None,
            box_projection: false,
            weight_rule: WeightRuleName::Auto,
        }
    }
}

impl SolverSection {
    pub fn build(&self, m: usize, seed: u64) -> Result<SolverConfig64> {
        let config = SolverConfig64 {
            lambda: self.lambda,
            sigma: self.sigma,
            alpha: self.alpha,
            tau: self.tau,
            dt: self.dt,
            n_particles: self.n_particles,
            k_max: self.k_max,
            diffusion: match self.diffusion {
                DiffusionName::Iso => Diffusion::Isotropic,
                DiffusionName::Aniso => Diffusion::Anisotropic,
            },
            potential: self.potential.build(m, self.morse_c)?,
            batch_size: self.batch_size,
            box_projection: self.box_projection,
            weight_rule: match self.weight_rule {
                WeightRuleName::Auto => WeightRule::Auto,
                WeightRuleName::Gradient => WeightRule::Gradient,
                WeightRuleName::Radial => WeightRule::Radial,
            },
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Interaction scenario label, e.g. `tau=0` or `morse(C=20) tau=0.1`.
    pub fn scenario(&self, m: usize) -> String {
        match self.potential.build(m, self.morse_c) {
            Ok(Some(spec)) if self.tau > 0.0 => format!("{spec} tau={}", self.tau),
            _ => format!("tau={}", self.tau),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Record metrics every this many iterations; the last iteration is
    /// always recorded.
    pub every: usize,
    /// Number of points in the reference front.
    pub reference_size: usize,
    /// Interaction used to spread the reference front.
    pub reference_potential: PotentialName,
    /// Hypervolume reference point; defaults to the front's max plus 10% of
    /// its range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gstar: Option<Vec<f64>>,
    /// Record the distance to the optimizer of each particle's sub-problem.
    pub mean_field: bool,
    /// Stop a run once GD changes by at most this relative amount over
    /// `stall_patience` consecutive records. Off when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stall_tolerance: Option<f64>,
    pub stall_patience: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            every: 10,
            reference_size: amcbo::metrics::DEFAULT_REFERENCE_SIZE,
            reference_potential: PotentialName::Riesz,
            gstar: None,
            mean_field: true,
            stall_tolerance: None,
            stall_patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub runs: usize,
    /// Run `r` uses seed `seed + r`.
    pub seed: u64,
    /// Output directory. Not part of the recorded configuration: results do
    /// not depend on where they are written.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    /// Reference front cache; defaults to `<out>/cache`.
    #[serde(skip_serializing)]
    pub cache: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            runs: 25,
            seed: 0,
            out: PathBuf::from("out"),
            cache: None,
            threads: None,
        }
    }
}

impl RunSection {
    pub fn cache_dir(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.out.join("cache"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum SweepAxis {
    #[serde(rename = "tau")]
    #[value(name = "tau")]
    Tau,
    #[serde(rename = "sigma")]
    #[value(name = "sigma")]
    Sigma,
    #[serde(rename = "d")]
    #[value(name = "d")]
    D,
    #[serde(rename = "N")]
    #[value(name = "N")]
    N,
    #[serde(rename = "batch_size")]
    #[value(name = "batch_size")]
    BatchSize,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Tau => "tau",
            SweepAxis::Sigma => "sigma",
            SweepAxis::D => "d",
            SweepAxis::N => "N",
            SweepAxis::BatchSize => "batch_size",
        })
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tau" => SweepAxis::Tau,
            "sigma" => SweepAxis::Sigma,
            "d" => SweepAxis::D,
            "N" | "n" | "n_particles" => SweepAxis::N,
            "batch_size" => SweepAxis::BatchSize,
            other => {
                bail!("unknown sweep axis '{other}' (expected tau, sigma, d, N or batch_size)")
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    ensure!(
        v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64,
        "sweep axis {axis} needs positive integers, got {v}"
    );
    Ok(v as usize)
}

impl SweepAxis {
    /// Copy of `config` with this axis set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        ensure!(
            value.is_finite(),
            "sweep values must be finite, got {value}"
        );
        let mut out = config.clone();
        out.sweep = None;
        match self {
            SweepAxis::Tau => out.solver.tau = value,
            SweepAxis::Sigma => out.solver.sigma = value,
            SweepAxis::D => out.problem.d = as_count(self, value)?,
            SweepAxis::N => out.solver.n_particles = as_count(self, value)?,
            SweepAxis::BatchSize => out.solver.batch_size = Some(as_count(self, value)?),
        }
        Ok(out)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// The resolved configuration as TOML (output location excluded).
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let problem = self.problem.build()?;
        let m = amcbo::Objective::n_objectives(&problem);
        self.solver.build(m, self.run.seed)?;
        ensure!(self.run.runs >= 1, "need at least one run");
        ensure!(
            self.metrics.every >= 1,
            "metrics cadence must be at least 1"
        );
        ensure!(
            self.metrics.reference_size >= 1,
            "reference front needs at least one point"
        );
        ensure!(
            self.metrics.reference_potential != PotentialName::None,
            "the reference front needs an interaction potential"
        );
        if let Some(g) = &self.metrics.gstar {
            ensure!(g.len() == m, "gstar needs {m} components");
        }
        if let Some(sweep) = &self.sweep {
            ensure!(!sweep.values.is_empty(), "sweep needs at least one value");
            for &v in &sweep.values {
                sweep.axis.apply(self, v)?.validate()?;
            }
        }
        Ok(())
    }
}

/// Command-line overrides; every flag is optional and wins over the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Benchmark problem (lame, do2dk).
    #[arg(long, value_name = "NAME")]
    pub problem: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub s: Option<f64>,
    /// Search-space dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n_particles: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum)]
    pub potential: Option<PotentialName>,
    #[arg(long)]
    pub morse_c: Option<f64>,
    #[arg(long, value_enum)]
    pub diffusion: Option<DiffusionName>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed; run r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "K")]
    pub metrics_every: Option<usize>,
    /// Reference front cache directory.
    #[arg(long, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Overrides {
    /// Loads `--config` (or the defaults) and applies the flags on top.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        self.apply(&mut config);
        Ok(config)
    }

    pub fn apply(&self, c: &mut ExperimentConfig) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        set(&mut c.problem.name, &self.problem);
        set(&mut c.problem.gamma, &self.gamma);
        set(&mut c.problem.k, &self.k);
        set(&mut c.problem.s, &self.s);
        set(&mut c.problem.d, &self.d);
        set(&mut c.solver.n_particles, &self.n_particles);
        set(&mut c.solver.k_max, &self.k_max);
        set(&mut c.solver.lambda, &self.lambda);
        set(&mut c.solver.sigma, &self.sigma);
        set(&mut c.solver.alpha, &self.alpha);
        set(&mut c.solver.tau, &self.tau);
        set(&mut c.solver.dt, &self.dt);
        set(&mut c.solver.potential, &self.potential);
        set(&mut c.solver.morse_c, &self.morse_c);
        set(&mut c.solver.diffusion, &self.diffusion);
        if self.batch_size.is_some() {
            c.solver.batch_size = self.batch_size;
        }
        set(&mut c.run.runs, &self.runs);
        set(&mut c.run.seed, &self.seed);
        set(&mut c.run.out, &self.out);
        set(&mut c.metrics.every, &self.metrics_every);
        if self.cache.is_some() {
            c.run.cache = self.cache.clone();
        }
        if self.threads.is_some() {
            c.run.threads = self.threads;
        }
    }
}
