//! Reference fronts on disk: plain CSV, one point per row, preceded by a
//! `#` comment line naming the configuration that generated it.

use std::fs;
use std::path::{Path, PathBuf};

use amcbo::{generate_reference, Points64, ReferenceFront64};
use anyhow::{bail, Context, Result};

use crate::config::ExperimentConfig;

/// What a reference front depends on: the problem and its parameters (not
/// the search dimension), the size and the interaction.
pub fn describe(config: &ExperimentConfig) -> String {
    format!(
        "problem={} M={} potential={}",
        config.problem.label(),
        config.metrics.reference_size,
        config.metrics.reference_potential
    )
}

/// File name under the cache directory, e.g. `lame_gamma=1_M100_riesz.csv`.
pub fn cache_file_name(config: &ExperimentConfig) -> String {
    format!(
        "{}_M{}_{}.csv",
        config.problem.label().replace(' ', "_"),
        config.metrics.reference_size,
        config.metrics.reference_potential
    )
}

pub fn generate(config: &ExperimentConfig) -> Result<ReferenceFront64> {
    let problem = config.problem.build()?;
    let m = amcbo::Objective::n_objectives(&problem);
    let potential = config
        .metrics
        .reference_potential
        .build(m, config.solver.morse_c)?
        .context("the reference front needs an interaction potential")?;
    Ok(generate_reference(
        &problem,
        config.metrics.reference_size,
        potential,
    )?)
}

pub fn to_csv(front: &ReferenceFront64, description: &str) -> String {
    let mut out = format!("# reference {description}\n");
    for row in front.points().rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn from_csv(text: &str) -> Result<ReferenceFront64> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("line {}", n + 1))?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("reference file has no points");
    }
    Ok(ReferenceFront64::new(Points64::from_rows(&rows)?)?)
}

pub fn write(path: &Path, front: &ReferenceFront64, description: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    // write-then-rename so concurrent readers never see a partial file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, to_csv(front, description))
        .with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<ReferenceFront64> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Loads the cached front for `config`, generating and caching it first if
/// needed. Returns the front and its cache path.
pub fn load_or_generate(
    config: &ExperimentConfig,
    cache_dir: &Path,
) -> Result<(ReferenceFront64, PathBuf)> {
    let path = cache_dir.join(cache_file_name(config));
    if path.exists() {
        return Ok((read(&path)?, path));
    }
    let front = generate(config)?;
    write(&path, &front, &describe(config))?;
    Ok((front, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let pts = Points64::from_rows(&[vec![0.1, 1.0 / 3.0], vec![std::f64::consts::PI, 2e-300]])
            .unwrap();
        let front = ReferenceFront64::new(pts).unwrap();
        let text = to_csv(&front, "problem=test");
        assert!(text.starts_with("# reference problem=test\n"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(from_csv(&text).unwrap(), front);
    }

    #[test]
    fn cache_key_ignores_dimension() {
        let mut a = ExperimentConfig::default();
        let mut b = a.clone();
        b.problem.d = 30;
        assert_eq!(cache_file_name(&a), cache_file_name(&b));
        a.problem.gamma = 0.25;
        assert_ne!(cache_file_name(&a), cache_file_name(&b));
        assert_eq!(cache_file_name(&b), "lame_gamma=1_M100_riesz.csv");
    }

    #[test]
    fn cache_is_reused() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::default();
        config.metrics.reference_size = 5;
        let (front, path) = load_or_generate(&config, dir.path()).unwrap();
        assert_eq!(front.len(), 5);
        let written = fs::read_to_string(&path).unwrap();
        assert!(written.starts_with("# reference problem=lame gamma=1 M=5 potential=riesz"));
        let (again, _) = load_or_generate(&config, dir.path()).unwrap();
        assert_eq!(front, again);
    }

    #[test]
    fn malformed_files_are_errors() {
        assert!(from_csv("# nothing\n").is_err());
        assert!(from_csv("0.1,abc\n").is_err());
        assert!(from_csv("0.1,0.2\n0.3\n").is_err());
    }
}
