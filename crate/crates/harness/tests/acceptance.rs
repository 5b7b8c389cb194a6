//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! The experiment criteria run the full default budget (N = 100, d = 10,
//! 5000 iterations) and take a few minutes on one core.

use std::collections::BTreeMap;
use std::ops::ControlFlow;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use amcbo::potentials::energy;
use amcbo::reference::{chart_images, equispaced_coordinates};
use amcbo::*;
use amcbo_harness::config::{ExperimentConfig, PotentialName, SweepAxis, SweepSection};
use amcbo_harness::{experiment, reference, sweep, ExperimentResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn lame(gamma: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.problem.gamma = gamma;
    c.metrics.mean_field = false;
    c
}

fn do2dk(k: u32, s: f64) -> ExperimentConfig {
    let mut c = lame(1.0);
    c.problem.name = "do2dk".into();
    c.problem.k = k;
    c.problem.s = s;
    c
}

fn morse(mut c: ExperimentConfig, tau: f64) -> ExperimentConfig {
    c.solver.potential = PotentialName::Morse;
    c.solver.morse_c = 20.0;
    c.solver.tau = tau;
    c
}

/// Reference fronts keyed by their cache file name.
#[derive(Default)]
struct Fronts(BTreeMap<String, ReferenceFront64>);

impl Fronts {
    fn get(&mut self, c: &ExperimentConfig) -> ReferenceFront64 {
        self.0
            .entry(reference::cache_file_name(c))
            .or_insert_with(|| reference::generate(c).expect("reference front"))
            .clone()
    }
}

/// Runs with only the first and last iteration recorded.
fn finals(fronts: &mut Fronts, mut c: ExperimentConfig) -> ExperimentResult {
    c.metrics.every = c.solver.k_max.max(1);
    let front = fronts.get(&c);
    experiment::execute(&c, &front).expect("experiment")
}

fn mean_of(e: &ExperimentResult, metric: &str) -> f64 {
    e.means().and_then(|m| m.get(metric)).unwrap_or(f64::NAN)
}

fn failures(e: &ExperimentResult) -> usize {
    e.summary.rows[0].failed
}

/// Least-squares fit of `y = a + b x`; returns `(b, r2)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, sxy * sxy / (sxx * syy))
}

fn c1_gd_decay(fronts: &mut Fronts) -> Outcome {
    let c = lame(1.0);
    let front = fronts.get(&c);
    let problem = c.problem.build().unwrap();
    let seeds = 25;
    let window = 500;
    let mut curve = vec![0.0; window + 1];
    let mut last = 0.0;
    for seed in 0..seeds {
        let config = c.solver.build(2, seed).unwrap();
        let k_max = config.k_max;
        iterate(&problem, config, |v| {
            if v.iteration <= window {
                curve[v.iteration] += gd(v.images, &front).unwrap() / seeds as f64;
            }
            if v.iteration == k_max {
                last += gd(v.images, &front).unwrap() / seeds as f64;
            }
            ControlFlow::Continue(())
        })
        .unwrap();
    }
    let first = curve[0];
    let ks: Vec<f64> = (0..=window).map(|k| k as f64).collect();
    let logs: Vec<f64> = curve.iter().map(|g| g.ln()).collect();
    let (rate, r2) = linear_fit(&ks, &logs);
    let small = last <= 1.0;
    let factor = first / last;
    let fit = rate < 0.0 && r2 >= 0.9;
    outcome(
        small && factor >= 100.0 && fit,
        format!(
            "mean GD {first:.3e} -> {last:.3e}: final <= 1 {}; reduction {factor:.1}x (need >= 100x) {}; \
             log-linear fit over k <= {window}: rate {rate:.3e}, R^2 {r2:.3} (need rate < 0, R^2 >= 0.9) {}",
            verdict(small),
            verdict(factor >= 100.0),
            verdict(fit)
        ),
    )
}

fn c2_adaptation_improves_igd(fronts: &mut Fronts) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for base in [lame(0.25), do2dk(4, 2.0)] {
        let label = base.problem.label();
        let plain = finals(fronts, base.clone());
        let adapted = finals(fronts, morse(base, 0.1));
        let (a, b) = (mean_of(&adapted, "igd"), mean_of(&plain, "igd"));
        let ratio = a / b;
        let ok = a < b && ratio <= 0.6;
        pass &= ok;
        parts.push(format!(
            "{label}: IGD morse {a:.3e} vs tau=0 {b:.3e}, ratio {ratio:.3} {} (failed runs {}/{})",
            verdict(ok),
            failures(&adapted),
            failures(&plain)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c3_plain_cbo_wins_gd(fronts: &mut Fronts) -> Outcome {
    let plain = finals(fronts, lame(1.0));
    let adapted = finals(fronts, morse(lame(1.0), 0.1));
    let (a, b) = (mean_of(&plain, "gd"), mean_of(&adapted, "gd"));
    outcome(
        a <= b,
        format!("lame gamma=1: GD tau=0 {a:.4e} <= GD morse {b:.4e}"),
    )
}

fn c4_energy_decays_after_transient(fronts: &mut Fronts) -> Outcome {
    let mut c = morse(do2dk(2, 1.0), 0.1);
    c.metrics.every = 10;
    let front = fronts.get(&c);
    let e = experiment::execute(&c, &front).expect("experiment");
    let runs: Vec<_> = e.completed().collect();
    let rows = runs.iter().map(|r| r.history.len()).min().unwrap_or(0);
    let mean = |i: usize, f: fn(&MetricsRecord64) -> f64| {
        runs.iter().map(|r| f(&r.history[i])).sum::<f64>() / runs.len() as f64
    };
    let gd_final = mean(rows - 1, |r| r.gd);
    let u_final = mean(rows - 1, |r| r.u_morse);
    let Some(t) = (0..rows).find(|&i| mean(i, |r| r.gd) < 2.0 * gd_final) else {
        return outcome(false, "GD never drops below twice its final value".into());
    };
    let k_t = runs[0].history[t].iteration;
    let u_t = mean(t, |r| r.u_morse);
    outcome(
        u_final < u_t,
        format!(
            "do2dk k=2 s=1 morse: GD first below 2x final ({gd_final:.3e}) at k={k_t}; U_M there {u_t:.4e}, at k={} {u_final:.4e} (failed runs {})",
            runs[0].history[rows - 1].iteration,
            failures(&e)
        ),
    )
}

fn c5_tau_sweep(fronts: &mut Fronts) -> Outcome {
    let mut c = morse(lame(0.25), 0.0);
    c.metrics.every = c.solver.k_max;
    c.run.runs = 10;
    c.sweep = Some(SweepSection {
        axis: SweepAxis::Tau,
        values: vec![0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
    });
    let r = sweep::execute(&c, |c| Ok(fronts.get(c))).expect("sweep");
    let series = r.series("gd");
    let (lo, hi) = (
        series[0].1.unwrap_or(f64::NAN),
        series[series.len() - 1].1.unwrap_or(f64::NAN),
    );
    let shape: Vec<String> = series
        .iter()
        .map(|(v, g)| format!("{v}:{:.2e}", g.unwrap_or(f64::NAN)))
        .collect();
    outcome(
        hi >= 2.0 * lo,
        format!(
            "lame gamma=0.25 morse, 10 runs per tau: GD(tau=1) / GD(tau=0) = {:.2} (need >= 2); {}",
            hi / lo,
            shape.join(" ")
        ),
    )
}

fn c6_laplace_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let problem: Problem64 = Problem::lame(0.5, 5).unwrap();
    let (n, d) = (100, 5);
    let mut worst: f64 = 0.0;
    let mut shift_exact = true;
    for _ in 0..100 {
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| rng.random_range(-1.0..1.0) * scale)
                    .collect()
            })
            .collect();
        let x = Points64::from_rows(&rows).unwrap();
        let g_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| problem.evaluate(&r.iter().map(|v| v / scale).collect::<Vec<_>>()))
            .collect();
        let g = Points64::from_rows(&g_rows).unwrap();
        let w = uniform_weights(7, 2, &mut rng).unwrap()[rng.random_range(0..7)].clone();
        let batch: Vec<usize> = (0..n).collect();
        let y = consensus_point(&x, &g, &w, 1e6, &batch).unwrap();
        let best = (0..n)
            .min_by(|&a, &b| {
                chebyshev(g.row(a), &w)
                    .unwrap()
                    .total_cmp(&chebyshev(g.row(b), &w).unwrap())
            })
            .unwrap();
        let dist = y
            .iter()
            .zip(x.row(best))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(dist / scale);

        // shift invariance on dyadic scores, where the shifted scores are exact
        let dy_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(0..1024) as f64 / 1024.0, 0.0])
            .collect();
        let dy = Points64::from_rows(&dy_rows).unwrap();
        let shifted = Points64::from_rows(
            &dy_rows
                .iter()
                .map(|r| vec![r[0] + 8.0, 0.0])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let e1 = WeightVector64::new(vec![1.0, 0.0]).unwrap();
        for alpha in [1.0, 64.0, 1e6] {
            let a = consensus_point(&x, &dy, &e1, alpha, &batch).unwrap();
            let b = consensus_point(&x, &shifted, &e1, alpha, &batch).unwrap();
            shift_exact &= a == b;
        }
    }
    outcome(
        worst <= 1e-6 && shift_exact,
        format!(
            "100 instances: max |Y - argmin| / scale = {worst:.2e} (need <= 1e-6) {}; shift invariance exact {}",
            verdict(worst <= 1e-6),
            verdict(shift_exact)
        ),
    )
}

fn c7_gradient_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut zero_ok = true;
    for m in [2usize, 3] {
        let specs = [
            PotentialSpec64::riesz(m),
            PotentialSpec64::newtonian(m),
            PotentialSpec64::morse(m, 20.0).unwrap(),
        ];
        for spec in &specs {
            zero_ok &= spec.gradient(&vec![0.0; m]).iter().all(|&v| v == 0.0);
            for _ in 0..100 {
                let rho = 10f64.powf(rng.random_range(-2.0..1.0));
                let dir: Vec<f64> = (0..m).map(|_| f64::standard_normal(&mut rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                let z: Vec<f64> = dir.iter().map(|v| v / norm * rho).collect();
                let grad = spec.gradient(&z);
                let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
                let h = 1e-6 * rho;
                for k in 0..m {
                    let mut p = z.clone();
                    let mut q = z.clone();
                    p[k] += h;
                    q[k] -= h;
                    let fd = (spec.value(&p) - spec.value(&q)) / (2.0 * h);
                    worst = worst.max((fd - grad[k]).abs() / gnorm);
                }
            }
        }
    }
    outcome(
        worst <= 1e-5 && zero_ok,
        format!(
            "riesz/newtonian/morse, m = 2 and 3, 100 points each: max relative error {worst:.2e} (need <= 1e-5) {}; grad U(0) = 0 {}",
            verdict(worst <= 1e-5),
            verdict(zero_ok)
        ),
    )
}

fn c8_projection_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_gap: f64 = 0.0;
    let mut optimal = true;
    let mut idempotent = true;
    for &(m, steps) in &[(2usize, 2000usize), (3, 200)] {
        let h = 1.0 / steps as f64;
        let mut grid = Vec::new();
        if m == 2 {
            for i in 0..=steps {
                grid.push(vec![i as f64 * h, 1.0 - i as f64 * h]);
            }
        } else {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    grid.push(vec![i as f64 * h, j as f64 * h, (steps - i - j) as f64 * h]);
                }
            }
        }
        for _ in 0..500 {
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = project_simplex(&v).unwrap();
            let dist = |q: &[f64]| q.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = grid
                .iter()
                .min_by(|a, b| dist(a).total_cmp(&dist(b)))
                .unwrap();
            optimal &= dist(&p) <= dist(best) + 1e-12;
            let gap = p
                .iter()
                .zip(best)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst_gap = worst_gap.max(gap / h);
            idempotent &= project_simplex(&p).unwrap() == p;
        }
    }
    let ok = worst_gap <= 2.0 && optimal && idempotent;
    outcome(
        ok,
        format!(
            "1000 inputs (m = 2, 3): max distance to grid optimum {worst_gap:.2} grid steps (need <= 2) {}; never worse than the grid {}; idempotent {}",
            verdict(worst_gap <= 2.0),
            verdict(optimal),
            verdict(idempotent)
        ),
    )
}

fn c9_hypervolume_monte_carlo() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let samples = 1_000_000;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..15);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        let pts = Points64::from_rows(&rows).unwrap();
        let gstar = [1.1, 1.1];
        let lo = [0.0, 0.0];
        let hv = hypervolume_2d(&pts, &gstar).unwrap();
        let mut hits = 0usize;
        for _ in 0..samples {
            let u = [
                rng.random_range(lo[0]..gstar[0]),
                rng.random_range(lo[1]..gstar[1]),
            ];
            if rows.iter().any(|p| p[0] <= u[0] && p[1] <= u[1]) {
                hits += 1;
            }
        }
        let mc = hits as f64 / samples as f64 * (gstar[0] - lo[0]) * (gstar[1] - lo[1]);
        worst = worst.max((mc - hv).abs());
    }
    outcome(
        worst <= 1e-2,
        format!("50 instances, 1e6 samples each: max |HV - MC| = {worst:.2e} (need <= 1e-2)"),
    )
}

fn c10_reference_flow() -> Outcome {
    let problem: Problem64 = Problem::lame(1.0, 10).unwrap();
    let riesz = PotentialSpec64::riesz(2);
    let front = generate_reference(&problem, 100, riesz).unwrap();
    let pts = front.points();
    let gaps: Vec<f64> = (1..pts.len())
        .map(|i| {
            pts.row(i)
                .iter()
                .zip(pts.row(i - 1))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let ratio = gaps.iter().cloned().fold(0.0, f64::max)
        / gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let chart = problem.front_chart().unwrap();
    let start = chart_images(&chart, &equispaced_coordinates(100));
    let (e_final, e_start) = (energy(&riesz, pts), energy(&riesz, &start));
    let pair = generate_reference(&problem, 2, riesz).unwrap();
    let p = pair.points();
    let end_err = (p.row(0)[0] - 1.0)
        .abs()
        .max(p.row(0)[1].abs())
        .max(p.row(1)[0].abs())
        .max((p.row(1)[1] - 1.0).abs());
    let ok_ratio = ratio <= 1.2;
    let ok_energy = e_final < e_start;
    let ok_ends = end_err <= 1e-3;
    outcome(
        ok_ratio && ok_energy && ok_ends,
        format!(
            "M=100 max/min gap {ratio:.3} (need <= 1.2) {}; energy {e_final:.6} < equispaced {e_start:.6} {}; M=2 endpoint error {end_err:.1e} (need <= 1e-3) {}",
            verdict(ok_ratio),
            verdict(ok_energy),
            verdict(ok_ends)
        ),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let key = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn cli(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_amcbo"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let common = [
        "--problem",
        "do2dk",
        "--k",
        "2",
        "--s",
        "1",
        "--d",
        "6",
        "--n-particles",
        "30",
        "--k-max",
        "300",
        "--potential",
        "morse",
        "--tau",
        "0.1",
        "--runs",
        "3",
        "--seed",
        "5",
        "--metrics-every",
        "25",
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, extra) in [
        ("run", vec![]),
        ("sweep", vec!["--axis", "sigma", "--values", "2,4"]),
    ] {
        let mut args = vec![name];
        args.extend_from_slice(&common);
        args.extend(extra);
        let (a, b) = (
            tmp.path().join(format!("{name}-a")),
            tmp.path().join(format!("{name}-b")),
        );
        let ran = cli(&args, &a) && cli(&args, &b);
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        let same = ran && !sa.is_empty() && sa == sb;
        pass &= same;
        parts.push(format!(
            "{name}: {} files, byte-identical {}",
            sa.len(),
            verdict(same)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c12_mini_batch(fronts: &mut Fronts) -> Outcome {
    let base = morse(lame(1.0), 0.1);
    let problem = base.problem.build().unwrap();
    let full = base.solver.build(2, 3).unwrap();
    let batched = SolverConfig64 {
        batch_size: Some(full.n_particles),
        ..full.clone()
    };
    let a = iterate(&problem, full, |_| ControlFlow::Continue(())).unwrap();
    let b = iterate(&problem, batched, |_| ControlFlow::Continue(())).unwrap();
    let exact = a.positions == b.positions && a.weights == b.weights;

    let mut c = base.clone();
    c.run.runs = 10;
    let full_runs = finals(fronts, c.clone());
    c.solver.batch_size = Some(c.solver.n_particles / 10);
    let batch_runs = finals(fronts, c);
    let (gf, gb) = (mean_of(&full_runs, "gd"), mean_of(&batch_runs, "gd"));
    let within = gb <= 3.0 * gf && gb >= gf / 3.0;
    outcome(
        exact && within,
        format!(
            "batch = N bit-identical to full sum over 5000 iterations {}; lame gamma=1 morse tau=0.1, 10 seeds: GD batch N/10 {gb:.3e} vs full {gf:.3e} (need within 3x) {}",
            verdict(exact),
            verdict(within)
        ),
    )
}

type Check = Box<dyn FnOnce(&mut Fronts) -> Outcome>;

fn main() {
    // `cargo test` passes libtest flags; a name filter that excludes this
    // suite (as `--list` or a non-matching filter) skips it.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let mut fronts = Fronts::default();
    let criteria: Vec<(&str, Check)> = vec![
        ("GD decay", Box::new(c1_gd_decay)),
        (
            "adaptation improves IGD",
            Box::new(c2_adaptation_improves_igd),
        ),
        ("tau = 0 wins on GD", Box::new(c3_plain_cbo_wins_gd)),
        (
            "two-phase energy profile",
            Box::new(c4_energy_decays_after_transient),
        ),
        ("tau-sweep shape", Box::new(c5_tau_sweep)),
        ("consensus Laplace limit", Box::new(|_| c6_laplace_limit())),
        ("gradient oracles", Box::new(|_| c7_gradient_oracles())),
        (
            "simplex projection oracle",
            Box::new(|_| c8_projection_oracle()),
        ),
        (
            "hypervolume Monte Carlo",
            Box::new(|_| c9_hypervolume_monte_carlo()),
        ),
        ("reference flow", Box::new(|_| c10_reference_flow())),
        ("determinism", Box::new(|_| c11_determinism())),
        ("mini-batch consistency", Box::new(c12_mini_batch)),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = check(&mut fronts);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] criterion {:>2} {name}: {} ({:.1}s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
