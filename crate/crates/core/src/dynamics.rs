//! The particle engine: Euler–Maruyama consensus updates of the positions and
//! energy-driven adaptation of the scalarization weights.
//!
//! Every iteration reads a frozen snapshot (positions, weights, objective
//! values) and writes a fresh buffer, so the per-particle updates are
//! independent of evaluation order. Each particle owns a ChaCha stream derived
//! from the run seed; stream 0 is reserved for swarm-level draws (weights for
//! `m > 2`, mini-batches).

use std::ops::ControlFlow;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::objectives::Objective;
use crate::points::Points;
use crate::potentials::{PotentialSpec, SINGULAR_GUARD};
use crate::scalar::{norm, Scalar};
use crate::scalarization::{consensus_point_into, ConsensusScratch};
use crate::simplex::{project_simplex, uniform_weights, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diffusion {
    /// `|X - Y| I`.
    Isotropic,
    /// `diag(X - Y)`.
    #[default]
    Anisotropic,
}

/// Which discrete weight update to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightRule {
    /// Gradient rule for `m = 2`, radial rule otherwise.
    #[default]
    Auto,
    /// `W + tau/|B| sum grad U(g_i - g_j) dt`, then projection. Requires `m = 2`.
    Gradient,
    /// Radial rule driven by `r'` along weight differences, then projection.
    Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub lambda: T,
    pub sigma: T,
    pub alpha: T,
    pub tau: T,
    pub dt: T,
    pub n_particles: usize,
    pub k_max: usize,
    pub diffusion: Diffusion,
    pub potential: Option<PotentialSpec<T>>,
    /// Mini-batch size `M`: each iteration the swarm is split into random
    /// groups of `M` that interact only internally. `None` means the full swarm.
    pub batch_size: Option<usize>,
    /// Clamp positions to `[0, 1]^d` after every step.
    pub box_projection: bool,
    pub weight_rule: WeightRule,
    pub seed: u64,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::one(),
            sigma: T::lit(4.0),
            alpha: T::lit(1e6),
            tau: T::zero(),
            dt: T::lit(0.01),
            n_particles: 100,
            k_max: 5000,
            diffusion: Diffusion::Anisotropic,
            potential: None,
            batch_size: None,
            box_projection: false,
            weight_rule: WeightRule::Auto,
            seed: 0,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: T| {
            if v.is_finite() && v >= T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        check("lambda", self.lambda)?;
        check("sigma", self.sigma)?;
        check("alpha", self.alpha)?;
        check("tau", self.tau)?;
        check("dt", self.dt)?;
        if self.n_particles == 0 {
            return Err(Error::InvalidConfig("need at least one particle".into()));
        }
        if let Some(b) = self.batch_size {
            if b == 0 || b > self.n_particles {
                return Err(Error::InvalidConfig(format!(
                    "batch size {b} outside 1..={}",
                    self.n_particles
                )));
            }
        }
        if self.tau > T::zero() && self.potential.is_none() {
            return Err(Error::InvalidConfig(
                "tau > 0 requires an interaction potential".into(),
            ));
        }
        Ok(())
    }

    /// Effective batch size.
    pub fn batch_len(&self) -> usize {
        self.batch_size.unwrap_or(self.n_particles)
    }

    fn weights_active(&self) -> bool {
        self.tau > T::zero() && self.potential.is_some()
    }
}

/// Per-coordinate scale factors of the diffusion matrix for a particle at `x`
/// attracted to `y`.
pub fn diffusion_matrix<T: Scalar>(mode: Diffusion, x: &[T], y: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    diffusion_into(mode, x, y, &mut out);
    out
}

fn diffusion_into<T: Scalar>(mode: Diffusion, x: &[T], y: &[T], out: &mut [T]) {
    match mode {
        Diffusion::Anisotropic => {
            for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
                *o = a - b;
            }
        }
        Diffusion::Isotropic => {
            let dist = crate::scalar::dist_sq(x, y).sqrt();
            out.iter_mut().for_each(|o| *o = dist);
        }
    }
}

/// Uniform random `m`-subset of `0..n` without replacement, in increasing
/// order. The full index set is returned without touching `rng`.
pub fn sample_batch<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(invalid(format!("batch size {m} outside 1..={n}")));
    }
    if m == n {
        return Ok((0..n).collect());
    }
    let mut batch = index::sample(rng, n, m).into_vec();
    batch.sort_unstable();
    Ok(batch)
}

/// Random partition of `0..n` into groups of `m` (the last group holds the
/// remainder), each in increasing order. Every particle interacts only within
/// its own group. `m == n` gives the single full group without touching
/// `rng`.
pub fn partition_batches<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if m == 0 || m > n {
        return Err(invalid(format!("batch size {m} outside 1..={n}")));
    }
    if m == n {
        return Ok(vec![(0..n).collect()]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order
        .chunks(m)
        .map(|c| {
            let mut g = c.to_vec();
            g.sort_unstable();
            g
        })
        .collect())
}

/// Independent random streams: one swarm-level stream plus one per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Streams {
    pub master: ChaCha8Rng,
    pub particles: Vec<ChaCha8Rng>,
}

impl Streams {
    pub fn new(seed: u64, n: usize) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            master: stream(0),
            particles: (0..n as u64).map(|i| stream(i + 1)).collect(),
        }
    }
}

/// Particle states `(X^i, W^i)`, the iteration counter and the random streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Swarm<T> {
    pub positions: Points<T>,
    pub weights: Vec<WeightVector<T>>,
    pub iteration: usize,
    pub streams: Streams,
}

impl<T: Scalar> Swarm<T> {
    /// Positions uniform on `[0, 1]^d` (each from its particle's stream) and
    /// weights spread uniformly over the simplex.
    pub fn initialize(n: usize, d: usize, m: usize, seed: u64) -> Result<Self> {
        let mut streams = Streams::new(seed, n);
        let mut positions = Points::zeros(n, d);
        for (row, rng) in positions.rows_mut().zip(streams.particles.iter_mut()) {
            for x in row.iter_mut() {
                *x = T::unit_uniform(rng);
            }
        }
        let weights = uniform_weights(n, m, &mut streams.master)?;
        Ok(Self {
            positions,
            weights,
            iteration: 0,
            streams,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Read-only view handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct SwarmView<'a, T> {
    pub iteration: usize,
    pub positions: &'a Points<T>,
    pub weights: &'a [WeightVector<T>],
    /// `g(X^i)` for the current positions.
    pub images: &'a Points<T>,
}

/// Euler–Maruyama position update from a frozen snapshot.
///
/// `rngs[i]` supplies the standard normals of particle `i` (exactly `d` draws
/// per call). `iteration` only labels blow-up errors.
#[allow(clippy::too_many_arguments)]
pub fn step_positions<T: Scalar, R: Rng>(
    positions: &Points<T>,
    weights: &[WeightVector<T>],
    gvalues: &Points<T>,
    batch: &[usize],
    config: &SolverConfig<T>,
    rngs: &mut [R],
    iteration: usize,
) -> Result<Points<T>> {
    let mut next = positions.clone();
    let mut scratch = PositionScratch::new(positions.dim());
    let rows: Vec<usize> = (0..positions.len()).collect();
    step_positions_into(
        positions,
        weights,
        gvalues,
        &rows,
        batch,
        config,
        rngs,
        iteration,
        &mut scratch,
        &mut next,
    )?;
    Ok(next)
}

struct PositionScratch<T> {
    consensus: Vec<T>,
    diffusion: Vec<T>,
    scores: ConsensusScratch<T>,
}

impl<T: Scalar> PositionScratch<T> {
    fn new(d: usize) -> Self {
        Self {
            consensus: vec![T::zero(); d],
            diffusion: vec![T::zero(); d],
            scores: ConsensusScratch::default(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn step_positions_into<T: Scalar, R: Rng>(
    positions: &Points<T>,
    weights: &[WeightVector<T>],
    gvalues: &Points<T>,
    rows: &[usize],
    batch: &[usize],
    config: &SolverConfig<T>,
    rngs: &mut [R],
    iteration: usize,
    scratch: &mut PositionScratch<T>,
    next: &mut Points<T>,
) -> Result<()> {
    let n = positions.len();
    if weights.len() != n || gvalues.len() != n || rngs.len() != n {
        return Err(invalid("swarm buffers differ in particle count"));
    }
    // y + (1 - lambda dt)(x - y) is exact both for lambda dt = 1 and for x = y
    let keep = T::one() - config.lambda * config.dt;
    let noise = config.sigma * config.dt.sqrt();
    for &i in rows {
        let x = positions.row(i);
        consensus_point_into(
            positions,
            gvalues,
            &weights[i],
            config.alpha,
            batch,
            &mut scratch.scores,
            &mut scratch.consensus,
        )?;
        diffusion_into(
            config.diffusion,
            x,
            &scratch.consensus,
            &mut scratch.diffusion,
        );
        let out = next.row_mut(i);
        let rng = &mut rngs[i];
        for k in 0..x.len() {
            let b = T::standard_normal(rng);
            let y = scratch.consensus[k];
            let mut v = y + keep * (x[k] - y) + noise * scratch.diffusion[k] * b;
            if config.box_projection {
                v = v.max(T::zero()).min(T::one());
            }
            if !v.is_finite() {
                return Err(Error::NumericalBlowup {
                    iteration,
                    particle: i,
                });
            }
            out[k] = v;
        }
    }
    Ok(())
}

fn require_potential<T: Scalar>(config: &SolverConfig<T>) -> Result<&PotentialSpec<T>> {
    config
        .potential
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("weight update needs a potential".into()))
}

/// Sums `term(i, j)` over `j in batch` for every particle `i` (only for `i`
/// in the batch unless `all_rows`), writing row `i` of the `n x m` result. `term` must be antisymmetric (`term(j, i) =
/// -term(i, j)` bit for bit); pairs inside the batch are then evaluated once.
/// Each row still accumulates its terms in increasing `j`, so the result is
/// identical to the direct double loop.
fn pair_sums<T: Scalar>(
    n: usize,
    m: usize,
    batch: &[usize],
    all_rows: bool,
    mut term: impl FnMut(usize, usize, &mut [T]) -> bool,
) -> Vec<T> {
    let mut in_batch = vec![false; n];
    batch.iter().for_each(|&j| in_batch[j] = true);
    let mut sums = vec![T::zero(); n * m];
    let mut c = vec![T::zero(); m];
    for i in 0..n {
        let upper = if in_batch[i] {
            &batch[batch.partition_point(|&j| j <= i)..]
        } else if all_rows {
            batch
        } else {
            continue;
        };
        for &j in upper {
            if j == i || !term(i, j, &mut c) {
                continue;
            }
            for k in 0..m {
                sums[i * m + k] = sums[i * m + k] + c[k];
                if in_batch[i] {
                    sums[j * m + k] = sums[j * m + k] - c[k];
                }
            }
        }
    }
    sums
}

/// Gradient weight update for bi-objective problems:
/// `V = W_i + tau/|B| sum_{j in B} grad U(g_i - g_j) dt`, `W_i <- Proj(V)`.
/// `batch` must be sorted.
pub fn step_weights_2d<T: Scalar>(
    weights: &[WeightVector<T>],
    gvalues: &Points<T>,
    batch: &[usize],
    config: &SolverConfig<T>,
) -> Result<Vec<WeightVector<T>>> {
    let mut next = weights.to_vec();
    update_weights(
        WeightStep::Gradient,
        weights,
        gvalues,
        batch,
        true,
        config,
        &mut next,
    )?;
    Ok(next)
}

/// Radial weight update, valid for any `m >= 2`:
/// `V = W_i - tau/|B| sum_{j in B} (W_i - W_j)/|W_i - W_j| r'(|g_j - g_i|) dt`.
/// Pairs with `|W_i - W_j| < 1e-14` contribute nothing. `batch` must be sorted.
pub fn step_weights_general<T: Scalar>(
    weights: &[WeightVector<T>],
    gvalues: &Points<T>,
    batch: &[usize],
    config: &SolverConfig<T>,
) -> Result<Vec<WeightVector<T>>> {
    let mut next = weights.to_vec();
    update_weights(
        WeightStep::Radial,
        weights,
        gvalues,
        batch,
        true,
        config,
        &mut next,
    )?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WeightStep {
    Gradient,
    Radial,
}

/// Writes the updated weights of the rows in `batch` (of every row if
/// `all_rows`) into `next`, reading the frozen snapshot `weights`.
fn update_weights<T: Scalar>(
    rule: WeightStep,
    weights: &[WeightVector<T>],
    gvalues: &Points<T>,
    batch: &[usize],
    all_rows: bool,
    config: &SolverConfig<T>,
    next: &mut [WeightVector<T>],
) -> Result<()> {
    if config.tau == T::zero() {
        return Ok(());
    }
    let potential = require_potential(config)?;
    let m = gvalues.dim();
    let rate = config.tau / T::from_count(batch.len()) * config.dt;
    let sums = match rule {
        WeightStep::Gradient => {
            if m != 2 {
                return Err(invalid("the gradient weight rule needs m = 2"));
            }
            let mut z = [T::zero(); 2];
            pair_sums(weights.len(), 2, batch, all_rows, |i, j, out| {
                let (gi, gj) = (gvalues.row(i), gvalues.row(j));
                z[0] = gi[0] - gj[0];
                z[1] = gi[1] - gj[1];
                potential.gradient_into(&z, out);
                true
            })
        }
        WeightStep::Radial => {
            let guard = T::lit(SINGULAR_GUARD);
            pair_sums(weights.len(), m, batch, all_rows, |i, j, out| {
                let (wi, wj) = (&weights[i], &weights[j]);
                for k in 0..m {
                    out[k] = wi[k] - wj[k];
                }
                let wdist = norm(out);
                if wdist < guard {
                    return false;
                }
                let rho = crate::scalar::dist_sq(gvalues.row(j), gvalues.row(i)).sqrt();
                let strength = potential.radial_derivative(rho) / wdist;
                out.iter_mut().for_each(|o| *o = *o * strength);
                true
            })
        }
    };
    // the gradient rule ascends the potential, the radial rule descends it
    let rate = if rule == WeightStep::Gradient {
        rate
    } else {
        -rate
    };
    let mut update = |i: usize| -> Result<()> {
        let s = &sums[i * m..(i + 1) * m];
        let v: Vec<T> = weights[i]
            .iter()
            .zip(s)
            .map(|(&w, &s)| w + rate * s)
            .collect();
        next[i] = project_simplex(&v)?;
        Ok(())
    };
    if all_rows {
        (0..weights.len()).try_for_each(&mut update)
    } else {
        batch.iter().try_for_each(|&i| update(i))
    }
}

/// Steps a swarm on one objective.
pub struct Solver<'p, T: Scalar, P: Objective<T> + ?Sized> {
    problem: &'p P,
    config: SolverConfig<T>,
    swarm: Swarm<T>,
    images: Points<T>,
    next_positions: Points<T>,
    scratch: PositionScratch<T>,
}

impl<'p, T: Scalar, P: Objective<T> + ?Sized> Solver<'p, T, P> {
    pub fn new(problem: &'p P, config: SolverConfig<T>) -> Result<Self> {
        config.validate()?;
        let (d, m) = (problem.dim(), problem.n_objectives());
        if d == 0 || m < 2 {
            return Err(Error::InvalidConfig(format!(
                "problem needs d >= 1 and m >= 2, got d = {d}, m = {m}"
            )));
        }
        if config.weight_rule == WeightRule::Gradient && m != 2 && config.weights_active() {
            return Err(Error::InvalidConfig(
                "the gradient weight rule needs m = 2".into(),
            ));
        }
        let swarm = Swarm::initialize(config.n_particles, d, m, config.seed)?;
        Self::from_swarm(problem, config, swarm)
    }

    /// Resumes from an existing swarm.
    pub fn from_swarm(problem: &'p P, config: SolverConfig<T>, swarm: Swarm<T>) -> Result<Self> {
        config.validate()?;
        let n = swarm.len();
        if n != config.n_particles || swarm.positions.dim() != problem.dim() {
            return Err(Error::InvalidConfig(
                "swarm shape does not match the problem".into(),
            ));
        }
        let d = problem.dim();
        let mut solver = Self {
            problem,
            images: Points::zeros(n, problem.n_objectives()),
            next_positions: Points::zeros(n, d),
            scratch: PositionScratch::new(d),
            config,
            swarm,
        };
        solver.evaluate_images()?;
        Ok(solver)
    }

    fn evaluate_images(&mut self) -> Result<()> {
        for (i, (x, out)) in self
            .swarm
            .positions
            .rows()
            .zip(self.images.rows_mut())
            .enumerate()
        {
            self.problem.evaluate_into(x, out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalBlowup {
                    iteration: self.swarm.iteration,
                    particle: i,
                });
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    pub fn swarm(&self) -> &Swarm<T> {
        &self.swarm
    }

    pub fn into_swarm(self) -> Swarm<T> {
        self.swarm
    }

    pub fn view(&self) -> SwarmView<'_, T> {
        SwarmView {
            iteration: self.swarm.iteration,
            positions: &self.swarm.positions,
            weights: &self.swarm.weights,
            images: &self.images,
        }
    }

    /// Advances one iteration.
    pub fn step(&mut self) -> Result<()> {
        let n = self.swarm.len();
        let k = self.swarm.iteration;
        let groups = partition_batches(n, self.config.batch_len(), &mut self.swarm.streams.master)?;

        for group in &groups {
            step_positions_into(
                &self.swarm.positions,
                &self.swarm.weights,
                &self.images,
                group,
                group,
                &self.config,
                &mut self.swarm.streams.particles,
                k,
                &mut self.scratch,
                &mut self.next_positions,
            )?;
        }

        if self.config.weights_active() {
            let rule = match self.config.weight_rule {
                WeightRule::Auto if self.images.dim() == 2 => WeightStep::Gradient,
                WeightRule::Gradient => WeightStep::Gradient,
                _ => WeightStep::Radial,
            };
            let mut next = self.swarm.weights.clone();
            for group in &groups {
                update_weights(
                    rule,
                    &self.swarm.weights,
                    &self.images,
                    group,
                    false,
                    &self.config,
                    &mut next,
                )
                .map_err(|e| match e {
                    Error::InvalidInput(_) => Error::NumericalBlowup {
                        iteration: k,
                        particle: 0,
                    },
                    other => other,
                })?;
            }
            self.swarm.weights = next;
        }

        std::mem::swap(&mut self.swarm.positions, &mut self.next_positions);
        self.swarm.iteration += 1;
        self.evaluate_images()
    }

    /// Runs until `k_max`, calling `observer` on the initial state and after
    /// every step. Returning `Break` stops early.
    pub fn run<F>(&mut self, mut observer: F) -> Result<()>
    where
        F: FnMut(&SwarmView<'_, T>) -> ControlFlow<()>,
    {
        if observer(&self.view()).is_break() {
            return Ok(());
        }
        while self.swarm.iteration < self.config.k_max {
            self.step()?;
            if observer(&self.view()).is_break() {
                break;
            }
        }
        Ok(())
    }
}

/// Runs the full algorithm from a fresh swarm and returns the final state.
pub fn iterate<T, P, F>(problem: &P, config: SolverConfig<T>, observer: F) -> Result<Swarm<T>>
where
    T: Scalar,
    P: Objective<T> + ?Sized,
    F: FnMut(&SwarmView<'_, T>) -> ControlFlow<()>,
{
    let mut solver = Solver::new(problem, config)?;
    solver.run(observer)?;
    Ok(solver.into_swarm())
}
