//! Direct simulation of the measurement protocol: exponential waiting times,
//! unitary stretches, Born-rule collapses.
//!
//! After every collapse the state is a basis vector, so each stretch only
//! needs one column of `U(tau)`. Trajectory `i` draws from its own ChaCha
//! stream seeded by [`trajectory_seed`], which makes ensembles independent of
//! the worker count.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::{ks_distance, Density, MixedDistribution, XGrid};
use crate::error::{Error, Result};
use crate::system::{MonitoredSystem, StateVector, Workspace};

/// One realization of the protocol up to time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub jump_times: Vec<f64>,
    pub outcomes: Vec<usize>,
    #[serde(skip)]
    pub final_state: StateVector,
    pub final_value: f64,
}

/// Per-trajectory seed: splitmix64 finalizer over `base` and the index.
pub fn trajectory_seed(base: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(base ^ mix(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Scratch space reused across trajectories of one worker.
struct Scratch {
    ws: Workspace,
    probs: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { ws: Workspace::new(n), probs: vec![0.0; n] }
    }
}

/// Summary of a trajectory: final value, jump count, and optionally the events.
struct Outcome {
    value: f64,
    jumps: usize,
    events: Option<(Vec<f64>, Vec<usize>)>,
    last_index: usize,
    last_time: f64,
}

fn simulate(system: &MonitoredSystem, t: f64, seed: u64, scratch: &mut Scratch, keep_events: bool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = system.rate();
    let mut index = system.initial_index();
    let mut now = 0.0;
    let mut jumps = 0;
    let mut events = keep_events.then(|| (Vec::new(), Vec::new()));
    if rate > 0.0 {
        let waiting = Exp::new(rate).expect("rate is positive");
        loop {
            let tau: f64 = waiting.sample(&mut rng);
            if now + tau > t {
                break;
            }
            now += tau;
            system.transition_column_into(index, tau, &mut scratch.probs, &mut scratch.ws);
            index = born_sample(&scratch.probs, rng.random::<f64>());
            jumps += 1;
            if let Some((times, outcomes)) = events.as_mut() {
                times.push(now);
                outcomes.push(index);
            }
        }
    }
    system.transition_column_into(index, t - now, &mut scratch.probs, &mut scratch.ws);
    let value = scratch.probs.iter().zip(system.observable()).map(|(p, o)| p * o).sum();
    Outcome { value, jumps, events, last_index: index, last_time: now }
}

/// Inverse-CDF draw; the last index with positive probability absorbs round-off.
fn born_sample(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (a, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last = a;
        }
        acc += p;
        if target < acc {
            return a;
        }
    }
    last
}

/// Runs one trajectory of length `t` with its own seed.
pub fn sample_trajectory(system: &MonitoredSystem, t: f64, seed: u64) -> Result<TrajectoryRecord> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    let n = system.dim();
    let mut scratch = Scratch::new(n);
    let out = simulate(system, t, seed, &mut scratch, true);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
    system.propagate_basis_into(out.last_index, t - out.last_time, &mut amplitudes, &mut scratch.ws);
    let (jump_times, outcomes) = out.events.unwrap_or_default();
    Ok(TrajectoryRecord { jump_times, outcomes, final_state: StateVector::new(amplitudes), final_value: out.value })
}

/// Estimate with jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Aggregated ensemble. Histogram counts sit on the nodes of `grid`, each
/// value assigned to its nearest node.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub time: f64,
    pub grid: XGrid,
    pub counts: Vec<u64>,
    /// Final values in trajectory order.
    pub values: Vec<f64>,
    /// Raw moments `k = 1..=4`.
    pub moments: [Estimate; 4],
    pub no_click_fraction: f64,
    pub mean_jumps: f64,
    pub jump_variance: f64,
}

impl EnsembleStats {
    /// Histogram masses per node; they sum to one.
    pub fn masses(&self) -> Vec<f64> {
        self.counts.iter().map(|c| *c as f64 / self.n_traj as f64).collect()
    }

    pub fn moment(&self, k: u32) -> Estimate {
        assert!((1..=4).contains(&k), "moments 1..=4 are tracked");
        self.moments[k as usize - 1]
    }

    /// Binomial standard error of the no-click fraction around `p`.
    pub fn no_click_sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.n_traj as f64).sqrt()
    }

    /// The histogram as a density on `grid`.
    pub fn to_distribution(&self) -> MixedDistribution {
        MixedDistribution {
            time: self.time,
            atoms: Vec::new(),
            density: Some(Density::from_masses(self.grid, &self.masses())),
        }
    }
}

/// Jackknife over `blocks` contiguous blocks of `f(x)`'s sample mean.
pub fn jackknife_mean(samples: &[f64], blocks: usize) -> Estimate {
    let n = samples.len();
    let total: f64 = samples.iter().sum();
    let value = total / n as f64;
    let blocks = blocks.min(n);
    if blocks < 2 {
        return Estimate { value, std_error: f64::NAN };
    }
    let leave_out: Vec<f64> = (0..blocks)
        .map(|b| {
            let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
            let block: f64 = samples[lo..hi].iter().sum();
            (total - block) / (n - (hi - lo)) as f64
        })
        .collect();
    let mean = leave_out.iter().sum::<f64>() / blocks as f64;
    let var = leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (blocks - 1) as f64 / blocks as f64;
    Estimate { value, std_error: var.sqrt() }
}

const JACKKNIFE_BLOCKS: usize = 100;

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {workers} workers: {e}")))
}

/// Runs `n_traj` trajectories on `workers` threads. Results depend only on
/// `base_seed`, never on the worker count.
pub fn run_ensemble(
    system: &MonitoredSystem,
    t: f64,
    n_traj: usize,
    base_seed: u64,
    workers: usize,
    grid: &XGrid,
) -> Result<EnsembleStats> {
    if n_traj == 0 {
        return Err(Error::InvalidInput("need at least one trajectory".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    let n = system.dim();
    let results: Vec<(f64, usize)> = pool(workers)?.install(|| {
        (0..n_traj)
            .into_par_iter()
            .map_init(
                || Scratch::new(n),
                |scratch, i| {
                    let out = simulate(system, t, trajectory_seed(base_seed, i as u64), scratch, false);
                    (out.value, out.jumps)
                },
            )
            .collect()
    });

    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut counts = vec![0u64; grid.nodes()];
    for v in &values {
        counts[grid.nearest(*v)] += 1;
    }
    let moments = [1, 2, 3, 4].map(|k| {
        let powered: Vec<f64> = values.iter().map(|v| v.powi(k)).collect();
        jackknife_mean(&powered, JACKKNIFE_BLOCKS)
    });
    let no_clicks = results.iter().filter(|r| r.1 == 0).count();
    let mean_jumps = results.iter().map(|r| r.1 as f64).sum::<f64>() / n_traj as f64;
    let jump_variance = if n_traj > 1 {
        results.iter().map(|r| (r.1 as f64 - mean_jumps).powi(2)).sum::<f64>() / (n_traj - 1) as f64
    } else {
        0.0
    };
    Ok(EnsembleStats {
        n_traj,
        time: t,
        grid: *grid,
        counts,
        values,
        moments,
        no_click_fraction: no_clicks as f64 / n_traj as f64,
        mean_jumps,
        jump_variance,
    })
}

/// Kolmogorov-Smirnov distance between the ensemble histogram and an exact
/// distribution on the same grid (atoms merged into their nearest node).
pub fn distribution_distance(empirical: &EnsembleStats, exact: &MixedDistribution) -> Result<f64> {
    let exact_masses = exact.node_masses(&empirical.grid)?;
    ks_distance(&empirical.masses(), &exact_masses)
}

/// KS distance between the sorted final values and a continuous CDF.
pub fn ks_against_cdf<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, x)| {
        let f = cdf(*x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

#[derive(Serialize)]
struct DumpLine<'a> {
    index: usize,
    seed: u64,
    #[serde(flatten)]
    record: &'a TrajectoryRecord,
}

/// Writes trajectories `0..count` as newline-delimited JSON
/// (`index`, `seed`, `jump_times`, `outcomes`, `final_value`).
pub fn dump_trajectories<W: Write>(
    system: &MonitoredSystem,
    t: f64,
    count: usize,
    base_seed: u64,
    mut out: W,
) -> Result<()> {
    for index in 0..count {
        let seed = trajectory_seed(base_seed, index as u64);
        let record = sample_trajectory(system, t, seed)?;
        serde_json::to_writer(&mut out, &DumpLine { index, seed, record: &record })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
