//! Stochastic trajectory sampler.
//!
//! One trajectory of horizon `t` samples the background chain from its
//! initial distribution and, for each of the `t` transitions, draws the
//! (next state, batch size) pair with a single uniform draw against the
//! cumulative of the flattened outcome list, then one service time per
//! customer. The batch of transition `k` arrives at slot `k`; a customer
//! with service time `Y` occupies slots `k .. k + Y - 1`, so it is present
//! at slot `u` iff `k <= u` and `Y > u - k`, and anyone finishing exactly at
//! the horizon is not counted. These are the same conventions the exact
//! engine uses, which is what makes the empirical comparisons meaningful.
//!
//! Reproducibility: every run gets its own ChaCha8 generator seeded from the
//! ensemble seed with the run index as the stream id. Aggregation is integer
//! arithmetic, so results are identical for any partition of runs across
//! workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::arrival::DBmapModel;
use crate::service::ServiceLaw;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("effective path needs horizon {requested} but the trajectory stops at {available}")]
    HorizonExceedsTrajectory { requested: u64, available: u64 },
}

/// All customers of one batch: arrival slot plus one service time each.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchArrival {
    pub epoch: u64,
    pub service_times: Vec<u64>,
}

/// One simulated realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub horizon: u64,
    /// Background state at slots `0 ..= horizon`.
    pub state_path: Vec<usize>,
    /// Non-empty batches, in arrival order.
    pub arrivals: Vec<BatchArrival>,
    /// `counts[s]` is the number of customers present at slot `s`,
    /// `s = 0 ..= horizon`.
    pub counts: Vec<u64>,
}

impl TrajectoryRecord {
    /// Customer count at the horizon itself.
    pub fn final_count(&self) -> u64 {
        *self.counts.last().expect("counts cover 0..=horizon")
    }
}

/// Empirical distribution with per-bin binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalResult {
    pub n_runs: u64,
    pub seed: u64,
    pub horizon: u64,
    /// `probabilities[m]` estimates the probability of `m` customers.
    pub probabilities: Vec<f64>,
    /// `sqrt(p (1 - p) / n)` per bin.
    pub standard_errors: Vec<f64>,
    pub mean: f64,
    pub mean_se: f64,
    pub second_factorial_moment: f64,
    pub second_factorial_moment_se: f64,
}

/// Violation counts from the pathwise consistency sweep over the effective
/// (will-survive-to-horizon) process.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EffectiveCheckReport {
    pub runs: u64,
    /// Trajectories where the path at the horizon differs from the raw count.
    pub terminal_identity_failures: u64,
    /// Trajectories where the effective count exceeds the raw count somewhere.
    pub bound_failures: u64,
    /// Trajectories where the effective path decreases somewhere.
    pub monotonicity_failures: u64,
}

impl EffectiveCheckReport {
    pub fn is_clean(&self) -> bool {
        self.terminal_identity_failures == 0
            && self.bound_failures == 0
            && self.monotonicity_failures == 0
    }
}

/// Generator for run `run_index` of an ensemble: one shared seed, one ChaCha
/// stream per run, so any execution order reproduces the same draws.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

fn sample_index(rng: &mut impl Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    let mut count = 0;
    for (idx, w) in weights.clone().enumerate() {
        count = idx + 1;
        if w > 0.0 {
            last_positive = idx;
        }
        cum += w;
        if u < cum {
            return idx;
        }
    }
    // cumulative fell short of u by rounding; settle on the last real outcome
    debug_assert!(count > 0);
    last_positive
}

/// Sample one realization up to `horizon` slots.
pub fn simulate_trajectory(
    model: &DBmapModel,
    law: &ServiceLaw,
    horizon: u64,
    rng: &mut impl Rng,
) -> TrajectoryRecord {
    let k = model.num_states();
    let max_batch = model.max_batch_size();
    let len = horizon as usize;

    let mut state = sample_index(rng, model.initial_dist().iter().copied());
    let mut state_path = Vec::with_capacity(len + 1);
    state_path.push(state);
    let mut arrivals = Vec::new();
    // presence as a difference array over slots 0..=horizon
    let mut delta = vec![0i64; len + 2];

    for epoch in 0..horizon {
        let flat = sample_index(
            rng,
            (0..k)
                .flat_map(|j| (0..=max_batch).map(move |l| (j, l)))
                .map(|(j, l)| model.batch_prob(state, j, l)),
        );
        let next_state = flat / (max_batch + 1);
        let batch = flat % (max_batch + 1);
        if batch > 0 {
            let mut service_times = Vec::with_capacity(batch);
            for _ in 0..batch {
                let y = law.sample(rng);
                delta[epoch as usize] += 1;
                let end = (epoch + y).min(horizon + 1) as usize;
                delta[end] -= 1;
                service_times.push(y);
            }
            arrivals.push(BatchArrival {
                epoch,
                service_times,
            });
        }
        state = next_state;
        state_path.push(state);
    }

    let mut counts = Vec::with_capacity(len + 1);
    let mut running = 0i64;
    for d in delta.iter().take(len + 1) {
        running += d;
        counts.push(running as u64);
    }

    TrajectoryRecord {
        horizon,
        state_path,
        arrivals,
        counts,
    }
}

/// Path of customers present at slot `s` that will still be in service at
/// slot `target`, for `s = 0 ..= target`. Both membership conditions are
/// evaluated explicitly.
pub fn effective_path(traj: &TrajectoryRecord, target: u64) -> Result<Vec<u64>, SimError> {
    if target > traj.horizon {
        return Err(SimError::HorizonExceedsTrajectory {
            requested: target,
            available: traj.horizon,
        });
    }
    let mut path = Vec::with_capacity(target as usize + 1);
    for s in 0..=target {
        let mut count = 0u64;
        for batch in &traj.arrivals {
            if batch.epoch > s {
                break;
            }
            for &y in &batch.service_times {
                let present_now = y > s - batch.epoch;
                let survives_to_target = y > target - batch.epoch;
                if present_now && survives_to_target {
                    count += 1;
                }
            }
        }
        path.push(count);
    }
    Ok(path)
}

/// Integer sums across runs; exact, so merging is order-independent.
#[derive(Debug, Clone, Default)]
struct Accumulator {
    runs: u64,
    counts: Vec<u64>,
    sum_n: u128,
    sum_n_sq: u128,
    sum_ff: u128,
    sum_ff_sq: u128,
}

impl Accumulator {
    fn record(&mut self, n: u64) {
        self.runs += 1;
        if self.counts.len() <= n as usize {
            self.counts.resize(n as usize + 1, 0);
        }
        self.counts[n as usize] += 1;
        let n = n as u128;
        let ff = n * n.saturating_sub(1);
        self.sum_n += n;
        self.sum_n_sq += n * n;
        self.sum_ff += ff;
        self.sum_ff_sq += ff * ff;
    }

    fn merge(&mut self, other: Accumulator) {
        self.runs += other.runs;
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (mine, theirs) in self.counts.iter_mut().zip(other.counts.iter()) {
            *mine += theirs;
        }
        self.sum_n += other.sum_n;
        self.sum_n_sq += other.sum_n_sq;
        self.sum_ff += other.sum_ff;
        self.sum_ff_sq += other.sum_ff_sq;
    }

    fn finish(self, seed: u64, horizon: u64) -> EmpiricalResult {
        let n = self.runs as f64;
        let probabilities: Vec<f64> = self.counts.iter().map(|&c| c as f64 / n).collect();
        let standard_errors = probabilities
            .iter()
            .map(|&p| (p * (1.0 - p) / n).sqrt())
            .collect();
        let (mean, mean_se) = mean_and_se(self.sum_n, self.sum_n_sq, self.runs);
        let (ff, ff_se) = mean_and_se(self.sum_ff, self.sum_ff_sq, self.runs);
        EmpiricalResult {
            n_runs: self.runs,
            seed,
            horizon,
            probabilities,
            standard_errors,
            mean,
            mean_se,
            second_factorial_moment: ff,
            second_factorial_moment_se: ff_se,
        }
    }
}

fn mean_and_se(sum: u128, sum_sq: u128, runs: u64) -> (f64, f64) {
    let n = runs as f64;
    let mean = sum as f64 / n;
    if runs < 2 {
        return (mean, 0.0);
    }
    let raw_second = sum_sq as f64 / n;
    let sample_var = (raw_second - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (sample_var / n).sqrt())
}

/// Aggregate `n_runs` independent trajectories on a single worker.
pub fn empirical_distribution(
    model: &DBmapModel,
    law: &ServiceLaw,
    horizon: u64,
    n_runs: u64,
    seed: u64,
) -> EmpiricalResult {
    empirical_distribution_parallel(model, law, horizon, n_runs, seed, 1)
}

/// Same ensemble, partitioned over `workers` threads. Each run draws from
/// its own (seed, run index) stream and the merge is exact integer addition,
/// so every worker count yields the identical result.
pub fn empirical_distribution_parallel(
    model: &DBmapModel,
    law: &ServiceLaw,
    horizon: u64,
    n_runs: u64,
    seed: u64,
    workers: usize,
) -> EmpiricalResult {
    let workers = workers.max(1).min(n_runs.max(1) as usize);
    let chunk = n_runs.div_ceil(workers as u64);
    let mut partials: Vec<Accumulator> = Vec::with_capacity(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(n_runs);
                scope.spawn(move || {
                    let mut acc = Accumulator::default();
                    for run in lo..hi {
                        let mut rng = run_rng(seed, run);
                        let traj = simulate_trajectory(model, law, horizon, &mut rng);
                        acc.record(traj.final_count());
                    }
                    acc
                })
            })
            .collect();
        for handle in handles {
            partials.push(handle.join().expect("simulation worker panicked"));
        }
    });
    let mut total = Accumulator::default();
    for part in partials {
        total.merge(part);
    }
    total.finish(seed, horizon)
}

/// Run the three pathwise consistency checks of the effective process over a
/// fresh ensemble: terminal identity, domination by the raw count, and
/// monotonicity in `s`. All comparisons are exact integer comparisons.
pub fn effective_consistency_sweep(
    model: &DBmapModel,
    law: &ServiceLaw,
    horizon: u64,
    n_runs: u64,
    seed: u64,
) -> EffectiveCheckReport {
    let mut report = EffectiveCheckReport {
        runs: n_runs,
        ..Default::default()
    };
    for run in 0..n_runs {
        let mut rng = run_rng(seed, run);
        let traj = simulate_trajectory(model, law, horizon, &mut rng);
        let path = effective_path(&traj, horizon).expect("target equals horizon");
        if path[horizon as usize] != traj.final_count() {
            report.terminal_identity_failures += 1;
        }
        if path
            .iter()
            .zip(traj.counts.iter())
            .any(|(&eff, &raw)| eff > raw)
        {
            report.bound_failures += 1;
        }
        if path.windows(2).any(|w| w[1] < w[0]) {
            report.monotonicity_failures += 1;
        }
    }
    report
}
