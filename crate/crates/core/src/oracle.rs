//! Brute-force reference solver.
//!
//! Tracks the joint probability table over (background state, number of
//! customers that will still be in service at the target slot) and pushes it
//! forward one slot at a time with the explicit transition law: a batch of
//! `l` arrivals at gap `tau` from the target keeps exactly `delta` of them
//! with probability `C(l, delta) Phi(tau)^delta (1 - Phi(tau))^(l - delta)`.
//! Quadratic in everything and proud of it; this module exists to be slow
//! and obviously correct, as the ground truth for the polynomial engine.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::arrival::DBmapModel;
use crate::service::ServiceLaw;

/// Hard cap on `K * L * t` so the table stays desk-sized.
pub const TABLE_BOUND: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "joint table of {size} cells exceeds the bound {bound} (states x max batch x horizon)"
    )]
    TableTooLarge { size: u64, bound: u64 },
}

/// Pascal's triangle rows 0..=n as floats; exact for the batch sizes in
/// scope (doubles hold binomials up to n = 60 or so exactly).
fn binomial_rows(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for r in 0..=n {
        let mut row = vec![1.0; r + 1];
        for c in 1..r {
            row[c] = rows[r - 1][c - 1] + rows[r - 1][c];
        }
        rows.push(row);
    }
    rows
}

/// Probability that one transition moves the background chain `i -> j` while
/// exactly `delta` of the arriving batch outlast the remaining `horizon_gap`
/// slots to the target.
pub fn transition_prob(
    model: &DBmapModel,
    law: &ServiceLaw,
    i: usize,
    j: usize,
    delta: usize,
    horizon_gap: u64,
) -> f64 {
    assert!(
        horizon_gap >= 1,
        "the arrival slot precedes the target slot"
    );
    let max_batch = model.max_batch_size();
    if delta > max_batch {
        return 0.0;
    }
    let phi = law.survival(horizon_gap);
    let binom = binomial_rows(max_batch);
    let mut total = 0.0;
    for (l, row) in binom.iter().enumerate().skip(delta) {
        total += model.batch_prob(i, j, l)
            * row[delta]
            * phi.powi(delta as i32)
            * (1.0 - phi).powi((l - delta) as i32);
    }
    total
}

/// One kernel per horizon gap: `kernel[delta][(i, j)]`. Each gap value is
/// built exactly once per sweep, so a full run costs `t` kernels, not `t^2`.
fn transition_kernel(model: &DBmapModel, law: &ServiceLaw, horizon_gap: u64) -> Vec<DMatrix<f64>> {
    let k = model.num_states();
    let max_batch = model.max_batch_size();
    let phi = law.survival(horizon_gap);
    let binom = binomial_rows(max_batch);
    let mut kernel = vec![DMatrix::zeros(k, k); max_batch + 1];
    for (delta, target) in kernel.iter_mut().enumerate() {
        for (l, mat) in model.batch_matrices().iter().enumerate().skip(delta) {
            let weight =
                binom[l][delta] * phi.powi(delta as i32) * (1.0 - phi).powi((l - delta) as i32);
            *target += mat * weight;
        }
    }
    kernel
}

/// Joint probability table at slot `s` of a sweep toward `horizon`:
/// entry `(i, m)` is the probability of background state `i` with `m`
/// customers destined to survive to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    slot: u64,
    horizon: u64,
    table: DMatrix<f64>,
}

impl JointState {
    /// Start of a sweep: all mass in the zero-count column, spread over the
    /// initial state distribution.
    pub fn initial(model: &DBmapModel, horizon: u64) -> Result<Self, OracleError> {
        let k = model.num_states() as u64;
        let max_batch = model.max_batch_size() as u64;
        let size = k * max_batch * horizon;
        if size > TABLE_BOUND {
            return Err(OracleError::TableTooLarge {
                size,
                bound: TABLE_BOUND,
            });
        }
        let cols = (max_batch * horizon + 1) as usize;
        let mut table = DMatrix::zeros(model.num_states(), cols);
        for (i, &p) in model.initial_dist().iter().enumerate() {
            table[(i, 0)] = p;
        }
        Ok(Self {
            slot: 0,
            horizon,
            table,
        })
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// `P(state = i, surviving count = m)` at the current slot.
    pub fn probability(&self, i: usize, m: usize) -> f64 {
        if m < self.table.ncols() {
            self.table[(i, m)]
        } else {
            0.0
        }
    }

    pub fn grand_total(&self) -> f64 {
        self.table.sum()
    }

    /// Marginal over states: the distribution of the surviving count.
    pub fn count_marginal(&self) -> Vec<f64> {
        (0..self.table.ncols())
            .map(|m| self.table.column(m).sum())
            .collect()
    }

    /// Push the table one slot forward with the gap-dependent kernel.
    pub fn advance(&self, model: &DBmapModel, law: &ServiceLaw) -> JointState {
        assert!(
            self.slot < self.horizon,
            "cannot advance past the target slot"
        );
        let gap = self.horizon - self.slot;
        let kernel = transition_kernel(model, law, gap);
        let k = model.num_states();
        let max_batch = model.max_batch_size();
        let reach =
            (max_batch as u64 * (self.slot + 1)).min(self.table.ncols() as u64 - 1) as usize;
        let mut table = DMatrix::zeros(k, self.table.ncols());
        for n in 0..=reach {
            for (delta, kern) in kernel.iter().enumerate().take(max_batch.min(n) + 1) {
                let m = n - delta;
                for i in 0..k {
                    let mass = self.table[(i, m)];
                    if mass == 0.0 {
                        continue;
                    }
                    for j in 0..k {
                        table[(j, n)] += mass * kern[(i, j)];
                    }
                }
            }
        }
        JointState {
            slot: self.slot + 1,
            horizon: self.horizon,
            table,
        }
    }
}

/// Customer-number distribution at slot `t` by full forward propagation:
/// sweep the joint table from slot 0 to `t`, then marginalize over states.
pub fn brute_distribution(
    model: &DBmapModel,
    law: &ServiceLaw,
    t: u64,
) -> Result<Vec<f64>, OracleError> {
    let mut state = JointState::initial(model, t)?;
    for _ in 0..t {
        state = state.advance(model, law);
    }
    Ok(state.count_marginal())
}
