//! The exact transient engine.
//!
//! For a horizon of `t` slot transitions, the vector of state-dependent
//! generating functions of the customer count factors into
//!
//! ```text
//! g(z, t) = p0 * T(z, 0; t) * T(z, 1; t) * ... * T(z, t-1; t)
//! ```
//!
//! where slot `k` contributes `T(z, k; t) = D(Phi(t-k) z + 1 - Phi(t-k))`:
//! the batch generating function with `z` replaced by the probability that a
//! slot-`k` customer is still in service at the target slot. The product is
//! evaluated strictly left to right as a row vector of polynomials, which
//! keeps `K` series alive instead of `K x K`. Batches attach to the origin
//! slot of their transition, so the newest cohort (`k = t - 1`) survives
//! with probability `Phi(1)`; this convention is shared verbatim with the
//! brute-force and simulation engines.

use nalgebra::{DMatrix, RowDVector};
use thiserror::Error;

use crate::arrival::DBmapModel;
use crate::poly::{falling_factorial, PgfVector, Poly};
use crate::service::ServiceLaw;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("slot index {k} out of range for horizon {t}")]
    SlotIndexOutOfRange { k: u64, t: u64 },
    #[error("factorial-moment order {m} exceeds the supported maximum {max}")]
    MomentOrderTooLarge { m: usize, max: usize },
    #[error(
        "no stationary convergence within {t_max} slots \
         (last total-variation distance {last_tv:.3e})"
    )]
    NotConverged { t_max: u64, last_tv: f64 },
}

/// Square matrix of polynomials, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    dim: usize,
    entries: Vec<Poly>,
}

impl PolyMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.dim + j]
    }
}

/// Distribution, moments, and diagnostics for one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientResult {
    pub time: u64,
    /// `distribution[m]` is the probability of `m` customers at the horizon.
    pub distribution: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Variance-to-mean ratio; `None` when the mean is zero.
    pub fano: Option<f64>,
    /// Factorial moments `mu_1 ..`, extracted from the generating function.
    pub factorial_moments: Vec<f64>,
    /// Signed defect `sum_m p_m + truncation_loss - 1`.
    pub normalization_defect: f64,
    /// Mass discarded by degree caps during the product.
    pub truncation_loss: f64,
}

/// Result of iterating the transient distribution to its large-time limit.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub distribution: Vec<f64>,
    pub t_converged: u64,
    pub last_tv: f64,
}

/// First two moments of the memoryless single-state special case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MminfMoments {
    pub mean: f64,
    pub variance: f64,
    pub fano: Option<f64>,
}

fn slot_matrix_for_gap(model: &DBmapModel, law: &ServiceLaw, gap: u64) -> PolyMatrix {
    let phi = law.survival(gap);
    let dim = model.num_states();
    let max_batch = model.max_batch_size();
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let batch_pgf =
                Poly::from_coeffs((0..=max_batch).map(|l| model.batch_prob(i, j, l)).collect());
            let composed = batch_pgf
                .affine_compose(phi, 1.0 - phi)
                .expect("survival probability lies in [0, 1]");
            entries.push(composed);
        }
    }
    PolyMatrix { dim, entries }
}

/// The slot-`k` factor `T(z, k; t)`: entry `(i, j)` is the batch generating
/// function `D_ij` composed with `z -> Phi(t-k) z + 1 - Phi(t-k)`.
pub fn build_slot_matrix(
    model: &DBmapModel,
    law: &ServiceLaw,
    k: u64,
    t: u64,
) -> Result<PolyMatrix, ExactError> {
    if k >= t {
        return Err(ExactError::SlotIndexOutOfRange { k, t });
    }
    Ok(slot_matrix_for_gap(model, law, t - k))
}

/// State-dependent generating functions of the customer count at slot `t`,
/// computed as the left-to-right row-vector product. `max_degree` caps the
/// series degree; `None` keeps the product exact (degree at most `L * t`).
pub fn transient_pgf(
    model: &DBmapModel,
    law: &ServiceLaw,
    t: u64,
    max_degree: Option<usize>,
) -> PgfVector {
    let dim = model.num_states();
    let mut g: Vec<Poly> = model
        .initial_dist()
        .iter()
        .map(|&p| Poly::constant(p))
        .collect();
    for k in 0..t {
        let slot = slot_matrix_for_gap(model, law, t - k);
        let mut next = vec![Poly::zero(); dim];
        for (j, target) in next.iter_mut().enumerate() {
            for (i, g_i) in g.iter().enumerate() {
                *target = target.add(&g_i.mul(slot.get(i, j), max_degree));
            }
        }
        g = next;
    }
    PgfVector::from_entries(g)
}

/// Customer-number probabilities: the coefficients of the summed generating
/// function. `up_to` pads or cuts to a fixed length.
pub fn distribution(g: &PgfVector, up_to: Option<usize>) -> Vec<f64> {
    let total = g.sum();
    match up_to {
        None => total.coeffs().to_vec(),
        Some(m) => (0..=m).map(|i| total.coefficient(i)).collect(),
    }
}

/// Factorial moments `mu_1 .. mu_k_max` as derivatives of the summed
/// generating function at `z = 1`.
pub fn factorial_moments_from_pgf(g: &PgfVector, k_max: usize) -> Vec<f64> {
    let total = g.sum();
    (1..=k_max).map(|k| total.derivative(k).eval(1.0)).collect()
}

/// Mean and variance from the closed-form moment sums
///
/// ```text
/// g'(1)  = p0 sum_i Phi(t-i) P^i D'(1) P^(t-1-i)
/// g''(1) = p0 [ 2 sum_{i<j} Phi(t-i) Phi(t-j) P^i D'(1) P^(j-i-1) D'(1) P^(t-1-j)
///               + sum_i Phi(t-i)^2 P^i D''(1) P^(t-1-i) ]
/// ```
///
/// contracted with the all-ones vector; trailing powers of `P` collapse
/// under that contraction because `P` is stochastic. The variance is
/// `g''(1) + g'(1) - g'(1)^2`.
pub fn mean_variance_closed(model: &DBmapModel, law: &ServiceLaw, t: u64) -> (f64, f64) {
    if t == 0 {
        return (0.0, 0.0);
    }
    let p = model.transition_matrix();
    let d1 = model.derivative_matrix_at_one(1);
    let d2 = model.derivative_matrix_at_one(2);
    let phis: Vec<f64> = (0..t).map(|i| law.survival(t - i)).collect();

    // u[i] = p0 P^i
    let mut u: Vec<RowDVector<f64>> = Vec::with_capacity(t as usize);
    u.push(model.initial_dist().clone());
    for i in 1..t as usize {
        let next = &u[i - 1] * p;
        u.push(next);
    }

    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..t as usize {
        let leading = &u[i] * &d1;
        first += phis[i] * leading.sum();
        second += phis[i] * phis[i] * (&u[i] * &d2).sum();
        // inner sum over j > i, advancing the row vector one power of P per
        // step instead of storing matrix powers
        let mut w = leading;
        for j in (i + 1)..t as usize {
            second += 2.0 * phis[i] * phis[j] * (&w * &d1).sum();
            w = &w * p;
        }
    }
    let variance = second + first - first * first;
    (first, variance)
}

/// The order-`m` factorial moment via the composition sum
///
/// ```text
/// g^(m)(1, t) = p0 sum_{l_0+...+l_{t-1} = m} m!/(l_0! ... l_{t-1}!)
///               prod_i Phi(t-i)^{l_i} D^{(l_i)}(1)
/// ```
///
/// with matrix factors kept in slot order. The sum is evaluated by a prefix
/// recurrence over slots, grouping compositions by their partial order; the
/// terms and their weights are exactly those of the expanded sum. Never
/// touches the polynomial engine, so it serves as an independent route.
/// Returns the moment and the full derivative vector `g^(m)(1, t)`.
pub fn factorial_moment_leibniz(
    model: &DBmapModel,
    law: &ServiceLaw,
    t: u64,
    m: usize,
) -> Result<(f64, RowDVector<f64>), ExactError> {
    const MAX_ORDER: usize = 4;
    if m > MAX_ORDER {
        return Err(ExactError::MomentOrderTooLarge { m, max: MAX_ORDER });
    }
    let dim = model.num_states();
    let dmats: Vec<DMatrix<f64>> = (0..=m).map(|l| model.derivative_matrix_at_one(l)).collect();
    let inv_factorials: Vec<f64> = (0..=m).map(|l| 1.0 / falling_factorial(l, l)).collect();

    // v[r] accumulates all compositions of total order r over the slots seen
    // so far, each term divided by the product of its part factorials
    let mut v: Vec<RowDVector<f64>> = vec![RowDVector::zeros(dim); m + 1];
    v[0] = model.initial_dist().clone();
    for i in 0..t {
        let phi = law.survival(t - i);
        let mut next: Vec<RowDVector<f64>> = vec![RowDVector::zeros(dim); m + 1];
        for (r, target) in next.iter_mut().enumerate() {
            for l in 0..=r {
                let weight = phi.powi(l as i32) * inv_factorials[l];
                if weight != 0.0 {
                    *target += &v[r - l] * &dmats[l] * weight;
                }
            }
        }
        v = next;
    }
    let vector = v[m].clone() * falling_factorial(m, m);
    let moment = vector.sum();
    Ok((moment, vector))
}

/// Total-variation distance `0.5 * sum |p_m - q_m|` (missing entries are 0).
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|m| {
            let a = p.get(m).copied().unwrap_or(0.0);
            let b = q.get(m).copied().unwrap_or(0.0);
            (a - b).abs()
        })
        .sum::<f64>()
}

/// Iterate the transient distribution over increasing horizons until the
/// total-variation distance between consecutive distributions drops below
/// `tol`. Because the slot factor depends only on the gap to the horizon,
/// extending the horizon prepends one factor; the product is therefore
/// maintained incrementally as a column of polynomials already contracted
/// with the all-ones vector.
pub fn stationary_distribution(
    model: &DBmapModel,
    law: &ServiceLaw,
    tol: f64,
    t_max: u64,
) -> Result<StationaryResult, ExactError> {
    let dim = model.num_states();
    let mut column = vec![Poly::constant(1.0); dim];
    let mut prev = vec![1.0];
    let mut last_tv = f64::INFINITY;
    for t in 1..=t_max {
        let slot = slot_matrix_for_gap(model, law, t);
        let mut next = vec![Poly::zero(); dim];
        for (i, target) in next.iter_mut().enumerate() {
            for (j, col_j) in column.iter().enumerate() {
                *target = target.add(&slot.get(i, j).mul(col_j, None));
            }
        }
        column = next;
        let total = column
            .iter()
            .zip(model.initial_dist().iter())
            .fold(Poly::zero(), |acc, (poly, &w)| acc.add(&poly.scale(w)));
        let dist = total.coeffs().to_vec();
        last_tv = tv_distance(&dist, &prev);
        if last_tv < tol {
            return Ok(StationaryResult {
                distribution: dist,
                t_converged: t,
                last_tv,
            });
        }
        prev = dist;
    }
    Err(ExactError::NotConverged { t_max, last_tv })
}

/// Closed-form generating function of the single-state memoryless queue:
/// the product of `t` independent Bernoulli factors `1 + p a^i (z - 1)`,
/// `i = 1 .. t`.
pub fn mminf_closed_form(p: f64, alpha: f64, t: u64) -> Poly {
    let mut g = Poly::constant(1.0);
    let mut alpha_pow = 1.0;
    for _ in 1..=t {
        alpha_pow *= alpha;
        let w = p * alpha_pow;
        g = g.mul(&Poly::from_coeffs(vec![1.0 - w, w]), None);
    }
    g
}

/// Closed-form mean, variance, and Fano factor of the same law:
/// `m(t) = p a (1 - a^t) / (1 - a)` and
/// `var(t) = m(t) - p^2 a^2 (1 - a^(2t)) / (1 - a^2)`.
pub fn mminf_moments(p: f64, alpha: f64, t: u64) -> MminfMoments {
    let at = alpha.powi(t.min(i32::MAX as u64) as i32);
    let mean = p * alpha * (1.0 - at) / (1.0 - alpha);
    let variance = mean - p * p * alpha * alpha * (1.0 - at * at) / (1.0 - alpha * alpha);
    let fano = if mean > 0.0 {
        Some(variance / mean)
    } else {
        None
    };
    MminfMoments {
        mean,
        variance,
        fano,
    }
}

/// The textbook one-slot recursion for the memoryless single-state queue,
/// iterated from a unit constant:
/// `G(z, tau) = G(1 - a + a z, tau - 1) * (1 - p + p z)`.
///
/// Deliberately kept verbatim: its fresh-arrival factor carries no survival
/// weight, so the result is `prod_{i=0}^{t-1} [1 + p a^i (z - 1)]`, offset
/// by one factor from [`mminf_closed_form`]. The regression suite pins this
/// offset down.
pub fn mminf_recursion(p: f64, alpha: f64, t: u64) -> Poly {
    let fresh = Poly::from_coeffs(vec![1.0 - p, p]);
    let mut g = Poly::constant(1.0);
    for _ in 0..t {
        g = g
            .affine_compose(alpha, 1.0 - alpha)
            .expect("alpha in (0, 1)")
            .mul(&fresh, None);
    }
    g
}

/// Bundle distribution, moments, and diagnostics for one horizon. Mean and
/// variance come from the closed-form sums while the factorial moments come
/// from the polynomial product, so every result embeds a cross-check of the
/// two routes.
pub fn transient_result(
    model: &DBmapModel,
    law: &ServiceLaw,
    t: u64,
    max_degree: Option<usize>,
    n_moments: usize,
) -> TransientResult {
    let g = transient_pgf(model, law, t, max_degree);
    let dist = distribution(&g, None);
    let truncation_loss = g.total_truncation_loss();
    let factorial_moments = factorial_moments_from_pgf(&g, n_moments);
    let (mean, variance) = mean_variance_closed(model, law, t);
    let fano = if mean > 0.0 {
        Some(variance / mean)
    } else {
        None
    };
    let normalization_defect = dist.iter().sum::<f64>() + truncation_loss - 1.0;
    TransientResult {
        time: t,
        distribution: dist,
        mean,
        variance,
        fano,
        factorial_moments,
        normalization_defect,
        truncation_loss,
    }
}
