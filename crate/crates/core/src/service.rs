//! Service-time laws on the positive integers.
//!
//! Each law exposes its exact survival function `Phi(t) = P(Y > t)` (the
//! quantity the transient engine consumes) and a sampler for the simulator.
//! All supported laws start at 1: a customer always occupies a server for at
//! least the slot it arrives in, so `Phi(0) = 1`.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid service parameter: {0}")]
    InvalidParameter(String),
}

/// A service-time distribution on `{1, 2, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceLaw {
    /// `P(Y = k) = (1 - alpha) alpha^(k-1)`; the memoryless discrete law,
    /// with survival `alpha^t`.
    Geometric { alpha: f64 },
    /// `Y = 1 + Z` with `Z` Poisson(`lambda`).
    ShiftedPoisson { lambda: f64 },
    /// Every service takes exactly `slots` slots.
    Deterministic { slots: u64 },
    /// `probs[i] = P(Y = i + 1)` on the finite support `{1, ..., M}`.
    ExplicitPmf { probs: Vec<f64> },
}

impl ServiceLaw {
    pub fn geometric(alpha: f64) -> Result<Self, ServiceError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ServiceError::InvalidParameter(format!(
                "geometric alpha {alpha} must lie in (0, 1)"
            )));
        }
        Ok(Self::Geometric { alpha })
    }

    pub fn shifted_poisson(lambda: f64) -> Result<Self, ServiceError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ServiceError::InvalidParameter(format!(
                "shifted-Poisson lambda {lambda} must be positive and finite"
            )));
        }
        Ok(Self::ShiftedPoisson { lambda })
    }

    pub fn deterministic(slots: u64) -> Result<Self, ServiceError> {
        if slots < 1 {
            return Err(ServiceError::InvalidParameter(
                "deterministic service needs at least one slot".into(),
            ));
        }
        Ok(Self::Deterministic { slots })
    }

    pub fn explicit_pmf(probs: Vec<f64>) -> Result<Self, ServiceError> {
        if probs.is_empty() {
            return Err(ServiceError::InvalidParameter(
                "explicit pmf must have at least one entry".into(),
            ));
        }
        if let Some(&bad) = probs
            .iter()
            .find(|&&q| !(0.0..=1.0).contains(&q) || !q.is_finite())
        {
            return Err(ServiceError::InvalidParameter(format!(
                "pmf entry {bad} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ServiceError::InvalidParameter(format!(
                "pmf sums to {sum}, defect {:.3e} exceeds 1e-12",
                (sum - 1.0).abs()
            )));
        }
        Ok(Self::ExplicitPmf { probs })
    }

    /// Exact survival function `P(Y > t)`.
    pub fn survival(&self, t: u64) -> f64 {
        if t == 0 {
            return 1.0;
        }
        match self {
            Self::Geometric { alpha } => {
                if t > i32::MAX as u64 {
                    0.0
                } else {
                    alpha.powi(t as i32)
                }
            }
            Self::ShiftedPoisson { lambda } => shifted_poisson_survival(*lambda, t),
            Self::Deterministic { slots } => {
                if t < *slots {
                    1.0
                } else {
                    0.0
                }
            }
            Self::ExplicitPmf { probs } => {
                if t as usize >= probs.len() {
                    0.0
                } else {
                    probs[t as usize..].iter().sum()
                }
            }
        }
    }

    /// Draw one service time. Geometric uses the closed-form log transform;
    /// the discrete laws use sequential inverse-CDF search.
    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        match self {
            Self::Geometric { alpha } => {
                // u in (0, 1] so P(sample > t) = P(u <= alpha^t) = alpha^t
                let u = 1.0 - rng.random::<f64>();
                1 + (u.ln() / alpha.ln()).floor() as u64
            }
            Self::ShiftedPoisson { lambda } => {
                let u = rng.random::<f64>();
                let mut term = (-lambda).exp();
                let mut cum = term;
                let mut k = 0u64;
                while u >= cum && k < 1_000_000 {
                    k += 1;
                    term *= lambda / k as f64;
                    cum += term;
                }
                1 + k
            }
            Self::Deterministic { slots } => *slots,
            Self::ExplicitPmf { probs } => {
                let u = rng.random::<f64>();
                let mut cum = 0.0;
                for (i, &q) in probs.iter().enumerate() {
                    cum += q;
                    if u < cum {
                        return (i + 1) as u64;
                    }
                }
                probs.len() as u64
            }
        }
    }

    /// The pmf truncated so the discarded tail mass is below `tail_bound`,
    /// for feeding the shifted-Poisson law to engines that need finite
    /// support.
    pub fn to_explicit_pmf(&self, tail_bound: f64) -> Result<Self, ServiceError> {
        match self {
            Self::ShiftedPoisson { lambda } => {
                // aim below half the bound so re-summation rounding inside
                // explicit_pmf cannot push the defect back over it
                let mut probs = Vec::new();
                let mut term = (-lambda).exp();
                let mut cum = term;
                probs.push(term);
                let mut k = 0u64;
                while 1.0 - cum >= 0.5 * tail_bound && k < 1_000_000 {
                    k += 1;
                    term *= lambda / k as f64;
                    cum += term;
                    probs.push(term);
                }
                Self::explicit_pmf(probs)
            }
            Self::ExplicitPmf { .. } | Self::Deterministic { .. } => Ok(self.clone()),
            Self::Geometric { alpha } => {
                let mut probs = Vec::new();
                let mut mass = 1.0 - alpha;
                let mut cum = 0.0;
                while 1.0 - cum >= 0.5 * tail_bound {
                    probs.push(mass);
                    cum += mass;
                    mass *= alpha;
                }
                Self::explicit_pmf(probs)
            }
        }
    }
}

/// `P(Y > t)` for `Y = 1 + Poisson(lambda)`, `t >= 1`. Small `t` uses the
/// complement of the finite cdf sum; far past the mode that difference
/// cancels catastrophically, so the tail is summed directly until terms fall
/// below 1e-17 relative.
fn shifted_poisson_survival(lambda: f64, t: u64) -> f64 {
    if t as f64 <= 40.0 * lambda {
        let mut term = (-lambda).exp();
        let mut cdf = term;
        for i in 1..t {
            term *= lambda / i as f64;
            cdf += term;
        }
        // the cdf sum can round a hair above 1
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut term = (-lambda).exp();
        for i in 1..=t {
            term *= lambda / i as f64;
            if term == 0.0 {
                return 0.0;
            }
        }
        let mut sum = term;
        let mut i = t;
        loop {
            i += 1;
            term *= lambda / i as f64;
            sum += term;
            if term < 1e-17 * sum || term == 0.0 {
                return sum;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn survival_at_zero_is_one() {
        let laws = [
            ServiceLaw::geometric(0.3).unwrap(),
            ServiceLaw::shifted_poisson(2.0).unwrap(),
            ServiceLaw::deterministic(4).unwrap(),
            ServiceLaw::explicit_pmf(vec![0.2, 0.5, 0.3]).unwrap(),
        ];
        for law in &laws {
            assert_eq!(law.survival(0), 1.0);
        }
    }

    #[test]
    fn geometric_survival_is_alpha_power() {
        let law = ServiceLaw::geometric(0.5).unwrap();
        for t in 0..20 {
            assert_relative_eq!(law.survival(t), 0.5f64.powi(t as i32), epsilon = 1e-15);
        }
    }

    #[test]
    fn shifted_poisson_survival_reference_values() {
        let law = ServiceLaw::shifted_poisson(2.0).unwrap();
        assert_relative_eq!(law.survival(1), 0.8646647167633873, epsilon = 1e-14);
        assert_relative_eq!(law.survival(3), 0.32332358381693654, epsilon = 1e-14);
    }

    #[test]
    fn shifted_poisson_deep_tail_stays_accurate() {
        // cross the branch switch: both branches agree where they overlap
        let law = ServiceLaw::shifted_poisson(0.5).unwrap();
        let direct: f64 = {
            // tail summed with 200 terms of the series at t = 25
            let lambda = 0.5f64;
            let mut term = (-lambda).exp();
            for i in 1..=25u64 {
                term *= lambda / i as f64;
            }
            let mut sum = term;
            let mut i = 25u64;
            for _ in 0..200 {
                i += 1;
                term *= lambda / i as f64;
                sum += term;
            }
            sum
        };
        assert_relative_eq!(law.survival(25), direct, max_relative = 1e-12);
        assert!(law.survival(25) > 0.0);
    }

    #[test]
    fn deterministic_survival_is_step() {
        let law = ServiceLaw::deterministic(3).unwrap();
        assert_eq!(law.survival(2), 1.0);
        assert_eq!(law.survival(3), 0.0);
        assert_eq!(law.survival(10), 0.0);
    }

    #[test]
    fn pmf_survival_and_support_bound() {
        let law = ServiceLaw::explicit_pmf(vec![0.2, 0.5, 0.3]).unwrap();
        assert_relative_eq!(law.survival(1), 0.8, epsilon = 1e-15);
        assert_relative_eq!(law.survival(2), 0.3, epsilon = 1e-15);
        for t in 3..8 {
            assert_eq!(law.survival(t), 0.0);
        }
    }

    #[test]
    fn survival_decrement_is_a_pmf() {
        let laws = [
            ServiceLaw::geometric(0.7).unwrap(),
            ServiceLaw::shifted_poisson(2.0).unwrap(),
            ServiceLaw::deterministic(4).unwrap(),
            ServiceLaw::explicit_pmf(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
        ];
        for law in &laws {
            let mut total = 0.0;
            for t in 0..200 {
                let step = law.survival(t) - law.survival(t + 1);
                assert!(step >= -1e-12, "negative pmf mass at t={t} for {law:?}");
                total += step;
            }
            assert_relative_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn constructor_rejections() {
        assert!(ServiceLaw::geometric(0.0).is_err());
        assert!(ServiceLaw::geometric(1.0).is_err());
        assert!(ServiceLaw::shifted_poisson(0.0).is_err());
        assert!(ServiceLaw::deterministic(0).is_err());
        assert!(ServiceLaw::explicit_pmf(vec![]).is_err());
        assert!(ServiceLaw::explicit_pmf(vec![0.5, 0.4]).is_err());
        assert!(ServiceLaw::explicit_pmf(vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn deterministic_sampler_is_constant() {
        let law = ServiceLaw::deterministic(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(law.sample(&mut rng), 4);
        }
    }

    #[test]
    fn geometric_sampler_matches_survival() {
        let alpha = 0.6;
        let law = ServiceLaw::geometric(alpha).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let draws: Vec<u64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&y| y >= 1));
        for t in [1u64, 2, 5] {
            let p = alpha.powi(t as i32);
            let frac = draws.iter().filter(|&&y| y > t).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (frac - p).abs() <= 4.0 * se,
                "tail at t={t}: {frac} vs {p} (4se = {})",
                4.0 * se
            );
        }
    }

    #[test]
    fn shifted_poisson_sampler_mean() {
        let law = ServiceLaw::shifted_poisson(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n).map(|_| law.sample(&mut rng)).sum::<u64>() as f64 / n as f64;
        // Var(Y) = lambda, so 4 standard errors of the mean:
        let tol = 4.0 * (2.0f64 / n as f64).sqrt();
        assert!((mean - 3.0).abs() < tol, "mean {mean} vs 3 (tol {tol})");
    }

    #[test]
    fn sampler_cdf_close_to_exact() {
        // sup |F_hat - F| on 1e5 draws, generous 1e-2 bound
        let laws = [
            ServiceLaw::shifted_poisson(2.0).unwrap(),
            ServiceLaw::geometric(0.6).unwrap(),
            ServiceLaw::explicit_pmf(vec![0.3, 0.3, 0.2, 0.2]).unwrap(),
        ];
        let n = 100_000;
        for (i, law) in laws.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
            let mut counts = vec![0u64; 64];
            for _ in 0..n {
                let y = law.sample(&mut rng).min(63) as usize;
                counts[y] += 1;
            }
            let mut cum = 0.0;
            let mut worst: f64 = 0.0;
            for t in 1..60u64 {
                cum += counts[t as usize] as f64 / n as f64;
                let exact_cdf = 1.0 - law.survival(t);
                worst = worst.max((cum - exact_cdf).abs());
            }
            assert!(worst < 1e-2, "KS-style gap {worst} for {law:?}");
        }
    }

    #[test]
    fn truncated_pmf_agrees_with_analytic_survival() {
        let law = ServiceLaw::shifted_poisson(2.0).unwrap();
        let pmf = law.to_explicit_pmf(1e-12).unwrap();
        for t in 0..15 {
            assert_relative_eq!(pmf.survival(t), law.survival(t), epsilon = 1e-11);
        }
    }
}
