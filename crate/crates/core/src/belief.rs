//! Two-state feedback arms and their belief-state formulas.
//!
//! An arm is a bursty two-state Markov chain (good/bad) whose state is
//! revealed only when the arm is played. The sufficient statistic for a
//! policy is the pair (last observed state, steps since that observation);
//! the functions [`FeedbackArm::belief_v`] and [`FeedbackArm::belief_u`]
//! give the probability of the arm being good under each observation tag.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default burstiness slack: constructors reject `alpha + beta > 1 - delta`.
pub const DEFAULT_DELTA: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("probability {name} = {value} out of range")]
    Probability { name: &'static str, value: f64 },
    #[error("alpha + beta = {sum} exceeds burstiness bound 1 - delta = {bound}")]
    Burstiness { sum: f64, bound: f64 },
    #[error("reward {0} must be finite and non-negative")]
    Reward(f64),
    #[error("delta = {0} must lie in (0, 1)")]
    Delta(f64),
    #[error("belief elapsed time must be >= 1")]
    ZeroElapsed,
    #[error("instance must contain at least one arm")]
    Empty,
}

/// Last observed state of a feedback arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observed {
    Good,
    Bad,
}

/// Belief state of a feedback arm: last observed state and how many steps
/// ago the observation was made (`t >= 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BeliefState {
    pub last: Observed,
    pub t: u64,
}

impl BeliefState {
    pub fn new(last: Observed, t: u64) -> Result<Self, DomainError> {
        if t == 0 {
            return Err(DomainError::ZeroElapsed);
        }
        Ok(BeliefState { last, t })
    }

    /// Age the belief by one unobserved step.
    pub fn aged(self) -> Self {
        BeliefState {
            last: self.last,
            t: self.t.saturating_add(1),
        }
    }
}

/// One two-state feedback arm with transition probabilities `alpha`
/// (bad to good) and `beta` (good to bad) and reward `r` in the good state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackArm {
    alpha: f64,
    beta: f64,
    reward: f64,
}

impl FeedbackArm {
    /// Validates `0 < alpha`, `0 < beta`, `alpha + beta <= 1 - delta`,
    /// `r >= 0`, all finite.
    pub fn new(alpha: f64, beta: f64, reward: f64, delta: f64) -> Result<Self, DomainError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(DomainError::Delta(delta));
        }
        if !(alpha > 0.0 && alpha < 1.0) || !alpha.is_finite() {
            return Err(DomainError::Probability {
                name: "alpha",
                value: alpha,
            });
        }
        if !(beta > 0.0 && beta < 1.0) || !beta.is_finite() {
            return Err(DomainError::Probability {
                name: "beta",
                value: beta,
            });
        }
        if alpha + beta > 1.0 - delta {
            return Err(DomainError::Burstiness {
                sum: alpha + beta,
                bound: 1.0 - delta,
            });
        }
        if !reward.is_finite() || reward < 0.0 {
            return Err(DomainError::Reward(reward));
        }
        Ok(FeedbackArm {
            alpha,
            beta,
            reward,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn reward(&self) -> f64 {
        self.reward
    }

    /// Stationary probability of the good state, `alpha / (alpha + beta)`.
    pub fn stationary_good(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// `(1 - alpha - beta)^t`, the geometric factor of belief decay.
    pub fn decay_pow(&self, t: u64) -> f64 {
        pow_decay(1.0 - self.alpha - self.beta, t)
    }

    /// Probability of being good `t >= 1` steps after an observed bad state:
    /// `(alpha/(alpha+beta)) (1 - (1-alpha-beta)^t)`.
    pub fn belief_v(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        self.stationary_good() * (1.0 - self.decay_pow(t))
    }

    /// Probability of being good `t >= 1` steps after an observed good state:
    /// `alpha/(alpha+beta) + (beta/(alpha+beta)) (1-alpha-beta)^t`.
    pub fn belief_u(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        let ab = self.alpha + self.beta;
        self.alpha / ab + (self.beta / ab) * self.decay_pow(t)
    }

    /// Probability of being good given a belief state.
    pub fn belief_good(&self, belief: BeliefState) -> f64 {
        match belief.last {
            Observed::Good => self.belief_u(belief.t),
            Observed::Bad => self.belief_v(belief.t),
        }
    }

    /// Smallest `t` with `(1-alpha-beta)^t <= threshold`, capped.
    pub fn mixing_time(&self, threshold: f64, cap: u64) -> u64 {
        let nu = 1.0 - self.alpha - self.beta;
        if nu <= 0.0 {
            return 1;
        }
        let t = (threshold.ln() / nu.ln()).ceil();
        if !t.is_finite() || t >= cap as f64 {
            cap
        } else {
            (t as u64).max(1)
        }
    }
}

/// `nu^t` for `nu` in (0, 1), computed in log space for large exponents so
/// extreme powers underflow to zero instead of producing subnormal noise.
/// Values below 1e-300 clamp to 0.
pub fn pow_decay(nu: f64, t: u64) -> f64 {
    debug_assert!((0.0..1.0).contains(&nu) || nu == 1.0);
    if nu == 0.0 {
        return 0.0;
    }
    if t <= 64 {
        return nu.powi(t as i32);
    }
    let log = (t as f64) * nu.ln();
    if log < -690.77 {
        // ln(1e-300)
        0.0
    } else {
        log.exp()
    }
}

/// A feedback bandit instance: a set of arms sharing a burstiness slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackInstance {
    arms: Vec<FeedbackArm>,
    delta: f64,
}

impl FeedbackInstance {
    pub fn new(arms: Vec<FeedbackArm>, delta: f64) -> Result<Self, DomainError> {
        if arms.is_empty() {
            return Err(DomainError::Empty);
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(DomainError::Delta(delta));
        }
        for arm in &arms {
            if arm.alpha + arm.beta > 1.0 - delta {
                return Err(DomainError::Burstiness {
                    sum: arm.alpha + arm.beta,
                    bound: 1.0 - delta,
                });
            }
        }
        Ok(FeedbackInstance { arms, delta })
    }

    pub fn arms(&self) -> &[FeedbackArm] {
        &self.arms
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(alpha: f64, beta: f64, r: f64) -> FeedbackArm {
        FeedbackArm::new(alpha, beta, r, DEFAULT_DELTA).unwrap()
    }

    #[test]
    fn belief_v_at_one_is_alpha() {
        let a = arm(0.2, 0.3, 1.0);
        assert!((a.belief_v(1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn belief_v_limit_is_stationary() {
        let a = arm(0.2, 0.3, 1.0);
        assert!((a.belief_v(1000) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn belief_u_at_one_is_one_minus_beta() {
        let a = arm(0.2, 0.3, 1.0);
        assert!((a.belief_u(1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn u_minus_v_is_decay_power() {
        for (alpha, beta) in [(0.2, 0.3), (0.05, 0.1), (0.45, 0.45)] {
            let a = arm(alpha, beta, 1.0);
            for t in [1u64, 2, 3, 7, 40, 200] {
                let lhs = a.belief_u(t) - a.belief_v(t);
                let rhs = a.decay_pow(t);
                assert!((lhs - rhs).abs() < 1e-12, "t={t} lhs={lhs} rhs={rhs}");
            }
        }
    }

    #[test]
    fn belief_v_strictly_increasing_and_concave() {
        let a = arm(0.15, 0.25, 1.0);
        let mut prev = 0.0;
        let vals: Vec<f64> = (1..=60).map(|t| a.belief_v(t)).collect();
        for &v in &vals {
            assert!(v > prev);
            prev = v;
        }
        for w in vals.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-12);
        }
    }

    #[test]
    fn one_minus_u_strictly_increasing_and_concave() {
        let a = arm(0.15, 0.25, 1.0);
        let vals: Vec<f64> = (1..=60).map(|t| 1.0 - a.belief_u(t)).collect();
        for w in vals.windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in vals.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-12);
        }
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        assert!(FeedbackArm::new(0.6, 0.5, 1.0, DEFAULT_DELTA).is_err());
        assert!(FeedbackArm::new(0.0, 0.5, 1.0, DEFAULT_DELTA).is_err());
        assert!(FeedbackArm::new(0.2, 0.3, -1.0, DEFAULT_DELTA).is_err());
        assert!(FeedbackArm::new(0.2, 0.3, f64::NAN, DEFAULT_DELTA).is_err());
        assert!(BeliefState::new(Observed::Bad, 0).is_err());
    }

    #[test]
    fn pow_decay_underflow_clamps_to_zero() {
        assert_eq!(pow_decay(0.5, 5_000), 0.0);
        assert!(pow_decay(0.999_999, 100) > 0.0);
        // large-exponent path agrees with direct powi at the crossover
        let direct = 0.9f64.powi(64);
        assert!((pow_decay(0.9, 64) - direct).abs() < 1e-18);
        let a = (65.0f64 * 0.9f64.ln()).exp();
        assert!((pow_decay(0.9, 65) - a).abs() < 1e-16);
    }

    #[test]
    fn mixing_time_matches_threshold() {
        let a = arm(0.05, 0.05, 1.0);
        let t = a.mixing_time(1e-9, 100_000);
        assert!(a.decay_pow(t) <= 1e-9);
        assert!(a.decay_pow(t - 1) > 1e-9);
    }
}
