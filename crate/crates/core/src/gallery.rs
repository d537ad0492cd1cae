//! Generators for the named gap instances: the myopic gap, the three-arm
//! non-index-optimality example, the LP integrality-gap family, the
//! non-separable gap family (emitted for documentation only), and the
//! replenishment Whittle-gap family.

use crate::belief::{BeliefState, FeedbackArm, FeedbackInstance, Observed, DEFAULT_DELTA};
use crate::feedback::{play_rate, FeedbackPolicy};
use crate::instance::{Machine, ReplenishInstance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalleryError {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
}

/// Identifier of a named instance family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GalleryId {
    /// One safe unit-reward arm plus `n` bursty high-reward arms that the
    /// myopic policy never explores.
    MyopicGap { n: u32 },
    /// The three-arm example separating the optimal policy from every
    /// index policy.
    IndexGap,
    /// `n` sluggish i.i.d. arms whose LP relaxation overshoots the
    /// complete-information bound by a factor approaching e/(e-1).
    LpGap { n: u32, beta: f64 },
    /// Three-state arms with monotone but non-separable transitions, where
    /// the per-arm LP relaxation has an `Omega(n)` gap. Emitted for
    /// documentation; no solver in this crate accepts it.
    NonseparableGap { n: u32 },
    /// Two machines where the Whittle repair index is `Omega(n)` worse than
    /// the duality policy.
    ReplenishGap { n: u32 },
}

/// A generated instance.
#[derive(Debug, Clone, PartialEq)]
pub enum GalleryInstance {
    Feedback(FeedbackInstance),
    Replenish(ReplenishInstance),
    Nonseparable(NonseparableSpec),
}

/// Near-deterministic encoding of an always-good unit-reward arm: the type
/// system demands burstiness, so the arm flips away from good only with
/// probability 1e-9 and recovers almost surely.
pub fn deterministic_arm(reward: f64) -> FeedbackArm {
    let beta = 1e-9;
    let alpha = 1.0 - DEFAULT_DELTA - beta;
    FeedbackArm::new(alpha, beta, reward, DEFAULT_DELTA).unwrap()
}

pub fn generate(id: &GalleryId) -> Result<GalleryInstance, GalleryError> {
    match *id {
        GalleryId::MyopicGap { n } => {
            if !(2..=40).contains(&n) {
                return Err(GalleryError::ParameterOutOfRange(format!(
                    "myopic-gap needs 2 <= n <= 40 so beta = 2^-n stays representable, got {n}"
                )));
            }
            let beta = 2f64.powi(-(n as i32));
            // Stationary good-probability sits a hair below 1/n so the
            // bursty arms' myopic value stays strictly under the encoded
            // safe arm's at every belief age (the safe arm is itself only
            // deterministic up to 1e-9).
            let target = (1.0 - 1e-6) / n as f64;
            let alpha = beta * target / (1.0 - target);
            let mut arms = vec![deterministic_arm(1.0)];
            let bursty = FeedbackArm::new(alpha, beta, n as f64, DEFAULT_DELTA).unwrap();
            arms.extend(std::iter::repeat(bursty).take(n as usize));
            Ok(GalleryInstance::Feedback(
                FeedbackInstance::new(arms, DEFAULT_DELTA).unwrap(),
            ))
        }
        GalleryId::IndexGap => {
            let stochastic = FeedbackArm::new(0.1, 0.1, 2.0, DEFAULT_DELTA).unwrap();
            let arms = vec![deterministic_arm(1.0), stochastic, stochastic];
            Ok(GalleryInstance::Feedback(
                FeedbackInstance::new(arms, DEFAULT_DELTA).unwrap(),
            ))
        }
        GalleryId::LpGap { n, beta } => {
            if n < 2 || !(beta > 0.0) || (n as f64) * beta > 0.1 {
                return Err(GalleryError::ParameterOutOfRange(format!(
                    "lp-gap needs n >= 2 and n * beta <= 0.1, got n={n}, beta={beta}"
                )));
            }
            let alpha = beta / (n as f64 - 1.0);
            let arm = FeedbackArm::new(alpha, beta, 1.0, DEFAULT_DELTA).unwrap();
            Ok(GalleryInstance::Feedback(
                FeedbackInstance::new(vec![arm; n as usize], DEFAULT_DELTA).unwrap(),
            ))
        }
        GalleryId::NonseparableGap { n } => {
            if n < 2 {
                return Err(GalleryError::ParameterOutOfRange(
                    "nonseparable-gap needs n >= 2".into(),
                ));
            }
            Ok(GalleryInstance::Nonseparable(NonseparableSpec::new(n)))
        }
        GalleryId::ReplenishGap { n } => {
            if !(2..=30).contains(&n) {
                return Err(GalleryError::ParameterOutOfRange(format!(
                    "replenish-gap needs 2 <= n <= 30, got {n}"
                )));
            }
            let nf = n as f64;
            let slow = Machine {
                rewards: vec![1.0, 0.0],
                repair_costs: vec![0.0, 0.0],
                transitions: vec![vec![1.0 - 1.0 / nf, 1.0 / nf], vec![0.0, 1.0]],
                repair_rate: nf.powi(-4),
                initial_state: 0,
            };
            let fast = Machine {
                rewards: vec![1.0, 0.0],
                repair_costs: vec![0.0, 0.0],
                transitions: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
                repair_rate: 1.0,
                initial_state: 0,
            };
            Ok(GalleryInstance::Replenish(
                ReplenishInstance::new(vec![slow, fast], 1).unwrap(),
            ))
        }
    }
}

/// Complete-information upper bound for the LP-gap family: always play a
/// good arm when one exists, so the per-step reward is the probability that
/// some arm is good in the stationary product, `1 - (1 - 1/n)^n`.
pub fn lp_gap_complete_info_bound(n: u32) -> f64 {
    1.0 - (1.0 - 1.0 / n as f64).powi(n as i32)
}

/// Truncation for solving the LP-gap family's LP: four times the smallest
/// wait whose play rate drops below the per-arm budget `1/n`, so the
/// rate-feasible single-arm policies the LP mixes are all representable.
pub fn lp_gap_suggested_truncation(instance: &FeedbackInstance) -> u64 {
    let n = instance.len() as f64;
    let arm = &instance.arms()[0];
    let mut t = 1u64;
    while play_rate(arm, t) > 1.0 / n && t < (1u64 << 40) {
        t *= 2;
    }
    let (mut lo, mut hi) = (t / 2, t);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if play_rate(arm, mid) > 1.0 / n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (4 * hi).min(100_000)
}

/// Documentation-only instance with monotone but non-separable transitions.
/// Each of the `n` identical arms has a good state, a bad state, and an
/// absorbing dead state; the bad state revives only in a narrow window, so
/// any policy running two arms eventually kills one, while the per-arm LP
/// relaxation claims constant reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonseparableSpec {
    pub n: u32,
    pub states: Vec<String>,
    pub rewards: Vec<f64>,
    /// Step-function transition probabilities `q[from][to]` as `(t, value)`
    /// knots: the probability of moving from `from` to `to` when played
    /// after `t` waiting steps is the value at the largest knot `<= t`.
    pub transitions: Vec<Vec<Vec<(u64, f64)>>>,
    pub note: String,
}

impl NonseparableSpec {
    fn new(n: u32) -> Self {
        let horizon = 2 * n as u64;
        // states: 0 = good (reward 1), 1 = bad, 2 = absorbing.
        let mut q = vec![vec![vec![(1, 0.0)]; 3]; 3];
        q[0][1] = vec![(1, 0.5)];
        q[0][2] = vec![(1, 0.0), (2, 0.5)];
        q[1][0] = vec![(1, 0.0), (horizon - 1, 0.5), (horizon, 0.5)];
        q[1][2] = vec![(1, 0.0), (horizon - 1, 0.0), (horizon, 0.5)];
        NonseparableSpec {
            n,
            states: vec!["good".into(), "bad".into(), "dead".into()],
            rewards: vec![1.0, 0.0, 0.0],
            transitions: q,
            note: "monotone but non-separable transitions; per-arm LP relaxations \
                   overestimate the optimum by a factor of order n, so no solver \
                   in this toolkit accepts the instance"
                .into(),
        }
    }
}

/// Staleness region for the three-arm benchmark policies: when both
/// stochastic arms were last observed bad `(k1, k2)` steps ago, play the
/// safe arm exactly inside the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StalenessRegion {
    /// `k1 <= 4, k2 <= 4, k1 + k2 <= 6` (the optimal region).
    Optimal,
    /// `k1 <= c, k2 <= c` (the best index policies are squares).
    Square(u64),
}

impl StalenessRegion {
    pub fn contains(&self, k1: u64, k2: u64) -> bool {
        match *self {
            StalenessRegion::Optimal => k1 <= 4 && k2 <= 4 && k1 + k2 <= 6,
            StalenessRegion::Square(c) => k1 <= c && k2 <= c,
        }
    }
}

/// Policy over the three-arm benchmark: exploit a just-observed good
/// stochastic arm; with both stochastic arms bad, play the safe arm inside
/// the region and otherwise the staler stochastic arm.
#[derive(Debug, Clone)]
pub struct RegionPolicy {
    pub region: StalenessRegion,
}

impl FeedbackPolicy for RegionPolicy {
    fn choose(&self, _arms: &[FeedbackArm], beliefs: &[BeliefState]) -> Option<usize> {
        debug_assert_eq!(beliefs.len(), 3);
        for i in [1usize, 2] {
            if beliefs[i].last == Observed::Good {
                return Some(i);
            }
        }
        let (k1, k2) = (beliefs[1].t, beliefs[2].t);
        if self.region.contains(k1, k2) {
            Some(0)
        } else if k1 >= k2 {
            Some(1)
        } else {
            Some(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_gap_instance_shape() {
        let GalleryInstance::Feedback(inst) = generate(&GalleryId::IndexGap).unwrap() else {
            panic!("wrong family")
        };
        assert_eq!(inst.len(), 3);
        assert_eq!(inst.arms()[1].alpha(), 0.1);
        assert_eq!(inst.arms()[1].beta(), 0.1);
        assert_eq!(inst.arms()[1].reward(), 2.0);
        assert_eq!(inst.arms()[0].reward(), 1.0);
        assert!(inst.arms()[0].belief_u(1) > 1.0 - 1e-8);
    }

    #[test]
    fn myopic_gap_parameters() {
        let GalleryInstance::Feedback(inst) = generate(&GalleryId::MyopicGap { n: 12 }).unwrap()
        else {
            panic!()
        };
        assert_eq!(inst.len(), 13);
        let a = &inst.arms()[1];
        assert_eq!(a.beta(), 2f64.powi(-12));
        assert!((a.stationary_good() - 1.0 / 12.0).abs() < 1e-6);
        assert_eq!(a.reward(), 12.0);
        assert!(generate(&GalleryId::MyopicGap { n: 41 }).is_err());
        assert!(generate(&GalleryId::MyopicGap { n: 1 }).is_err());
    }

    #[test]
    fn replenish_gap_parameters() {
        let GalleryInstance::Replenish(inst) =
            generate(&GalleryId::ReplenishGap { n: 10 }).unwrap()
        else {
            panic!()
        };
        let m = inst.machines();
        assert_eq!(m[0].repair_rate, 1e-4);
        assert_eq!(m[0].transitions[0][1], 0.1);
        assert_eq!(m[1].repair_rate, 1.0);
        assert_eq!(m[1].transitions[0][1], 1.0);
        assert_eq!(inst.capacity(), 1);
    }

    #[test]
    fn lp_gap_truncation_brackets_budget_rate() {
        let GalleryInstance::Feedback(inst) =
            generate(&GalleryId::LpGap { n: 50, beta: 1e-5 }).unwrap()
        else {
            panic!()
        };
        let t = lp_gap_suggested_truncation(&inst);
        let arm = &inst.arms()[0];
        assert!(play_rate(arm, t / 4) <= 1.0 / 50.0);
        assert!(play_rate(arm, t / 8) > 1.0 / 50.0);
    }

    #[test]
    fn region_policy_priorities() {
        let GalleryInstance::Feedback(inst) = generate(&GalleryId::IndexGap).unwrap() else {
            panic!()
        };
        let p = RegionPolicy {
            region: StalenessRegion::Optimal,
        };
        let b = |last, t| BeliefState { last, t };
        let arms = inst.arms();
        // exploit observed-good stochastic arm
        assert_eq!(
            p.choose(arms, &[b(Observed::Bad, 1), b(Observed::Good, 1), b(Observed::Bad, 3)]),
            Some(1)
        );
        // inside region: safe arm
        assert_eq!(
            p.choose(arms, &[b(Observed::Good, 5), b(Observed::Bad, 2), b(Observed::Bad, 2)]),
            Some(0)
        );
        // outside region: staler stochastic arm
        assert_eq!(
            p.choose(arms, &[b(Observed::Good, 5), b(Observed::Bad, 9), b(Observed::Bad, 2)]),
            Some(1)
        );
    }
}
