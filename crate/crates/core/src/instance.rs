//! Multi-state monotone bandit, probe, and machine-replenishment instances.

use crate::belief::FeedbackArm;
use crate::pwl::PiecewiseLinearMonotone;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("instance must contain at least one arm/machine")]
    Empty,
    #[error("arm {arm}: state count mismatch or empty state set")]
    BadStates { arm: usize },
    #[error("arm {arm}: transition matrix row {state} invalid: {reason}")]
    BadTransitions {
        arm: usize,
        state: usize,
        reason: String,
    },
    #[error("arm {arm}: transition graph on positive q entries is not strongly connected")]
    NotStronglyConnected { arm: usize },
    #[error("arm {arm} state {state}: duration must be >= 1")]
    BadDuration { arm: usize, state: usize },
    #[error("arm {arm}: negative cost")]
    NegativeCost { arm: usize },
    #[error("play budget must be >= 1")]
    BadBudget,
    #[error("switching costs require unit durations (arm {arm} state {state} has duration {duration})")]
    SwitchingWithDurations {
        arm: usize,
        state: usize,
        duration: u64,
    },
    #[error("machine {machine}: row {state} of p must sum to 1 (got {sum})")]
    NotStochastic {
        machine: usize,
        state: usize,
        sum: f64,
    },
    #[error("machine {machine}: repair rate {rate} must lie in (0, 1]")]
    BadRepairRate { machine: usize, rate: f64 },
    #[error("machine {machine}: initial state {state} out of range")]
    BadInitialState { machine: usize, state: usize },
    #[error("machine {machine}: negative reward or cost")]
    NegativeValue { machine: usize },
}

/// One state of a monotone arm: reward on play, play duration, and the
/// escape probability as a function of the wait since the last play ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneState {
    pub reward: f64,
    pub duration: u64,
    pub escape: PiecewiseLinearMonotone,
}

/// A multi-state arm with separable transitions: played in state `k` after
/// waiting `t` steps, it moves to `j != k` with probability
/// `escape_k(t) * q[k][j]` and stays put otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneArm {
    pub states: Vec<MonotoneState>,
    /// Conditional transition probabilities, `q[k][k] = 0`,
    /// `sum_j q[k][j] <= 1` for every `k`.
    pub q: Vec<Vec<f64>>,
}

impl MonotoneArm {
    fn validate(&self, arm: usize) -> Result<(), InstanceError> {
        let n = self.states.len();
        if n == 0 || self.q.len() != n {
            return Err(InstanceError::BadStates { arm });
        }
        for (k, row) in self.q.iter().enumerate() {
            if row.len() != n {
                return Err(InstanceError::BadTransitions {
                    arm,
                    state: k,
                    reason: "row length mismatch".into(),
                });
            }
            if row[k] != 0.0 {
                return Err(InstanceError::BadTransitions {
                    arm,
                    state: k,
                    reason: "diagonal must be zero".into(),
                });
            }
            let mut sum = 0.0;
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(InstanceError::BadTransitions {
                        arm,
                        state: k,
                        reason: format!("entry {p} out of [0,1]"),
                    });
                }
                sum += p;
            }
            if sum > 1.0 + 1e-12 {
                return Err(InstanceError::BadTransitions {
                    arm,
                    state: k,
                    reason: format!("row sum {sum} exceeds 1"),
                });
            }
        }
        for (k, st) in self.states.iter().enumerate() {
            if st.duration == 0 {
                return Err(InstanceError::BadDuration { arm, state: k });
            }
            if !st.reward.is_finite() || st.reward < 0.0 {
                return Err(InstanceError::BadStates { arm });
            }
        }
        if n > 1 && !strongly_connected(&self.q) {
            return Err(InstanceError::NotStronglyConnected { arm });
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }
}

/// Transition-structure variant of a monotone instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonotoneVariant {
    /// One player, unit durations, no switching costs.
    Base,
    /// `M` players, blocking plays of fixed durations.
    MultiPlay,
    /// One player, unit durations, per-arm switch-out/switch-in costs.
    Switching,
}

/// A monotone bandit instance: arms, play budget, and per-arm switch costs
/// (both zero when the switching-cost feature is off).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneInstance {
    arms: Vec<MonotoneArm>,
    play_budget: u64,
    switch_out: Vec<f64>,
    switch_in: Vec<f64>,
}

impl MonotoneInstance {
    pub fn new(
        arms: Vec<MonotoneArm>,
        play_budget: u64,
        switch_out: Vec<f64>,
        switch_in: Vec<f64>,
    ) -> Result<Self, InstanceError> {
        if arms.is_empty() {
            return Err(InstanceError::Empty);
        }
        if play_budget == 0 {
            return Err(InstanceError::BadBudget);
        }
        let n = arms.len();
        let switch_out = if switch_out.is_empty() {
            vec![0.0; n]
        } else {
            switch_out
        };
        let switch_in = if switch_in.is_empty() {
            vec![0.0; n]
        } else {
            switch_in
        };
        if switch_out.len() != n || switch_in.len() != n {
            return Err(InstanceError::Empty);
        }
        for (i, arm) in arms.iter().enumerate() {
            arm.validate(i)?;
            if switch_out[i] < 0.0 || switch_in[i] < 0.0 {
                return Err(InstanceError::NegativeCost { arm: i });
            }
        }
        let inst = MonotoneInstance {
            arms,
            play_budget,
            switch_out,
            switch_in,
        };
        if inst.has_switch_costs() {
            for (i, arm) in inst.arms.iter().enumerate() {
                for (k, st) in arm.states.iter().enumerate() {
                    if st.duration > 1 {
                        return Err(InstanceError::SwitchingWithDurations {
                            arm: i,
                            state: k,
                            duration: st.duration,
                        });
                    }
                }
            }
        }
        Ok(inst)
    }

    pub fn arms(&self) -> &[MonotoneArm] {
        &self.arms
    }

    pub fn play_budget(&self) -> u64 {
        self.play_budget
    }

    pub fn switch_out(&self) -> &[f64] {
        &self.switch_out
    }

    pub fn switch_in(&self) -> &[f64] {
        &self.switch_in
    }

    pub fn has_switch_costs(&self) -> bool {
        self.switch_out.iter().chain(&self.switch_in).any(|&c| c > 0.0)
    }

    pub fn has_durations(&self) -> bool {
        self.arms
            .iter()
            .any(|a| a.states.iter().any(|s| s.duration > 1))
    }

    /// Encode a feedback instance as a two-state monotone instance:
    /// `q(g,b) = q(b,g) = 1`, `f_g(t) = 1 - u_t`, `f_b(t) = v_t`, with both
    /// escape functions sampled at every integer `1..=t_max` as breakpoints
    /// (the piecewise-linear interpolant is then exact at all queried ts).
    /// State 0 is good, state 1 is bad.
    pub fn from_feedback(arms: &[FeedbackArm], t_max: u64) -> Self {
        let enc: Vec<MonotoneArm> = arms
            .iter()
            .map(|arm| {
                let f_g: Vec<(u64, f64)> =
                    (1..=t_max).map(|t| (t, 1.0 - arm.belief_u(t))).collect();
                let f_b: Vec<(u64, f64)> = (1..=t_max).map(|t| (t, arm.belief_v(t))).collect();
                MonotoneArm {
                    states: vec![
                        MonotoneState {
                            reward: arm.reward(),
                            duration: 1,
                            escape: PiecewiseLinearMonotone::new(f_g).unwrap(),
                        },
                        MonotoneState {
                            reward: 0.0,
                            duration: 1,
                            escape: PiecewiseLinearMonotone::new(f_b).unwrap(),
                        },
                    ],
                    q: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                }
            })
            .collect();
        MonotoneInstance::new(enc, 1, vec![], vec![]).unwrap()
    }
}

/// Strong connectivity of the directed graph with an edge `(j, k)` whenever
/// `q[j][k] > 0`, by forward and backward reachability from vertex 0.
fn strongly_connected(q: &[Vec<f64>]) -> bool {
    let n = q.len();
    let reach = |transpose: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let edge = if transpose { q[w][v] } else { q[v][w] };
                if edge > 0.0 && !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count
    };
    reach(false) == n && reach(true) == n
}

/// Feedback arm with an observation cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeArm {
    pub arm: FeedbackArm,
    pub probe_cost: f64,
}

/// Feedback MAB with observation costs: plays deposit unobserved rewards,
/// probes pay `c_i` to reveal an arm's state at the end of a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeInstance {
    arms: Vec<ProbeArm>,
    play_budget: u64,
}

impl ProbeInstance {
    pub fn new(arms: Vec<ProbeArm>, play_budget: u64) -> Result<Self, InstanceError> {
        if arms.is_empty() {
            return Err(InstanceError::Empty);
        }
        if play_budget == 0 {
            return Err(InstanceError::BadBudget);
        }
        for (i, pa) in arms.iter().enumerate() {
            if !(pa.probe_cost >= 0.0) || !pa.probe_cost.is_finite() {
                return Err(InstanceError::NegativeCost { arm: i });
            }
        }
        Ok(ProbeInstance { arms, play_budget })
    }

    pub fn arms(&self) -> &[ProbeArm] {
        &self.arms
    }

    pub fn play_budget(&self) -> u64 {
        self.play_budget
    }
}

/// One machine of a replenishment instance: active states with rewards and
/// repair costs, a row-stochastic active transition matrix, a geometric
/// repair rate, and the post-repair initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub rewards: Vec<f64>,
    pub repair_costs: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
    pub repair_rate: f64,
    pub initial_state: usize,
}

impl Machine {
    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }
}

/// Non-preemptive machine replenishment: at most `capacity` machines can be
/// under repair per step; repairs are geometric and cannot be interrupted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplenishInstance {
    machines: Vec<Machine>,
    capacity: u64,
}

impl ReplenishInstance {
    pub fn new(machines: Vec<Machine>, capacity: u64) -> Result<Self, InstanceError> {
        if machines.is_empty() {
            return Err(InstanceError::Empty);
        }
        if capacity == 0 {
            return Err(InstanceError::BadBudget);
        }
        for (m, mac) in machines.iter().enumerate() {
            let n = mac.rewards.len();
            if n == 0 || mac.repair_costs.len() != n || mac.transitions.len() != n {
                return Err(InstanceError::BadStates { arm: m });
            }
            if mac.initial_state >= n {
                return Err(InstanceError::BadInitialState {
                    machine: m,
                    state: mac.initial_state,
                });
            }
            if !(mac.repair_rate > 0.0 && mac.repair_rate <= 1.0) {
                return Err(InstanceError::BadRepairRate {
                    machine: m,
                    rate: mac.repair_rate,
                });
            }
            for (u, row) in mac.transitions.iter().enumerate() {
                if row.len() != n {
                    return Err(InstanceError::BadStates { arm: m });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 || row.iter().any(|&p| p < 0.0) {
                    return Err(InstanceError::NotStochastic {
                        machine: m,
                        state: u,
                        sum,
                    });
                }
            }
            if mac
                .rewards
                .iter()
                .chain(&mac.repair_costs)
                .any(|&v| !v.is_finite() || v < 0.0)
            {
                return Err(InstanceError::NegativeValue { machine: m });
            }
        }
        Ok(ReplenishInstance { machines, capacity })
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_arm() -> MonotoneArm {
        MonotoneArm {
            states: vec![
                MonotoneState {
                    reward: 1.0,
                    duration: 1,
                    escape: PiecewiseLinearMonotone::constant(0.5).unwrap(),
                },
                MonotoneState {
                    reward: 0.0,
                    duration: 1,
                    escape: PiecewiseLinearMonotone::new(vec![(1, 0.1), (4, 0.8)]).unwrap(),
                },
            ],
            q: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        }
    }

    #[test]
    fn valid_instance_loads() {
        let inst = MonotoneInstance::new(vec![two_state_arm()], 1, vec![], vec![]).unwrap();
        assert_eq!(inst.arms().len(), 1);
        assert!(!inst.has_switch_costs());
    }

    #[test]
    fn disconnected_graph_rejected() {
        let mut arm = two_state_arm();
        arm.q = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
        let err = MonotoneInstance::new(vec![arm], 1, vec![], vec![]).unwrap_err();
        assert!(matches!(err, InstanceError::NotStronglyConnected { .. }));
    }

    #[test]
    fn switching_with_durations_rejected() {
        let mut arm = two_state_arm();
        arm.states[0].duration = 3;
        let err =
            MonotoneInstance::new(vec![arm], 1, vec![1.0], vec![0.5]).unwrap_err();
        assert!(matches!(err, InstanceError::SwitchingWithDurations { .. }));
    }

    #[test]
    fn row_sum_above_one_rejected() {
        let mut arm = two_state_arm();
        arm.q = vec![vec![0.0, 0.9], vec![1.1, 0.0]];
        assert!(MonotoneInstance::new(vec![arm], 1, vec![], vec![]).is_err());
    }

    #[test]
    fn feedback_encoding_matches_beliefs() {
        let fb = FeedbackArm::new(0.2, 0.3, 2.0, crate::DEFAULT_DELTA).unwrap();
        let inst = MonotoneInstance::from_feedback(&[fb], 50);
        let arm = &inst.arms()[0];
        for t in 1..=50 {
            assert_eq!(arm.states[0].escape.eval(t), 1.0 - fb.belief_u(t));
            assert_eq!(arm.states[1].escape.eval(t), fb.belief_v(t));
        }
        assert_eq!(arm.states[0].reward, 2.0);
    }

    #[test]
    fn replenish_validation() {
        let machine = Machine {
            rewards: vec![1.0, 0.0],
            repair_costs: vec![0.0, 0.0],
            transitions: vec![vec![0.9, 0.1], vec![0.0, 1.0]],
            repair_rate: 0.5,
            initial_state: 0,
        };
        assert!(ReplenishInstance::new(vec![machine.clone()], 1).is_ok());
        let mut bad = machine;
        bad.transitions[0][0] = 0.5;
        assert!(ReplenishInstance::new(vec![bad], 1).is_err());
    }
}
