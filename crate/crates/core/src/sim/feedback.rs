//! Feedback-bandit evaluation: Monte Carlo simulation, exact evaluation of
//! a deterministic policy through its induced belief chain, and a
//! discounted value-iteration oracle for small instances.

use super::{SimConfig, SimError, SimResult};
use crate::belief::{BeliefState, FeedbackArm, FeedbackInstance, Observed};
use crate::feedback::FeedbackPolicy;
use crate::linalg;
use rand::Rng;
use std::collections::HashMap;

/// Hidden two-state chains evolve every step whether or not an arm is
/// played; playing credits the last-observed state's reward and reveals the
/// current state, resetting the belief clock.
pub fn simulate(
    instance: &FeedbackInstance,
    policy: &dyn FeedbackPolicy,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    let n = instance.len();
    let arms = instance.arms();
    let mut rep_means = Vec::with_capacity(cfg.replications as usize);
    let mut plays = vec![0u64; n];
    for rep in 0..cfg.replications {
        let mut rng = cfg.stream(rep);
        // Last observation fixed at "bad one step ago": hidden state was bad
        // at that observation and has evolved one step since.
        let mut hidden: Vec<bool> = (0..n)
            .map(|i| rng.gen::<f64>() < arms[i].alpha())
            .collect();
        let mut beliefs: Vec<BeliefState> = vec![BeliefState { last: Observed::Bad, t: 1 }; n];
        let mut total = 0.0f64;
        for step in 0..cfg.horizon {
            let action = policy.choose(arms, &beliefs);
            let mut observed: Option<(usize, bool)> = None;
            if let Some(i) = action {
                if i >= n {
                    return Err(SimError::ShapeMismatch(format!(
                        "policy chose arm {i} of {n}"
                    )));
                }
                if beliefs[i].last == Observed::Good && step >= cfg.burnin {
                    total += arms[i].reward();
                }
                if step >= cfg.burnin {
                    plays[i] += 1;
                }
                observed = Some((i, hidden[i]));
            }
            // Hidden evolution for every arm, in arm order.
            for (j, h) in hidden.iter_mut().enumerate() {
                let u = rng.gen::<f64>();
                *h = if *h {
                    u >= arms[j].beta()
                } else {
                    u < arms[j].alpha()
                };
            }
            for belief in beliefs.iter_mut() {
                *belief = belief.aged();
            }
            if let Some((i, was_good)) = observed {
                beliefs[i] = BeliefState {
                    last: if was_good { Observed::Good } else { Observed::Bad },
                    t: 1,
                };
            }
        }
        rep_means.push(total / cfg.measured_steps() as f64);
    }
    let measured = cfg.measured_steps() * cfg.replications as u64;
    Ok(SimResult::from_reps(
        rep_means,
        plays,
        measured,
        cfg,
        "last-observed",
    ))
}

const PACK_BITS: u32 = 18;

fn pack(beliefs: &[BeliefState]) -> u128 {
    let mut key = 0u128;
    for b in beliefs {
        let digit = ((b.t - 1) << 1) | u64::from(b.last == Observed::Good);
        key = (key << PACK_BITS) | digit as u128;
    }
    key
}

fn unpack(mut key: u128, n: usize) -> Vec<BeliefState> {
    let mut out = vec![BeliefState { last: Observed::Bad, t: 1 }; n];
    for i in (0..n).rev() {
        let digit = (key & ((1 << PACK_BITS) - 1)) as u64;
        key >>= PACK_BITS;
        out[i] = BeliefState {
            last: if digit & 1 == 1 { Observed::Good } else { Observed::Bad },
            t: (digit >> 1) + 1,
        };
    }
    out
}

/// Options for [`exact_policy_eval`].
#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    /// Belief clocks freeze at this age; must exceed every wait the policy
    /// compares against.
    pub t_cap: u64,
    /// Transition branches with probability below this floor are dropped
    /// and the rest renormalized (for near-deterministic arms whose
    /// negligible branches would otherwise double the state space).
    pub branch_floor: f64,
    /// Reachable-state cap.
    pub max_states: u64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            t_cap: 100,
            branch_floor: 0.0,
            max_states: 10_000_000,
        }
    }
}

/// Exact long-run average reward of a deterministic stationary policy:
/// builds the induced chain over joint belief states (clocks capped) from
/// the all-bad start, solves the stationary distribution (dense below 1500
/// states, power iteration to 1e-12 residual above), and returns the
/// stationary per-step reward under last-observed crediting.
pub fn exact_policy_eval(
    instance: &FeedbackInstance,
    policy: &dyn FeedbackPolicy,
    opts: &ExactOptions,
) -> Result<f64, SimError> {
    let n = instance.len();
    if n * PACK_BITS as usize > 126 {
        return Err(SimError::ShapeMismatch(format!(
            "exact evaluation supports at most 7 arms, got {n}"
        )));
    }
    if opts.t_cap < 2 || opts.t_cap >= (1 << (PACK_BITS - 1)) {
        return Err(SimError::BadConfig("t_cap out of range".into()));
    }
    let arms = instance.arms();
    let mut index: HashMap<u128, u32> = HashMap::new();
    let mut keys: Vec<u128> = Vec::new();
    let start = pack(&vec![BeliefState { last: Observed::Bad, t: 1 }; n]);
    index.insert(start, 0);
    keys.push(start);
    // succ[s]: up to two (state, prob); reward[s] per step spent at s.
    let mut succ: Vec<[(u32, f64); 2]> = Vec::new();
    let mut nsucc: Vec<u8> = Vec::new();
    let mut reward: Vec<f64> = Vec::new();
    let mut frontier = 0usize;
    while frontier < keys.len() {
        let key = keys[frontier];
        let beliefs = unpack(key, n);
        let action = policy.choose(arms, &beliefs);
        let aged: Vec<BeliefState> = beliefs
            .iter()
            .map(|b| {
                let t = (b.t + 1).min(opts.t_cap);
                BeliefState { last: b.last, t }
            })
            .collect();
        let mut out: Vec<(Vec<BeliefState>, f64)> = Vec::new();
        let mut r = 0.0;
        match action {
            None => out.push((aged.clone(), 1.0)),
            Some(i) => {
                if i >= n {
                    return Err(SimError::ShapeMismatch(format!(
                        "policy chose arm {i} of {n}"
                    )));
                }
                if beliefs[i].last == Observed::Good {
                    r = arms[i].reward();
                }
                let w = arms[i].belief_good(beliefs[i]);
                let mut good_next = aged.clone();
                good_next[i] = BeliefState { last: Observed::Good, t: 1 };
                let mut bad_next = aged.clone();
                bad_next[i] = BeliefState { last: Observed::Bad, t: 1 };
                out.push((good_next, w));
                out.push((bad_next, 1.0 - w));
            }
        }
        out.retain(|(_, p)| *p > opts.branch_floor);
        if out.is_empty() {
            return Err(SimError::BadConfig("branch floor removed all outcomes".into()));
        }
        let mass: f64 = out.iter().map(|(_, p)| p).sum();
        let mut entry = [(0u32, 0.0f64); 2];
        for (k, (next, p)) in out.iter().enumerate() {
            let nk = pack(next);
            let id = match index.get(&nk) {
                Some(&id) => id,
                None => {
                    let id = keys.len() as u32;
                    if id as u64 >= opts.max_states {
                        return Err(SimError::StateSpaceTooLarge {
                            states: id as u64 + 1,
                            cap: opts.max_states,
                        });
                    }
                    index.insert(nk, id);
                    keys.push(nk);
                    id
                }
            };
            entry[k] = (id, p / mass);
        }
        succ.push(entry);
        nsucc.push(out.len() as u8);
        reward.push(r);
        frontier += 1;
    }
    let m = keys.len();
    let pi = if m <= 1500 {
        let mut p = vec![vec![0.0; m]; m];
        for (s, row) in p.iter_mut().enumerate() {
            for k in 0..nsucc[s] as usize {
                let (to, pr) = succ[s][k];
                row[to as usize] += pr;
            }
        }
        linalg::stationary_dense(&p).ok_or(SimError::NoConvergence(0))?
    } else {
        // Power iteration from the physical start state.
        let mut x = vec![0.0f64; m];
        x[0] = 1.0;
        let mut next = vec![0.0f64; m];
        let max_iter = 400_000u64;
        let mut converged = false;
        for _ in 0..max_iter {
            next.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..m {
                let xs = x[s];
                if xs == 0.0 {
                    continue;
                }
                for k in 0..nsucc[s] as usize {
                    let (to, pr) = succ[s][k];
                    next[to as usize] += xs * pr;
                }
            }
            let l1: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut x, &mut next);
            if l1 <= 1e-12 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SimError::NoConvergence(max_iter));
        }
        x
    };
    Ok(pi.iter().zip(&reward).map(|(p, r)| p * r).sum())
}

/// Greedy policy extracted from value iteration, as a lookup table over
/// capped joint belief states.
#[derive(Debug, Clone)]
pub struct ViPolicy {
    /// 0 = idle, `i + 1` = play arm `i`.
    actions: Vec<u8>,
    n: usize,
    t_cap: u64,
}

impl ViPolicy {
    fn digit(&self, b: BeliefState) -> usize {
        // Good block first, matching the sweep's digit layout.
        let t = b.t.min(self.t_cap) - 1;
        let s = usize::from(b.last == Observed::Bad);
        s * self.t_cap as usize + t as usize
    }

    fn flat(&self, beliefs: &[BeliefState]) -> usize {
        let width = 2 * self.t_cap as usize;
        beliefs
            .iter()
            .fold(0usize, |acc, &b| acc * width + self.digit(b))
    }

    /// The action table entry for a joint state.
    pub fn action(&self, beliefs: &[BeliefState]) -> Option<usize> {
        match self.actions[self.flat(beliefs)] {
            0 => None,
            a => Some(a as usize - 1),
        }
    }
}

impl FeedbackPolicy for ViPolicy {
    fn choose(&self, _arms: &[FeedbackArm], beliefs: &[BeliefState]) -> Option<usize> {
        self.action(beliefs)
    }
}

/// Result of [`vi_optimal`].
#[derive(Debug)]
pub struct ViOutcome {
    pub policy: ViPolicy,
    /// Long-run average reward of the extracted policy (exact evaluation).
    pub average_reward: f64,
    pub sweeps: u64,
}

/// Discounted value iteration on the truncated joint belief MDP, followed by
/// exact average-reward evaluation of the greedy policy.
///
/// Iterates in relative form (the common level is subtracted each sweep) so
/// the stopping rule is on the span of the sweep difference, which keeps
/// the greedy region stable long before the raw values converge.
pub fn vi_optimal(
    instance: &FeedbackInstance,
    gamma: f64,
    t_cap: u64,
    span_tol: f64,
    max_sweeps: u64,
) -> Result<ViOutcome, SimError> {
    let n = instance.len();
    let width = 2 * t_cap as usize;
    let states = (width as u64).checked_pow(n as u32).ok_or(
        SimError::StateSpaceTooLarge {
            states: u64::MAX,
            cap: 40_000_000,
        },
    )?;
    if states > 40_000_000 {
        return Err(SimError::StateSpaceTooLarge {
            states,
            cap: 40_000_000,
        });
    }
    let states = states as usize;
    let arms = instance.arms();
    // Per-arm digit tables: observe-good probability, expected play reward,
    // aged digit. Digit layout: good block then bad block, each of length
    // t_cap, clock t stored as t - 1.
    let mut p_good: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut play_reward: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut aged: Vec<Vec<usize>> = Vec::with_capacity(n);
    for arm in arms {
        let mut pg = vec![0.0; width];
        let mut pr = vec![0.0; width];
        let mut ag = vec![0usize; width];
        for d in 0..width {
            let good = d < t_cap as usize;
            let t = (d % t_cap as usize) as u64 + 1;
            let w = if good { arm.belief_u(t) } else { arm.belief_v(t) };
            pg[d] = w;
            pr[d] = arm.reward() * w;
            let t_next = (t + 1).min(t_cap);
            ag[d] = if good {
                t_next as usize - 1
            } else {
                t_cap as usize + t_next as usize - 1
            };
        }
        p_good.push(pg);
        play_reward.push(pr);
        aged.push(ag);
    }
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * width;
    }
    let good_fresh: Vec<usize> = (0..n).map(|_| 0usize).collect(); // digit of (good, 1)
    let bad_fresh: Vec<usize> = (0..n).map(|_| t_cap as usize).collect(); // digit of (bad, 1)

    let mut value = vec![0.0f64; states];
    let mut next_value = vec![0.0f64; states];
    let mut actions = vec![0u8; states];
    let mut digits = vec![0usize; n];
    let mut sweeps = 0u64;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        digits.iter_mut().for_each(|d| *d = 0);
        let mut span_lo = f64::INFINITY;
        let mut span_hi = f64::NEG_INFINITY;
        for s in 0..states {
            let mut aged_flat = 0usize;
            for (i, &d) in digits.iter().enumerate() {
                aged_flat += strides[i] * aged[i][d];
            }
            let mut best = gamma * value[aged_flat]; // idle
            let mut best_a = 0u8;
            for i in 0..n {
                let d = digits[i];
                let base = aged_flat - strides[i] * aged[i][d];
                let w = p_good[i][d];
                let q = play_reward[i][d]
                    + gamma
                        * (w * value[base + strides[i] * good_fresh[i]]
                            + (1.0 - w) * value[base + strides[i] * bad_fresh[i]]);
                if q > best + 1e-14 {
                    best = q;
                    best_a = i as u8 + 1;
                }
            }
            next_value[s] = best;
            actions[s] = best_a;
            let diff = best - value[s];
            span_lo = span_lo.min(diff);
            span_hi = span_hi.max(diff);
            // Odometer increment.
            for i in (0..n).rev() {
                digits[i] += 1;
                if digits[i] < width {
                    break;
                }
                digits[i] = 0;
            }
        }
        // Relative form: subtract the level at state 0.
        let level = next_value[0];
        for v in next_value.iter_mut() {
            *v -= level;
        }
        std::mem::swap(&mut value, &mut next_value);
        if span_hi - span_lo <= span_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SimError::NoConvergence(max_sweeps));
    }
    let policy = ViPolicy {
        actions,
        n,
        t_cap,
    };
    let average_reward = exact_policy_eval(
        instance,
        &policy,
        &ExactOptions {
            t_cap,
            branch_floor: 1e-8,
            max_states: 10_000_000,
        },
    )?;
    Ok(ViOutcome {
        policy,
        average_reward,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{reward_rate, WaitThreshold};
    use crate::DEFAULT_DELTA;

    fn arm(alpha: f64, beta: f64, r: f64) -> FeedbackArm {
        FeedbackArm::new(alpha, beta, r, DEFAULT_DELTA).unwrap()
    }

    #[test]
    fn exact_single_arm_threshold_matches_closed_form() {
        let a = arm(0.2, 0.3, 1.0);
        let inst = FeedbackInstance::new(vec![a], DEFAULT_DELTA).unwrap();
        for t in [1u64, 2, 4, 9, 25] {
            let policy = WaitThreshold { waits: vec![t] };
            let opts = ExactOptions {
                t_cap: 200,
                ..Default::default()
            };
            let exact = exact_policy_eval(&inst, &policy, &opts).unwrap();
            let closed = reward_rate(&a, t);
            assert!(
                (exact - closed).abs() < 1e-10,
                "t={t}: exact {exact} vs closed {closed}"
            );
        }
    }

    #[test]
    fn simulation_approaches_closed_form() {
        let a = arm(0.1, 0.1, 2.0);
        let inst = FeedbackInstance::new(vec![a], DEFAULT_DELTA).unwrap();
        let policy = WaitThreshold { waits: vec![1] };
        let cfg = SimConfig::new(200_000, 5_000, 4, 7).unwrap();
        let res = simulate(&inst, &policy, &cfg).unwrap();
        assert!((res.mean - 1.0).abs() < 3.0 * res.stderr.max(3e-3), "mean {}", res.mean);
    }

    #[test]
    fn simulation_is_bit_reproducible() {
        let inst =
            FeedbackInstance::new(vec![arm(0.1, 0.1, 2.0), arm(0.2, 0.3, 1.0)], DEFAULT_DELTA)
                .unwrap();
        let policy = WaitThreshold { waits: vec![2, 3] };
        let cfg = SimConfig::new(20_000, 500, 3, 42).unwrap();
        let a = simulate(&inst, &policy, &cfg).unwrap();
        let b = simulate(&inst, &policy, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vi_on_single_arm_plays_immediately() {
        let inst = FeedbackInstance::new(vec![arm(0.2, 0.3, 1.0)], DEFAULT_DELTA).unwrap();
        let out = vi_optimal(&inst, 0.99, 40, 1e-10, 2000).unwrap();
        // optimal single-arm play is the unconstrained best threshold
        let best = (1..=500).map(|t| reward_rate(&inst.arms()[0], t)).fold(f64::MIN, f64::max);
        assert!((out.average_reward - best).abs() < 1e-9);
        // policy plays in every bad state at the wait matching argmax R
        let b1 = BeliefState { last: Observed::Bad, t: 1 };
        assert_eq!(out.policy.action(&[b1]), Some(0));
    }
}
