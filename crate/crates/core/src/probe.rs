//! Feedback bandits with observation costs: plays deposit unobserved
//! rewards, a paid probe at the end of a step reveals an arm's state.
//!
//! The solver builds the balanced dual of the play/probe LP (variables: a
//! play penalty, per-arm excess rewards and potentials, and per-(state,
//! elapsed) reward caps), reads the probe supports off the row duals, and
//! derives the two-stage policy parameters: how long to wait after a bad
//! observation, how many steps to play blind before re-probing, and how
//! long to ride a good observation.

use crate::instance::ProbeInstance;
use crate::lp::{self, LpError, LpModel, Relation, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOL_EXCESS: f64 = 1e-7;
pub const TOL_SUPPORT: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("arm {arm}: positive excess but no probe support within the truncation {horizon}; enlarge it")]
    MissingSupport { arm: usize, horizon: u64 },
    #[error("arm {arm}: {what} identity residual {residual} exceeds tolerance")]
    IdentityViolated {
        arm: usize,
        what: &'static str,
        residual: f64,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Which primal variable a dual row stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeRowTag {
    /// Reward-cap row; its dual is the play probability `x` at
    /// (arm, observed-good?, elapsed).
    Play { arm: usize, good: bool, t: u64 },
    /// Probe row; its dual is the probe probability `z`.
    Probe { arm: usize, good: bool, t: u64 },
    Balance,
}

#[derive(Debug, Clone)]
pub struct ProbeLp {
    pub model: LpModel,
    pub penalty_var: usize,
    pub excess_vars: Vec<usize>,
    pub potential_vars: Vec<usize>,
    pub row_tags: Vec<ProbeRowTag>,
    pub horizons: Vec<u64>,
}

/// Expected play reward at (observed state, elapsed steps).
pub fn play_reward(instance: &ProbeInstance, arm: usize, good: bool, t: u64) -> f64 {
    let a = &instance.arms()[arm].arm;
    a.reward() * if good { a.belief_u(t) } else { a.belief_v(t) }
}

/// Build the balanced dual, truncated to `horizons[i]` elapsed steps.
pub fn build_probe_lp(instance: &ProbeInstance, horizons: &[u64]) -> ProbeLp {
    let n = instance.arms().len();
    let budget = instance.play_budget() as f64;
    let mut model = LpModel::new(Sense::Minimize);
    let penalty_var = model.add_var(budget);
    let excess_vars: Vec<usize> = (0..n).map(|_| model.add_var(1.0)).collect();
    let potential_vars: Vec<usize> = (0..n).map(|_| model.add_var(0.0)).collect();
    let mut row_tags = Vec::new();
    // Reward-cap variables per (arm, state, elapsed).
    let mut caps: Vec<[Vec<usize>; 2]> = Vec::with_capacity(n);
    for (i, _pa) in instance.arms().iter().enumerate() {
        let t_max = horizons[i];
        let good: Vec<usize> = (1..=t_max).map(|_| model.add_var(0.0)).collect();
        let bad: Vec<usize> = (1..=t_max).map(|_| model.add_var(0.0)).collect();
        caps.push([good, bad]);
    }
    for (i, pa) in instance.arms().iter().enumerate() {
        let t_max = horizons[i];
        let arm = &pa.arm;
        for (si, is_good) in [(0usize, true), (1usize, false)] {
            for t in 1..=t_max {
                model.add_row(
                    Relation::Ge,
                    play_reward(instance, i, is_good, t),
                    vec![(penalty_var, 1.0), (caps[i][si][t as usize - 1], 1.0)],
                );
                row_tags.push(ProbeRowTag::Play {
                    arm: i,
                    good: is_good,
                    t,
                });
            }
        }
        for t in 1..=t_max {
            // Probe after a good observation: t h + (1 - u_t) p - sum caps >= -c
            let mut coeffs = vec![
                (excess_vars[i], t as f64),
                (potential_vars[i], 1.0 - arm.belief_u(t)),
            ];
            for l in 1..=t {
                coeffs.push((caps[i][0][l as usize - 1], -1.0));
            }
            model.add_row(Relation::Ge, -pa.probe_cost, coeffs);
            row_tags.push(ProbeRowTag::Probe {
                arm: i,
                good: true,
                t,
            });
            // Probe after a bad observation: t h - v_t p - sum caps >= -c
            let mut coeffs = vec![
                (excess_vars[i], t as f64),
                (potential_vars[i], -arm.belief_v(t)),
            ];
            for l in 1..=t {
                coeffs.push((caps[i][1][l as usize - 1], -1.0));
            }
            model.add_row(Relation::Ge, -pa.probe_cost, coeffs);
            row_tags.push(ProbeRowTag::Probe {
                arm: i,
                good: false,
                t,
            });
        }
    }
    let mut balance = vec![(penalty_var, budget)];
    for &h in &excess_vars {
        balance.push((h, -1.0));
    }
    model.add_row(Relation::Eq, 0.0, balance);
    row_tags.push(ProbeRowTag::Balance);
    ProbeLp {
        model,
        penalty_var,
        excess_vars,
        potential_vars,
        row_tags,
        horizons: horizons.to_vec(),
    }
}

/// Per-arm two-stage policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeArmParams {
    pub active: bool,
    /// Excess reward `h_i`.
    pub excess: f64,
    /// Good-state potential `p_i`.
    pub potential: f64,
    /// Elapsed time of the earliest supported probe after a bad
    /// observation (`d_i`).
    pub probe_after_bad: u64,
    /// Number of blind plays before that probe (`m_i`).
    pub try_plays: u64,
    /// Run length after a good observation (`e_i`).
    pub exploit_run: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Balanced-dual objective `M lambda + sum h`.
    pub objective: f64,
    pub penalty: f64,
    pub arms: Vec<ProbeArmParams>,
    pub max_cs_residual: f64,
}

/// Reward cap above the penalty: `max(0, R - lambda)`; the dual optimum
/// admits this closed form, and positivity of the bad-state caps is what
/// determines how many blind plays precede a probe.
fn reward_cap(instance: &ProbeInstance, arm: usize, good: bool, t: u64, penalty: f64) -> f64 {
    (play_reward(instance, arm, good, t) - penalty).max(0.0)
}

/// Solve the balanced dual and extract parameters, asserting both tightness
/// identities; grows the truncation and re-solves (up to three doublings)
/// when an active arm's probe support hits the boundary.
pub fn solve_probe(instance: &ProbeInstance) -> Result<ProbeParams, ProbeError> {
    let mut horizons: Vec<u64> = instance
        .arms()
        .iter()
        .map(|pa| pa.arm.mixing_time(1e-9, 4_000))
        .collect();
    let mut last_err = None;
    for _ in 0..4 {
        let lp = build_probe_lp(instance, &horizons);
        let sol = lp::lp_solve_auto(&lp.model, lp::TOL_LP)?;
        match extract_probe_params(instance, &lp, &sol) {
            Ok(params) => return Ok(params),
            Err(ProbeError::MissingSupport { arm, .. }) => {
                horizons[arm] = (horizons[arm] * 2).min(100_000);
                last_err = Some(ProbeError::MissingSupport {
                    arm,
                    horizon: horizons[arm],
                });
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// Read supports off the dual values and derive `(d, m, e)` per active arm.
pub fn extract_probe_params(
    instance: &ProbeInstance,
    lp: &ProbeLp,
    sol: &lp::LpSolution,
) -> Result<ProbeParams, ProbeError> {
    let n = instance.arms().len();
    let penalty = sol.primal[lp.penalty_var];
    let mut first_good_probe: Vec<Option<u64>> = vec![None; n];
    let mut first_bad_probe: Vec<Option<u64>> = vec![None; n];
    for (row, tag) in lp.row_tags.iter().enumerate() {
        if let ProbeRowTag::Probe { arm, good, t } = *tag {
            if sol.dual[row] > TOL_SUPPORT {
                let slot = if good {
                    &mut first_good_probe[arm]
                } else {
                    &mut first_bad_probe[arm]
                };
                if slot.map_or(true, |prev| t < prev) {
                    *slot = Some(t);
                }
            }
        }
    }
    let mut arms = Vec::with_capacity(n);
    for (i, pa) in instance.arms().iter().enumerate() {
        let excess = sol.primal[lp.excess_vars[i]];
        let potential = sol.primal[lp.potential_vars[i]];
        let active = excess > TOL_EXCESS;
        if !active {
            arms.push(ProbeArmParams {
                active,
                excess,
                potential,
                probe_after_bad: 0,
                try_plays: 0,
                exploit_run: 0,
            });
            continue;
        }
        let (Some(exploit_run), Some(probe_after_bad)) =
            (first_good_probe[i], first_bad_probe[i])
        else {
            return Err(ProbeError::MissingSupport {
                arm: i,
                horizon: lp.horizons[i],
            });
        };
        if probe_after_bad * 4 > lp.horizons[i] || exploit_run * 4 > lp.horizons[i] {
            return Err(ProbeError::MissingSupport {
                arm: i,
                horizon: lp.horizons[i],
            });
        }
        let try_plays = (1..=probe_after_bad)
            .filter(|&l| reward_cap(instance, i, false, l, penalty) > 0.0)
            .count() as u64;
        // Positive bad-state caps form a suffix of 1..=d.
        for l in (probe_after_bad - try_plays + 1)..=probe_after_bad {
            debug_assert!(reward_cap(instance, i, false, l, penalty) > 0.0);
        }
        // Tightness at the bad-probe time:
        //   d h = -c + v_d p + sum_{l<=d} cap_b(l)
        let d = probe_after_bad;
        let cap_sum: f64 = (1..=d)
            .map(|l| reward_cap(instance, i, false, l, penalty))
            .sum();
        let lhs = d as f64 * excess;
        let rhs = -pa.probe_cost + pa.arm.belief_v(d) * potential + cap_sum;
        let residual = (lhs - rhs).abs();
        if residual > 1e-6 * (1.0 + lhs.abs()) {
            return Err(ProbeError::IdentityViolated {
                arm: i,
                what: "bad-probe tightness",
                residual,
            });
        }
        // Tightness at the good-probe time:
        //   e (lambda + h) = sum_{t<=e} R_g(t) - c - (1 - u_e) p
        let e = exploit_run;
        let reward_sum: f64 = (1..=e).map(|t| play_reward(instance, i, true, t)).sum();
        let lhs = e as f64 * (penalty + excess);
        let rhs = reward_sum - pa.probe_cost - (1.0 - pa.arm.belief_u(e)) * potential;
        let residual = (lhs - rhs).abs();
        if residual > 1e-6 * (1.0 + lhs.abs()) {
            return Err(ProbeError::IdentityViolated {
                arm: i,
                what: "good-probe tightness",
                residual,
            });
        }
        arms.push(ProbeArmParams {
            active,
            excess,
            potential,
            probe_after_bad,
            try_plays,
            exploit_run,
        });
    }
    let report = lp::check_complementary_slackness(&lp.model, sol, lp::TOL_CS);
    Ok(ProbeParams {
        objective: sol.objective,
        penalty,
        arms,
        max_cs_residual: report.max_product,
    })
}

/// Symbolic drift certificate of the two-stage policy: per-step value plus
/// potential change over a stage block, minus the block's share of
/// `penalty + excess`. Both are non-negative (up to tolerance) at the
/// optimum; returns the minimum over arms and stages.
pub fn stage_drift_margin(instance: &ProbeInstance, params: &ProbeParams) -> f64 {
    let mut min_margin = f64::INFINITY;
    for (i, ap) in params.arms.iter().enumerate() {
        if !ap.active {
            continue;
        }
        let pa = &instance.arms()[i];
        let (d, m, e) = (ap.probe_after_bad, ap.try_plays, ap.exploit_run);
        let per_step = params.penalty + ap.excess;
        // Stage 1 from the earliest ready start (elapsed d-m+1 .. d).
        let blind_rewards: f64 = (d - m + 1..=d)
            .map(|l| play_reward(instance, i, false, l))
            .sum();
        let value1 = -pa.probe_cost + blind_rewards + pa.arm.belief_v(d) * ap.potential
            - (d - m) as f64 * ap.excess;
        let margin1 = value1 - m as f64 * per_step;
        min_margin = min_margin.min(margin1);
        // Stage 2 block.
        let good_rewards: f64 = (1..=e).map(|t| play_reward(instance, i, true, t)).sum();
        let value2 =
            good_rewards - pa.probe_cost - (1.0 - pa.arm.belief_u(e)) * ap.potential;
        let margin2 = value2 - e as f64 * per_step;
        min_margin = min_margin.min(margin2);
    }
    min_margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::FeedbackArm;
    use crate::feedback::balanced_penalty;
    use crate::instance::ProbeArm;
    use crate::{FeedbackInstance, DEFAULT_DELTA};

    fn probe_arm(alpha: f64, beta: f64, r: f64, c: f64) -> ProbeArm {
        ProbeArm {
            arm: FeedbackArm::new(alpha, beta, r, DEFAULT_DELTA).unwrap(),
            probe_cost: c,
        }
    }

    #[test]
    fn zero_cost_single_arm_dominates_feedback_economics() {
        // With free probes, observation decouples from play, so the relaxed
        // optimum can only improve on the feedback bandit where plays are
        // the sole source of information; the gap stays small.
        let arm = probe_arm(0.2, 0.25, 1.5, 0.0);
        let inst = ProbeInstance::new(vec![arm.clone()], 1).unwrap();
        let params = solve_probe(&inst).unwrap();
        let fb = FeedbackInstance::new(vec![arm.arm], DEFAULT_DELTA).unwrap();
        let fb_params = balanced_penalty(&fb, 1e-4).unwrap();
        assert!(params.penalty >= fb_params.penalty - 1e-9);
        assert!((params.penalty - fb_params.penalty).abs() < 0.05 * fb_params.penalty);
        // Always-probing is optimal at zero cost: the fixed point is
        // pi_g r (1 - beta) / (1 + pi_g) in closed form.
        let a = &inst.arms()[0].arm;
        let pi = a.stationary_good();
        let expect = pi * a.reward() * (1.0 - a.beta()) / (1.0 + pi);
        assert!((params.penalty - expect).abs() < 1e-6);
    }

    #[test]
    fn exorbitant_probe_cost_deactivates_arm() {
        let a = probe_arm(0.2, 0.3, 1.0, 1.0 / 0.3 + 1.0 / 0.2 + 5.0);
        let cheap = probe_arm(0.06, 0.2, 2.0, 0.05);
        let inst = ProbeInstance::new(vec![a, cheap], 1).unwrap();
        let params = solve_probe(&inst).unwrap();
        assert!(!params.arms[0].active, "dear-to-probe arm stayed active");
        assert!(params.arms[1].active);
    }

    #[test]
    fn symmetric_arms_get_equal_excess() {
        let a = probe_arm(0.05, 0.1, 1.2, 0.08);
        let inst = ProbeInstance::new(vec![a.clone(), a], 1).unwrap();
        let params = solve_probe(&inst).unwrap();
        assert!((params.arms[0].excess - params.arms[1].excess).abs() < 1e-8);
    }

    #[test]
    fn stage_margins_certify_the_blocks() {
        let inst = ProbeInstance::new(
            vec![probe_arm(0.04, 0.06, 1.0, 0.05), probe_arm(0.05, 0.1, 1.2, 0.08)],
            1,
        )
        .unwrap();
        let params = solve_probe(&inst).unwrap();
        let margin = stage_drift_margin(&inst, &params);
        assert!(margin >= -1e-6, "stage drift margin {margin}");
    }

    #[test]
    fn try_plays_form_a_suffix() {
        let inst = ProbeInstance::new(
            vec![probe_arm(0.15, 0.08, 1.2, 0.12), probe_arm(0.08, 0.12, 0.9, 0.03)],
            1,
        )
        .unwrap();
        let params = solve_probe(&inst).unwrap();
        for (i, ap) in params.arms.iter().enumerate() {
            if !ap.active {
                continue;
            }
            let d = ap.probe_after_bad;
            let m = ap.try_plays;
            assert!(m <= d);
            for l in 1..=d {
                let positive = reward_cap(&inst, i, false, l, params.penalty) > 0.0;
                assert_eq!(positive, l > d - m, "cap positivity not a suffix at {l}");
            }
        }
    }
}
