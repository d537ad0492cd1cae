//! Monotone-bandit solver: builds and solves the balance LP (base,
//! multi-play/durations, and switching-cost variants), extracts policy
//! parameters through complementary slackness, and implements the induced
//! index policies.
//!
//! The balance LP is the per-arm dual of the natural relaxation with one
//! extra equality tying the play penalty to the total excess reward. Its
//! optimal solution yields, for every arm with positive excess, a tight
//! waiting time per state and a partition into exploit states (negative
//! expected potential change) and explore states.

use crate::instance::{MonotoneArm, MonotoneInstance, MonotoneVariant};
use crate::linalg;
use crate::lp::{self, LpError, LpModel, LpSolution, Relation, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOL_EXCESS: f64 = 1e-7;
pub const TOL_TIGHT: f64 = 1e-6;
pub const TOL_TRIVIAL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonotoneError {
    #[error("variant mismatch: {0}")]
    VariantMismatch(String),
    #[error("arm {arm} state {state}: excess {excess} positive but no tight constraint and no trivial-play certificate")]
    NoTightConstraint {
        arm: usize,
        state: usize,
        excess: f64,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Which dual constraint family a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowFamily {
    /// `lambda + t h >= r + f dP` (base/multiplay shape, or the
    /// switched-in family carrying the switch costs).
    Linear,
    /// `t (lambda + h) >= r + f dP` (same-arm family of the switching dual).
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowTag {
    Constraint {
        arm: usize,
        state: usize,
        wait: u64,
        family: RowFamily,
    },
    Balance,
}

/// The balance LP together with the variable and row layout needed to read
/// the solution back.
#[derive(Debug, Clone)]
pub struct BalanceLp {
    pub model: LpModel,
    pub variant: MonotoneVariant,
    pub penalty_var: usize,
    pub excess_vars: Vec<usize>,
    pub potential_vars: Vec<Vec<usize>>,
    pub row_tags: Vec<RowTag>,
}

fn check_variant(
    instance: &MonotoneInstance,
    variant: MonotoneVariant,
) -> Result<(), MonotoneError> {
    match variant {
        MonotoneVariant::Base => {
            if instance.play_budget() != 1 {
                return Err(MonotoneError::VariantMismatch(
                    "base variant requires a play budget of 1".into(),
                ));
            }
            if instance.has_durations() {
                return Err(MonotoneError::VariantMismatch(
                    "base variant requires unit durations (use the multi-play variant)".into(),
                ));
            }
            if instance.has_switch_costs() {
                return Err(MonotoneError::VariantMismatch(
                    "base variant cannot carry switch costs".into(),
                ));
            }
        }
        MonotoneVariant::MultiPlay => {
            if instance.has_switch_costs() {
                return Err(MonotoneError::VariantMismatch(
                    "switch costs cannot be combined with blocking plays".into(),
                ));
            }
        }
        MonotoneVariant::Switching => {
            if instance.play_budget() != 1 {
                return Err(MonotoneError::VariantMismatch(
                    "switching variant requires a play budget of 1".into(),
                ));
            }
            if instance.has_durations() {
                return Err(MonotoneError::VariantMismatch(
                    "switching costs with non-unit durations are not supported".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Expansion of `-f(t) dP_k` into potential-variable coefficients:
/// `+ f S_k p_k - f sum_j q_kj p_j` with `S_k` the total escape mass.
fn potential_coeffs(
    arm: &MonotoneArm,
    state: usize,
    f_t: f64,
    vars: &[usize],
    out: &mut Vec<(usize, f64)>,
) {
    let total: f64 = arm.q[state].iter().sum();
    if f_t == 0.0 || total == 0.0 {
        return;
    }
    out.push((vars[state], f_t * total));
    for (j, &qkj) in arm.q[state].iter().enumerate() {
        if qkj > 0.0 {
            out.push((vars[j], -f_t * qkj));
        }
    }
}

/// Build the balance LP for the requested variant: variables are the play
/// penalty, per-arm excess rewards, and per-state potentials; one
/// constraint per (arm, state, breakpoint wait), plus the balance equality
/// `budget * penalty = sum of excesses`.
pub fn build_balance_lp(
    instance: &MonotoneInstance,
    variant: MonotoneVariant,
) -> Result<BalanceLp, MonotoneError> {
    check_variant(instance, variant)?;
    let budget = match variant {
        MonotoneVariant::MultiPlay => instance.play_budget() as f64,
        _ => 1.0,
    };
    let mut model = LpModel::new(Sense::Minimize);
    let penalty_var = model.add_var(budget);
    let excess_vars: Vec<usize> = instance.arms().iter().map(|_| model.add_var(1.0)).collect();
    let potential_vars: Vec<Vec<usize>> = instance
        .arms()
        .iter()
        .map(|a| a.states.iter().map(|_| model.add_free_var(0.0)).collect())
        .collect();
    let mut row_tags = Vec::new();
    for (i, arm) in instance.arms().iter().enumerate() {
        for (k, st) in arm.states.iter().enumerate() {
            for t in st.escape.times() {
                let f_t = st.escape.eval(t);
                match variant {
                    MonotoneVariant::Base | MonotoneVariant::MultiPlay => {
                        let dur = st.duration as f64;
                        let mut coeffs = vec![
                            (penalty_var, dur),
                            (excess_vars[i], dur + t as f64 - 1.0),
                        ];
                        potential_coeffs(arm, k, f_t, &potential_vars[i], &mut coeffs);
                        model.add_row(Relation::Ge, st.reward, coeffs);
                        row_tags.push(RowTag::Constraint {
                            arm: i,
                            state: k,
                            wait: t,
                            family: RowFamily::Linear,
                        });
                    }
                    MonotoneVariant::Switching => {
                        let cost = instance.switch_out()[i] + instance.switch_in()[i];
                        let mut coeffs = vec![(penalty_var, 1.0), (excess_vars[i], t as f64)];
                        potential_coeffs(arm, k, f_t, &potential_vars[i], &mut coeffs);
                        model.add_row(Relation::Ge, st.reward - cost, coeffs);
                        row_tags.push(RowTag::Constraint {
                            arm: i,
                            state: k,
                            wait: t,
                            family: RowFamily::Linear,
                        });
                        let mut coeffs = vec![(penalty_var, t as f64), (excess_vars[i], t as f64)];
                        potential_coeffs(arm, k, f_t, &potential_vars[i], &mut coeffs);
                        model.add_row(Relation::Ge, st.reward, coeffs);
                        row_tags.push(RowTag::Constraint {
                            arm: i,
                            state: k,
                            wait: t,
                            family: RowFamily::Proportional,
                        });
                    }
                }
            }
        }
    }
    let mut balance = vec![(penalty_var, budget)];
    for &h in &excess_vars {
        balance.push((h, -1.0));
    }
    model.add_row(Relation::Eq, 0.0, balance);
    row_tags.push(RowTag::Balance);
    Ok(BalanceLp {
        model,
        variant,
        penalty_var,
        excess_vars,
        potential_vars,
        row_tags,
    })
}

/// Truncated per-arm LP relaxation (the upper-bound side): play
/// probabilities per (arm, state, breakpoint wait), a global budget row,
/// per-arm occupancy rows, and per-state flow balance.
pub fn whittle_lp_model(
    instance: &MonotoneInstance,
    variant: MonotoneVariant,
) -> Result<LpModel, MonotoneError> {
    check_variant(instance, variant)?;
    if variant == MonotoneVariant::Switching {
        return Err(MonotoneError::VariantMismatch(
            "the switching relaxation carries its own cost terms; compare against the balance objective instead".into(),
        ));
    }
    let budget = instance.play_budget() as f64;
    let mut model = LpModel::new(Sense::Maximize);
    let mut vars: Vec<Vec<Vec<usize>>> = Vec::new();
    for arm in instance.arms() {
        let mut per_state = Vec::new();
        for st in &arm.states {
            let ids: Vec<usize> = st.escape.times().map(|_| model.add_var(st.reward)).collect();
            per_state.push(ids);
        }
        vars.push(per_state);
    }
    let mut global = Vec::new();
    for (i, arm) in instance.arms().iter().enumerate() {
        for (k, st) in arm.states.iter().enumerate() {
            for &v in &vars[i][k] {
                global.push((v, st.duration as f64));
            }
        }
    }
    model.add_row(Relation::Le, budget, global);
    for (i, arm) in instance.arms().iter().enumerate() {
        let mut occupancy = Vec::new();
        for (k, st) in arm.states.iter().enumerate() {
            for (ti, t) in st.escape.times().enumerate() {
                occupancy.push((vars[i][k][ti], (t + st.duration - 1) as f64));
            }
        }
        model.add_row(Relation::Le, 1.0, occupancy);
        for k in 0..arm.states.len() {
            let mut flow = Vec::new();
            let out_mass: f64 = arm.q[k].iter().sum();
            for (ti, t) in arm.states[k].escape.times().enumerate() {
                let f_t = arm.states[k].escape.eval(t);
                if f_t * out_mass != 0.0 {
                    flow.push((vars[i][k][ti], f_t * out_mass));
                }
            }
            for (j, stj) in arm.states.iter().enumerate() {
                if j == k || arm.q[j][k] == 0.0 {
                    continue;
                }
                for (ti, t) in stj.escape.times().enumerate() {
                    let f_t = stj.escape.eval(t);
                    if f_t != 0.0 {
                        flow.push((vars[i][j][ti], -arm.q[j][k] * f_t));
                    }
                }
            }
            if !flow.is_empty() {
                model.add_row(Relation::Eq, 0.0, flow);
            }
        }
    }
    Ok(model)
}

/// Extracted parameters of the balanced dual optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSolution {
    pub variant: MonotoneVariant,
    /// Objective of the balance LP (`budget * penalty + sum excess`).
    pub objective: f64,
    pub penalty: f64,
    /// Per-arm excess reward `h_i`.
    pub excess: Vec<f64>,
    /// Per-arm, per-state dual potentials.
    pub potentials: Vec<Vec<f64>>,
    /// Per-arm, per-state expected potential change on escape.
    pub potential_change: Vec<Vec<f64>>,
    /// Per-arm, per-state tight wait (smallest breakpoint with a tight
    /// constraint); `None` below the excess threshold or for trivially
    /// played arms.
    pub tight_wait: Vec<Vec<Option<u64>>>,
    /// Exploit membership: negative potential change (for switching, the
    /// proportional family is the one that is tight).
    pub exploit: Vec<Vec<bool>>,
    /// Arms whose always-play value reaches `penalty + excess`; the policy
    /// plays them continuously. The value of the best closed class is kept.
    pub trivially_played: Vec<Option<f64>>,
    /// Preferred start state per arm (best closed class for trivially
    /// played arms, state 0 otherwise).
    pub start_state: Vec<usize>,
    /// `excess > TOL_EXCESS`.
    pub active: Vec<bool>,
    pub max_cs_residual: f64,
}

impl BalanceSolution {
    pub fn is_ready(&self, arm: usize, state: usize, waited: u64) -> bool {
        match self.tight_wait[arm][state] {
            Some(t) => waited >= t,
            None => false,
        }
    }
}

/// Long-run per-step reward of always playing the arm immediately
/// (semi-Markov over states with sojourn `L_k` and jump probabilities
/// `f_k(1) q(k, j)`), maximized over closed communicating classes; the
/// policy may pick the start state.
pub fn always_play_value(arm: &MonotoneArm) -> f64 {
    let n = arm.num_states();
    let p: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let f1 = arm.states[k].escape.eval(1);
            let mut row: Vec<f64> = arm.q[k].iter().map(|&q| f1 * q).collect();
            let off: f64 = row.iter().sum();
            row[k] = 1.0 - off;
            row
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    for class in closed_classes(&p) {
        let sub: Vec<Vec<f64>> = class
            .iter()
            .map(|&a| class.iter().map(|&b| p[a][b]).collect())
            .collect();
        let Some(pi) = linalg::stationary_dense(&sub) else {
            continue;
        };
        let mut reward = 0.0;
        let mut time = 0.0;
        for (idx, &k) in class.iter().enumerate() {
            reward += pi[idx] * arm.states[k].reward;
            time += pi[idx] * arm.states[k].duration as f64;
        }
        if time > 0.0 {
            best = best.max(reward / time);
        }
    }
    best
}

/// Closed communicating classes of a stochastic matrix (Kosaraju SCCs with
/// no outgoing edges).
fn closed_classes(p: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = p.len();
    let edge = |a: usize, b: usize| a != b && p[a][b] > 1e-15;
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        // Iterative post-order DFS.
        let mut stack = vec![(s, 0usize)];
        seen[s] = true;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let mut advanced = false;
            while *next < n {
                let w = *next;
                *next += 1;
                if edge(v, w) && !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = ncomp;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                if edge(w, v) && comp[w] == usize::MAX {
                    comp[w] = ncomp;
                    stack.push(w);
                }
            }
        }
        ncomp += 1;
    }
    let mut closed = vec![true; ncomp];
    for a in 0..n {
        for b in 0..n {
            if edge(a, b) && comp[a] != comp[b] {
                closed[comp[a]] = false;
            }
        }
    }
    (0..ncomp)
        .map(|c| (0..n).filter(|&v| comp[v] == c).collect::<Vec<_>>())
        .filter(|class: &Vec<usize>| closed[comp[class[0]]])
        .collect()
}

fn best_closed_start(arm: &MonotoneArm) -> usize {
    let n = arm.num_states();
    let p: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let f1 = arm.states[k].escape.eval(1);
            let mut row: Vec<f64> = arm.q[k].iter().map(|&q| f1 * q).collect();
            let off: f64 = row.iter().sum();
            row[k] = 1.0 - off;
            row
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for class in closed_classes(&p) {
        let sub: Vec<Vec<f64>> = class
            .iter()
            .map(|&a| class.iter().map(|&b| p[a][b]).collect())
            .collect();
        let Some(pi) = linalg::stationary_dense(&sub) else {
            continue;
        };
        let mut reward = 0.0;
        let mut time = 0.0;
        for (idx, &k) in class.iter().enumerate() {
            reward += pi[idx] * arm.states[k].reward;
            time += pi[idx] * arm.states[k].duration as f64;
        }
        let value = if time > 0.0 { reward / time } else { f64::NEG_INFINITY };
        if value > best.0 {
            best = (value, class[0]);
        }
    }
    best.1
}

/// Solve the balance LP and extract the policy parameters through
/// complementary slackness.
pub fn solve_balance(
    instance: &MonotoneInstance,
    variant: MonotoneVariant,
) -> Result<BalanceSolution, MonotoneError> {
    let lp = build_balance_lp(instance, variant)?;
    let sol = lp::lp_solve_auto(&lp.model, lp::TOL_LP)?;
    extract_policy_params(instance, &lp, &sol)
}

/// Extraction per se: classification needs the optimal dual structure, so
/// the solution must carry slackness residuals at solver scale.
pub fn extract_policy_params(
    instance: &MonotoneInstance,
    lp: &BalanceLp,
    sol: &LpSolution,
) -> Result<BalanceSolution, MonotoneError> {
    let n = instance.arms().len();
    let penalty = sol.primal[lp.penalty_var];
    let excess: Vec<f64> = lp.excess_vars.iter().map(|&v| sol.primal[v]).collect();
    let potentials: Vec<Vec<f64>> = lp
        .potential_vars
        .iter()
        .map(|vs| vs.iter().map(|&v| sol.primal[v]).collect())
        .collect();
    let mut potential_change = Vec::with_capacity(n);
    for (i, arm) in instance.arms().iter().enumerate() {
        let p = &potentials[i];
        let dp: Vec<f64> = (0..arm.num_states())
            .map(|k| {
                arm.q[k]
                    .iter()
                    .enumerate()
                    .map(|(j, &q)| q * (p[j] - p[k]))
                    .sum()
            })
            .collect();
        potential_change.push(dp);
    }
    let active: Vec<bool> = excess.iter().map(|&h| h > TOL_EXCESS).collect();

    // Tight waits per (arm, state): smallest breakpoint with zero slack.
    // For switching, remember which family went tight first.
    let mut tight_wait: Vec<Vec<Option<u64>>> = instance
        .arms()
        .iter()
        .map(|a| vec![None; a.num_states()])
        .collect();
    let mut tight_family: Vec<Vec<Option<RowFamily>>> = instance
        .arms()
        .iter()
        .map(|a| vec![None; a.num_states()])
        .collect();
    for (row, tag) in lp.row_tags.iter().enumerate() {
        let RowTag::Constraint {
            arm,
            state,
            wait,
            family,
        } = *tag
        else {
            continue;
        };
        if !active[arm] {
            continue;
        }
        let slack = lp.model.row_activity(row, &sol.primal) - lp.model.rows()[row].rhs;
        let tol = TOL_TIGHT * (1.0 + lp.model.rows()[row].rhs.abs());
        if slack.abs() <= tol {
            let better = match tight_wait[arm][state] {
                None => true,
                Some(existing) => {
                    wait < existing
                        || (wait == existing
                            && family == RowFamily::Proportional
                            && tight_family[arm][state] == Some(RowFamily::Linear))
                }
            };
            if better {
                tight_wait[arm][state] = Some(wait);
                tight_family[arm][state] = Some(family);
            }
        }
    }

    // Trivial continuous-play detection.
    let mut trivially_played = vec![None; n];
    let mut start_state = vec![0usize; n];
    for (i, arm) in instance.arms().iter().enumerate() {
        if !active[i] {
            continue;
        }
        let value = always_play_value(arm);
        if value >= penalty + excess[i] - TOL_TRIVIAL * (1.0 + penalty.abs()) {
            trivially_played[i] = Some(value);
            start_state[i] = best_closed_start(arm);
        }
    }

    // Exploit classification and tightness guarantee.
    let mut exploit: Vec<Vec<bool>> = Vec::with_capacity(n);
    for (i, arm) in instance.arms().iter().enumerate() {
        let mut flags = vec![false; arm.num_states()];
        if active[i] && trivially_played[i].is_none() {
            for k in 0..arm.num_states() {
                if tight_wait[i][k].is_none() {
                    return Err(MonotoneError::NoTightConstraint {
                        arm: i,
                        state: k,
                        excess: excess[i],
                    });
                }
                flags[k] = match lp.variant {
                    MonotoneVariant::Switching => {
                        tight_family[i][k] == Some(RowFamily::Proportional)
                    }
                    _ => potential_change[i][k] < -lp::TOL_CS,
                };
            }
        }
        exploit.push(flags);
    }
    // Non-trivial arms start in an explore state so the policy's invariant
    // (exploit states are entered only through plays) holds from the first
    // step. An explore state always exists: the minimum-potential state has
    // a non-negative expected potential change.
    for (i, flags) in exploit.iter().enumerate() {
        if active[i] && trivially_played[i].is_none() {
            start_state[i] = flags.iter().position(|&g| !g).unwrap_or(0);
        }
    }
    let report = lp::check_complementary_slackness(&lp.model, sol, lp::TOL_CS);
    Ok(BalanceSolution {
        variant: lp.variant,
        objective: sol.objective,
        penalty,
        excess,
        potentials,
        potential_change,
        tight_wait,
        exploit,
        trivially_played,
        start_state,
        active,
        max_cs_residual: report.max_product,
    })
}

/// View of one arm the policy decides over.
#[derive(Debug, Clone, Copy)]
pub struct ArmView {
    pub state: usize,
    /// Steps since the last play of this arm ended (or since the start).
    pub waited: u64,
    /// A player is currently occupying this arm (blocking play in flight).
    pub busy: bool,
}

/// Decision rule shared by the base and switching variants (one player).
/// For the base variant `current` is ignored.
pub fn choose_single_play(
    params: &BalanceSolution,
    views: &[ArmView],
    current: Option<usize>,
) -> Option<usize> {
    // A trivially played arm is played unconditionally (best value first).
    if let Some(i) = best_trivial(params) {
        return Some(i);
    }
    match params.variant {
        MonotoneVariant::Switching => {
            if let Some(c) = current {
                if params.active[c] && params.exploit[c][views[c].state] {
                    let wait = params.tight_wait[c][views[c].state].unwrap_or(1);
                    // Hold the player on the arm until its wait matures.
                    return if views[c].waited >= wait { Some(c) } else { None };
                }
            }
            ready_arm(params, views)
        }
        _ => {
            for (i, view) in views.iter().enumerate() {
                if params.active[i] && params.exploit[i][view.state] {
                    return Some(i);
                }
            }
            ready_arm(params, views)
        }
    }
}

fn best_trivial(params: &BalanceSolution) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, t) in params.trivially_played.iter().enumerate() {
        if let Some(v) = t {
            if best.map_or(true, |(bv, _)| *v > bv) {
                best = Some((*v, i));
            }
        }
    }
    best.map(|(_, i)| i)
}

fn ready_arm(params: &BalanceSolution, views: &[ArmView]) -> Option<usize> {
    views.iter().enumerate().find_map(|(i, view)| {
        (params.active[i]
            && !view.busy
            && !params.exploit[i][view.state]
            && params.is_ready(i, view.state, view.waited))
        .then_some(i)
    })
}

/// Multi-play decision: fill `free_players` slots with (in order) trivially
/// played arms, exploit-state arms, then ready arms, skipping arms already
/// being played. Returns the arms to start this step.
pub fn choose_multi_play(
    params: &BalanceSolution,
    views: &[ArmView],
    free_players: usize,
) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut slots = free_players;
    let mut taken = vec![false; views.len()];
    let mut grab = |pred: &dyn Fn(usize, &ArmView) -> bool,
                    starts: &mut Vec<usize>,
                    taken: &mut Vec<bool>,
                    slots: &mut usize| {
        for (i, view) in views.iter().enumerate() {
            if *slots == 0 {
                break;
            }
            if view.busy || taken[i] || !params.active[i] {
                continue;
            }
            if pred(i, view) {
                starts.push(i);
                taken[i] = true;
                *slots -= 1;
            }
        }
    };
    grab(
        &|i, _| params.trivially_played[i].is_some(),
        &mut starts,
        &mut taken,
        &mut slots,
    );
    grab(
        &|i, v: &ArmView| params.trivially_played[i].is_none() && params.exploit[i][v.state],
        &mut starts,
        &mut taken,
        &mut slots,
    );
    grab(
        &|i, v: &ArmView| {
            params.trivially_played[i].is_none()
                && !params.exploit[i][v.state]
                && params.is_ready(i, v.state, v.waited)
        },
        &mut starts,
        &mut taken,
        &mut slots,
    );
    starts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::MonotoneState;
    use crate::pwl::PiecewiseLinearMonotone;

    fn pwl(points: Vec<(u64, f64)>) -> PiecewiseLinearMonotone {
        PiecewiseLinearMonotone::new(points).unwrap()
    }

    fn two_state(reward: f64, f_good: Vec<(u64, f64)>, f_bad: Vec<(u64, f64)>) -> MonotoneArm {
        MonotoneArm {
            states: vec![
                MonotoneState {
                    reward,
                    duration: 1,
                    escape: pwl(f_good),
                },
                MonotoneState {
                    reward: 0.0,
                    duration: 1,
                    escape: pwl(f_bad),
                },
            ],
            q: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        }
    }

    #[test]
    fn stochastic_mab_collapse() {
        // f = 1 everywhere: the dual constraint is dominated by t = 1 and
        // the instance behaves like a stochastic bandit.
        let arm = two_state(1.0, vec![(1, 1.0)], vec![(1, 1.0)]);
        let inst = MonotoneInstance::new(vec![arm], 1, vec![], vec![]).unwrap();
        let sol = solve_balance(&inst, MonotoneVariant::Base).unwrap();
        assert!(sol.penalty > 0.0);
        assert!((sol.penalty - sol.excess.iter().sum::<f64>()).abs() < 1e-8);
        // alternating good/bad states, reward 1 on good: always-play nets 1/2
        assert!(sol.trivially_played[0].is_some());
        assert!((sol.trivially_played[0].unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn frozen_state_forces_trivial_play() {
        // f(1) = 0 on the rewarding state: play keeps the arm there, so
        // always-play earns the full reward and the LP pins lambda + h = r.
        let arm = two_state(2.0, vec![(1, 0.0), (4, 0.0)], vec![(1, 0.5)]);
        let inst = MonotoneInstance::new(vec![arm], 1, vec![], vec![]).unwrap();
        let sol = solve_balance(&inst, MonotoneVariant::Base).unwrap();
        let i = 0;
        assert!(sol.trivially_played[i].is_some());
        let lam_h = sol.penalty + sol.excess[i];
        assert!((lam_h - 2.0).abs() < 1e-7, "lambda + h = {lam_h}");
        assert_eq!(sol.start_state[i], 0);
    }

    #[test]
    fn negative_potential_change_is_tight_at_one() {
        let arm = two_state(1.5, vec![(1, 0.3), (6, 0.9)], vec![(1, 0.05), (9, 0.85)]);
        let inst = MonotoneInstance::new(vec![arm.clone(), arm], 1, vec![], vec![]).unwrap();
        let sol = solve_balance(&inst, MonotoneVariant::Base).unwrap();
        for i in 0..2 {
            if !sol.active[i] || sol.trivially_played[i].is_some() {
                continue;
            }
            for k in 0..2 {
                if sol.potential_change[i][k] < -lp::TOL_CS {
                    assert_eq!(sol.tight_wait[i][k], Some(1));
                    assert!(sol.exploit[i][k]);
                }
            }
        }
    }

    #[test]
    fn balance_objective_dominates_whittle_lp() {
        let arm = two_state(1.0, vec![(1, 0.2), (5, 0.7)], vec![(1, 0.1), (7, 0.6)]);
        let other = two_state(0.8, vec![(1, 0.4), (3, 0.8)], vec![(1, 0.2), (6, 0.9)]);
        let inst = MonotoneInstance::new(vec![arm, other], 1, vec![], vec![]).unwrap();
        let sol = solve_balance(&inst, MonotoneVariant::Base).unwrap();
        let relax = whittle_lp_model(&inst, MonotoneVariant::Base).unwrap();
        let opt = lp::lp_solve(&relax, lp::TOL_LP).unwrap().objective;
        assert!(
            sol.objective >= opt - 1e-7,
            "balance {} below relaxation {}",
            sol.objective,
            opt
        );
    }

    #[test]
    fn variant_mismatch_rejected() {
        let arm = two_state(1.0, vec![(1, 0.5)], vec![(1, 0.5)]);
        let switching =
            MonotoneInstance::new(vec![arm.clone()], 1, vec![1.0], vec![0.0]).unwrap();
        assert!(matches!(
            build_balance_lp(&switching, MonotoneVariant::Base),
            Err(MonotoneError::VariantMismatch(_))
        ));
        assert!(matches!(
            build_balance_lp(&switching, MonotoneVariant::MultiPlay),
            Err(MonotoneError::VariantMismatch(_))
        ));
        let mut blocked = arm;
        blocked.states[0].duration = 3;
        let multi = MonotoneInstance::new(vec![blocked], 2, vec![], vec![]).unwrap();
        assert!(build_balance_lp(&multi, MonotoneVariant::MultiPlay).is_ok());
        assert!(matches!(
            build_balance_lp(&multi, MonotoneVariant::Base),
            Err(MonotoneError::VariantMismatch(_))
        ));
    }
}
