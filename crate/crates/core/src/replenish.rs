//! Non-preemptive machine replenishment: the balanced dual solve, the
//! duality-based repair policy, and a Whittle-index baseline for two-state
//! machines.
//!
//! A machine accrues state-dependent reward while active and evolves every
//! step; moving it to the repair queue costs the state's repair charge and
//! suspends it until a geometric repair (capacity `M` machines per step,
//! never interrupted) returns it to its initial active state.

use crate::instance::ReplenishInstance;
use crate::lp::{self, LpError, LpModel, Relation, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOL_EXCESS: f64 = 1e-7;
pub const TOL_SUPPORT: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplenishError {
    #[error("machine {machine} has {states} active states; the Whittle baseline covers only two-state machines")]
    UnsupportedShape { machine: usize, states: usize },
    #[error("machine {machine}: slackness identity `{what}` residual {residual} too large")]
    IdentityViolated {
        machine: usize,
        what: &'static str,
        residual: f64,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowTag {
    /// `lambda + h_i >= s_i phi_rho`; dual = repair occupancy `x_kappa`.
    Repair { machine: usize },
    /// `h_i >= r_u + sum_v p_uv (phi_v - phi_u)`; dual = occupancy `x_u`.
    Active { machine: usize, state: usize },
    /// `phi_u + c_u >= 0`; dual = queue-entry rate `z_u`.
    Queue { machine: usize, state: usize },
    Balance,
}

/// Solved repair-policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplenishParams {
    /// Balanced-dual objective `M lambda + sum h`.
    pub objective: f64,
    pub penalty: f64,
    pub excess: Vec<f64>,
    /// Per-machine, per-state dual potentials (repair-queue potential is 0).
    pub state_potential: Vec<Vec<f64>>,
    /// States that trigger a move to the repair queue.
    pub repair_trigger: Vec<Vec<bool>>,
    /// Stationary occupancy support per state (`x_u`), for reachability
    /// audits.
    pub occupancy: Vec<Vec<f64>>,
    /// Repair occupancy support (`x_kappa`).
    pub repair_occupancy: Vec<f64>,
    pub active: Vec<bool>,
    pub max_cs_residual: f64,
}

/// Build and solve the balanced dual; read the primal supports off the row
/// duals and verify the slackness identities the policy relies on.
pub fn solve_replenish(instance: &ReplenishInstance) -> Result<ReplenishParams, ReplenishError> {
    let n = instance.machines().len();
    let budget = instance.capacity() as f64;
    let mut model = LpModel::new(Sense::Minimize);
    let penalty_var = model.add_var(budget);
    let excess_vars: Vec<usize> = (0..n).map(|_| model.add_var(1.0)).collect();
    let potential_vars: Vec<Vec<usize>> = instance
        .machines()
        .iter()
        .map(|m| m.rewards.iter().map(|_| model.add_free_var(0.0)).collect())
        .collect();
    let mut tags = Vec::new();
    for (i, mac) in instance.machines().iter().enumerate() {
        model.add_row(
            Relation::Ge,
            0.0,
            vec![
                (penalty_var, 1.0),
                (excess_vars[i], 1.0),
                (potential_vars[i][mac.initial_state], -mac.repair_rate),
            ],
        );
        tags.push(RowTag::Repair { machine: i });
        for (u, row) in mac.transitions.iter().enumerate() {
            // h_i + phi_u - sum_v p_uv phi_v >= r_u
            let mut coeffs = vec![(excess_vars[i], 1.0)];
            let mut diag = 1.0;
            for (v, &p) in row.iter().enumerate() {
                if v == u {
                    diag -= p;
                } else if p != 0.0 {
                    coeffs.push((potential_vars[i][v], -p));
                }
            }
            if diag != 0.0 {
                coeffs.push((potential_vars[i][u], diag));
            }
            model.add_row(Relation::Ge, mac.rewards[u], coeffs);
            tags.push(RowTag::Active {
                machine: i,
                state: u,
            });
        }
        for u in 0..mac.num_states() {
            if u == mac.initial_state {
                continue; // repairing a fresh machine is never modeled
            }
            model.add_row(
                Relation::Ge,
                -mac.repair_costs[u],
                vec![(potential_vars[i][u], 1.0)],
            );
            tags.push(RowTag::Queue {
                machine: i,
                state: u,
            });
        }
    }
    let mut balance = vec![(penalty_var, budget)];
    for &h in &excess_vars {
        balance.push((h, -1.0));
    }
    model.add_row(Relation::Eq, 0.0, balance);
    tags.push(RowTag::Balance);

    let sol = lp::lp_solve_auto(&model, lp::TOL_LP)?;
    let penalty = sol.primal[penalty_var];
    let excess: Vec<f64> = excess_vars.iter().map(|&v| sol.primal[v]).collect();
    let state_potential: Vec<Vec<f64>> = potential_vars
        .iter()
        .map(|vs| vs.iter().map(|&v| sol.primal[v]).collect())
        .collect();
    let active: Vec<bool> = excess.iter().map(|&h| h > TOL_EXCESS).collect();
    let mut repair_trigger: Vec<Vec<bool>> = instance
        .machines()
        .iter()
        .map(|m| vec![false; m.num_states()])
        .collect();
    let mut occupancy: Vec<Vec<f64>> = instance
        .machines()
        .iter()
        .map(|m| vec![0.0; m.num_states()])
        .collect();
    let mut repair_occupancy = vec![0.0; n];
    for (row, tag) in tags.iter().enumerate() {
        match *tag {
            RowTag::Queue { machine, state } => {
                if active[machine] && sol.dual[row] > TOL_SUPPORT {
                    repair_trigger[machine][state] = true;
                }
            }
            RowTag::Active { machine, state } => occupancy[machine][state] = sol.dual[row],
            RowTag::Repair { machine } => repair_occupancy[machine] = sol.dual[row],
            RowTag::Balance => {}
        }
    }
    // Slackness identities behind the drift certificate.
    for (row, tag) in tags.iter().enumerate() {
        let slack = model.row_activity(row, &sol.primal) - model.rows()[row].rhs;
        let (support, what, machine) = match *tag {
            RowTag::Repair { machine } => (repair_occupancy[machine], "repair rate", machine),
            RowTag::Active { machine, state } => {
                (occupancy[machine][state], "occupancy", machine)
            }
            RowTag::Queue { machine, state } => (
                if repair_trigger[machine][state] {
                    sol.dual[row]
                } else {
                    0.0
                },
                "queue entry",
                machine,
            ),
            RowTag::Balance => continue,
        };
        if support > TOL_SUPPORT && slack.abs() > 1e-6 * (1.0 + model.rows()[row].rhs.abs()) {
            return Err(ReplenishError::IdentityViolated {
                machine,
                what,
                residual: slack.abs(),
            });
        }
    }
    let report = lp::check_complementary_slackness(&model, &sol, lp::TOL_CS);
    Ok(ReplenishParams {
        objective: sol.objective,
        penalty,
        excess,
        state_potential,
        repair_trigger,
        occupancy,
        repair_occupancy,
        active,
        max_cs_residual: report.max_product,
    })
}

/// Whittle repair index of a two-state machine: `eta = s r / p` for the
/// broken state (never repair from the good state). Errors for machines
/// with more than two active states.
pub fn whittle_repair_index(
    instance: &ReplenishInstance,
    machine: usize,
) -> Result<f64, ReplenishError> {
    let mac = &instance.machines()[machine];
    if mac.num_states() != 2 {
        return Err(ReplenishError::UnsupportedShape {
            machine,
            states: mac.num_states(),
        });
    }
    let good = mac.initial_state;
    let broken = 1 - good;
    let p_break = mac.transitions[good][broken];
    if p_break <= 0.0 {
        return Ok(0.0);
    }
    Ok(mac.repair_rate * mac.rewards[good] / p_break)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{generate, GalleryId, GalleryInstance};
    use crate::instance::Machine;

    fn two_state(reward: f64, p_break: f64, repair_rate: f64, cost: f64) -> Machine {
        Machine {
            rewards: vec![reward, 0.0],
            repair_costs: vec![0.0, cost],
            transitions: vec![vec![1.0 - p_break, p_break], vec![0.0, 1.0]],
            repair_rate,
            initial_state: 0,
        }
    }

    #[test]
    fn single_machine_repairs_in_the_dead_state() {
        for s in [0.2, 0.5, 1.0] {
            let inst =
                ReplenishInstance::new(vec![two_state(1.0, 0.3, s, 0.0)], 1).unwrap();
            let params = solve_replenish(&inst).unwrap();
            assert!(params.active[0]);
            assert!(params.repair_trigger[0][1], "broken state not flagged at s={s}");
            assert!(!params.repair_trigger[0][0]);
        }
    }

    #[test]
    fn equal_rewards_never_repair() {
        let mac = Machine {
            rewards: vec![1.0, 1.0],
            repair_costs: vec![0.0, 0.0],
            transitions: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            repair_rate: 0.5,
            initial_state: 0,
        };
        let inst = ReplenishInstance::new(vec![mac], 1).unwrap();
        let params = solve_replenish(&inst).unwrap();
        assert!(params.repair_trigger[0].iter().all(|&z| !z));
        // balance pins lambda = h = 1, twice the constant reward stream
        assert!((params.objective - 2.0).abs() < 1e-7);
        assert!((params.penalty - 1.0).abs() < 1e-7);
    }

    #[test]
    fn symmetric_machines_get_equal_excess() {
        let m = two_state(1.0, 0.25, 0.8, 0.1);
        let inst = ReplenishInstance::new(vec![m.clone(), m], 1).unwrap();
        let params = solve_replenish(&inst).unwrap();
        assert!((params.excess[0] - params.excess[1]).abs() < 1e-8);
    }

    #[test]
    fn gap_instance_ignores_the_sluggish_machine() {
        let GalleryInstance::Replenish(inst) = generate(&GalleryId::ReplenishGap { n: 10 }).unwrap()
        else {
            panic!()
        };
        let params = solve_replenish(&inst).unwrap();
        // The duality policy must not repair machine 0, whose repair takes
        // n^4 steps and would block the shared repair capacity.
        assert!(
            !params.repair_trigger[0].iter().any(|&z| z),
            "sluggish machine flagged for repair"
        );
        assert!(params.repair_trigger[1][1]);
        let eta0 = whittle_repair_index(&inst, 0).unwrap();
        let eta1 = whittle_repair_index(&inst, 1).unwrap();
        assert!(eta0 > 0.0 && eta1 > eta0);
    }
}
