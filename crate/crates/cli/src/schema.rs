//! Instance file schema: JSON documents mirroring the core types
//! field-for-field, re-validated through the core constructors on load.

use restless_core::belief::{DomainError, FeedbackArm, FeedbackInstance};
use restless_core::instance::{
    InstanceError, Machine, MonotoneArm, MonotoneInstance, MonotoneState, ProbeArm,
    ProbeInstance, ReplenishInstance,
};
use restless_core::pwl::{PiecewiseLinearMonotone, PwlError};
use restless_core::DEFAULT_DELTA;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {err}")]
    Domain { path: String, err: DomainError },
    #[error("{path}: {err}")]
    Instance { path: String, err: InstanceError },
    #[error("{path}: {err}")]
    Pwl { path: String, err: PwlError },
    #[error("{0}")]
    Shape(String),
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_budget() -> u64 {
    1
}

/// Top-level instance document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceFile {
    Feedback {
        #[serde(default = "default_delta")]
        delta: f64,
        arms: Vec<FeedbackArmFile>,
    },
    Monotone {
        #[serde(default = "default_budget")]
        m: u64,
        arms: Vec<MonotoneArmFile>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        switch_out: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        switch_in: Vec<f64>,
    },
    Probe {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_budget")]
        m: u64,
        arms: Vec<ProbeArmFile>,
    },
    Replenish {
        #[serde(default = "default_budget")]
        m: u64,
        machines: Vec<MachineFile>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FeedbackArmFile {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProbeArmFile {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub probe_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MonotoneArmFile {
    pub states: Vec<MonotoneStateFile>,
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MonotoneStateFile {
    pub r: f64,
    #[serde(default = "default_budget")]
    pub duration: u64,
    pub f_breakpoints: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MachineFile {
    pub rewards: Vec<f64>,
    pub repair_costs: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub s: f64,
    pub initial: usize,
}

/// A loaded, validated instance.
#[derive(Debug, Clone)]
pub enum LoadedInstance {
    Feedback(FeedbackInstance),
    Monotone(MonotoneInstance),
    Probe(ProbeInstance),
    Replenish(ReplenishInstance),
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    /// Re-check every core invariant and build the domain types.
    pub fn load(&self) -> Result<LoadedInstance, SchemaError> {
        match self {
            InstanceFile::Feedback { delta, arms } => {
                let mut built = Vec::with_capacity(arms.len());
                for (i, a) in arms.iter().enumerate() {
                    built.push(FeedbackArm::new(a.alpha, a.beta, a.r, *delta).map_err(
                        |err| SchemaError::Domain {
                            path: format!("arms[{i}]"),
                            err,
                        },
                    )?);
                }
                let inst = FeedbackInstance::new(built, *delta).map_err(|err| {
                    SchemaError::Domain {
                        path: "arms".into(),
                        err,
                    }
                })?;
                Ok(LoadedInstance::Feedback(inst))
            }
            InstanceFile::Monotone {
                m,
                arms,
                switch_out,
                switch_in,
            } => {
                let mut built = Vec::with_capacity(arms.len());
                for (i, a) in arms.iter().enumerate() {
                    let mut states = Vec::with_capacity(a.states.len());
                    for (k, st) in a.states.iter().enumerate() {
                        let escape = PiecewiseLinearMonotone::new(st.f_breakpoints.clone())
                            .map_err(|err| SchemaError::Pwl {
                                path: format!("arms[{i}].states[{k}].f_breakpoints"),
                                err,
                            })?;
                        states.push(MonotoneState {
                            reward: st.r,
                            duration: st.duration,
                            escape,
                        });
                    }
                    built.push(MonotoneArm {
                        states,
                        q: a.q.clone(),
                    });
                }
                let inst = MonotoneInstance::new(
                    built,
                    *m,
                    switch_out.clone(),
                    switch_in.clone(),
                )
                .map_err(|err| SchemaError::Instance {
                    path: "arms".into(),
                    err,
                })?;
                Ok(LoadedInstance::Monotone(inst))
            }
            InstanceFile::Probe { delta, m, arms } => {
                let mut built = Vec::with_capacity(arms.len());
                for (i, a) in arms.iter().enumerate() {
                    let arm = FeedbackArm::new(a.alpha, a.beta, a.r, *delta).map_err(|err| {
                        SchemaError::Domain {
                            path: format!("arms[{i}]"),
                            err,
                        }
                    })?;
                    built.push(ProbeArm {
                        arm,
                        probe_cost: a.probe_cost,
                    });
                }
                let inst = ProbeInstance::new(built, *m).map_err(|err| SchemaError::Instance {
                    path: "arms".into(),
                    err,
                })?;
                Ok(LoadedInstance::Probe(inst))
            }
            InstanceFile::Replenish { m, machines } => {
                let built: Vec<Machine> = machines
                    .iter()
                    .map(|mf| Machine {
                        rewards: mf.rewards.clone(),
                        repair_costs: mf.repair_costs.clone(),
                        transitions: mf.p.clone(),
                        repair_rate: mf.s,
                        initial_state: mf.initial,
                    })
                    .collect();
                let inst =
                    ReplenishInstance::new(built, *m).map_err(|err| SchemaError::Instance {
                        path: "machines".into(),
                        err,
                    })?;
                Ok(LoadedInstance::Replenish(inst))
            }
        }
    }

    /// Mirror a validated feedback instance back into file form.
    pub fn from_feedback(inst: &FeedbackInstance) -> Self {
        InstanceFile::Feedback {
            delta: inst.delta(),
            arms: inst
                .arms()
                .iter()
                .map(|a| FeedbackArmFile {
                    alpha: a.alpha(),
                    beta: a.beta(),
                    r: a.reward(),
                })
                .collect(),
        }
    }

    pub fn from_replenish(inst: &ReplenishInstance) -> Self {
        InstanceFile::Replenish {
            m: inst.capacity(),
            machines: inst
                .machines()
                .iter()
                .map(|mac| MachineFile {
                    rewards: mac.rewards.clone(),
                    repair_costs: mac.repair_costs.clone(),
                    p: mac.transitions.clone(),
                    s: mac.repair_rate,
                    initial: mac.initial_state,
                })
                .collect(),
        }
    }
}
