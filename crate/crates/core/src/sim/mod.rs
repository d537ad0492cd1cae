//! Policy evaluation: seeded Monte Carlo simulation, exact stationary-chain
//! evaluation, a value-iteration oracle for small feedback instances, and
//! Lyapunov drift certification.

pub mod feedback;
pub mod lyapunov;
pub mod monotone;
pub mod probe;
pub mod replenish;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("policy and instance shapes do not match: {0}")]
    ShapeMismatch(String),
    #[error("state space too large: {states} states exceeds cap {cap}")]
    StateSpaceTooLarge { states: u64, cap: u64 },
    #[error("no convergence after {0} iterations")]
    NoConvergence(u64),
    #[error("bad configuration: {0}")]
    BadConfig(String),
}

/// Monte Carlo configuration. Replication `r` draws from an independent
/// stream of one counter-based generator, so streams never overlap and the
/// whole simulation is a deterministic function of `(instance, policy,
/// config)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: u64,
    pub burnin: u64,
    pub replications: u32,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(horizon: u64, burnin: u64, replications: u32, seed: u64) -> Result<Self, SimError> {
        if horizon == 0 || burnin >= horizon {
            return Err(SimError::BadConfig(format!(
                "horizon {horizon} must exceed burn-in {burnin}"
            )));
        }
        if replications == 0 {
            return Err(SimError::BadConfig("need at least one replication".into()));
        }
        Ok(SimConfig {
            horizon,
            burnin,
            replications,
            seed,
        })
    }

    /// RNG stream for one replication.
    pub fn stream(&self, replication: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication as u64 + 1);
        rng
    }

    pub fn measured_steps(&self) -> u64 {
        self.horizon - self.burnin
    }
}

/// Aggregated simulation output. `mean` is the per-step net value (reward
/// minus any probe/switch costs) averaged over replications after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean: f64,
    pub stderr: f64,
    pub replication_means: Vec<f64>,
    /// Fraction of measured steps each arm was being played.
    pub play_rate: Vec<f64>,
    pub plays: Vec<u64>,
    pub probes: u64,
    pub probe_cost: f64,
    pub switches: u64,
    pub switch_cost: f64,
    pub repairs: u64,
    /// Reward-crediting convention used by the simulator.
    pub crediting: String,
    pub horizon: u64,
    pub burnin: u64,
    pub replications: u32,
    pub seed: u64,
}

impl SimResult {
    pub(crate) fn from_reps(
        rep_means: Vec<f64>,
        plays: Vec<u64>,
        measured_total: u64,
        cfg: &SimConfig,
        crediting: &str,
    ) -> SimResult {
        let n = rep_means.len() as f64;
        let mean = rep_means.iter().sum::<f64>() / n;
        let stderr = if rep_means.len() > 1 {
            let var = rep_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let play_rate = plays
            .iter()
            .map(|&p| p as f64 / measured_total as f64)
            .collect();
        SimResult {
            mean,
            stderr,
            replication_means: rep_means,
            play_rate,
            plays,
            probes: 0,
            probe_cost: 0.0,
            switches: 0,
            switch_cost: 0.0,
            repairs: 0,
            crediting: crediting.to_string(),
            horizon: cfg.horizon,
            burnin: cfg.burnin,
            replications: cfg.replications,
            seed: cfg.seed,
        }
    }
}
