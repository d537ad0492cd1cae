//! Planning and evaluation toolkit for restless bandit problems.
//!
//! The crate is organized around problem families that share a common
//! duality-based solution technique:
//!
//! - [`belief`] / [`pwl`] / [`instance`]: domain types (two-state feedback
//!   arms, belief states, piecewise-linear escape functions, multi-state
//!   monotone arms, probe and replenishment instances).
//! - [`lp`]: a self-contained revised-simplex solver that returns primal and
//!   dual optima together with feasibility and complementary-slackness
//!   residuals.
//! - [`feedback`]: closed-form single-arm policy values, the per-arm
//!   penalized optimum, the balanced penalty search, and the balanced index
//!   policy for two-state feedback bandits, plus a truncated LP upper bound.
//! - [`whittle`]: Whittle indices for feedback arms and the thresholded
//!   Whittle policy.
//! - [`monotone`]: the balance LP for multi-state monotone bandits (base,
//!   multi-play/durations, switching-cost variants), parameter extraction via
//!   complementary slackness, and the induced index policies.
//! - [`probe`]: feedback bandits with paid observations; two-stage policy.
//! - [`replenish`]: non-preemptive machine replenishment; duality-based
//!   repair policy and a Whittle-index baseline.
//! - [`sim`]: seeded Monte Carlo simulation, exact stationary evaluation,
//!   value iteration for small instances, and Lyapunov drift certification.
//! - [`gallery`]: generators for the named gap instances.

pub mod belief;
pub mod feedback;
pub mod gallery;
pub mod instance;
pub mod lp;
pub mod monotone;
pub mod probe;
pub mod pwl;
pub mod replenish;
pub mod sim;
pub mod whittle;

mod linalg;

pub use belief::{BeliefState, FeedbackArm, FeedbackInstance, Observed, DEFAULT_DELTA};
pub use pwl::PiecewiseLinearMonotone;
