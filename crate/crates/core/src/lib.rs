//! # mcts-rate
//!
//! A finite-horizon MDP planning lab for comparing how fast Monte-Carlo tree
//! search instances converge to the optimal value at a fixed root state.
//!
//! Every planner here follows the same framework: at step `n` it produces an
//! `H`-horizon policy, rolls it out once from the root, and reports the running
//! mean of all rollout sums as its estimate of `V*_H(x)`.
//!
//! - [`mdp`]: model, validation, sampling, rollouts, policy enumeration, generators.
//! - [`oracle`]: backward induction, exact policy values, brute force, gaps.
//! - [`ucb1`]: UCB1 with the policy set `Π_H` as its arms.
//! - [`uct`]: UCT and UCT-C (deterministic and stochastic variants).
//! - [`ams`]: adaptive multi-stage sampling baseline.
//! - [`bounds`]: evaluable error-bound curves and their crossover.
//! - [`experiment`]: seeded replicated runs, CSV output, bound-curve reproduction.

pub mod ams;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod mdp;
pub mod oracle;
pub mod rng;
pub mod ucb1;
pub mod uct;

pub use error::{LabError, Result};
pub use rng::RngStream;
