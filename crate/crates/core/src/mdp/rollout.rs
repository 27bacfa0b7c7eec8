use serde::Serialize;

use super::{sample_reward, sample_transition, MdpModel, Policy};
use crate::rng::RngStream;

/// One transition of a simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RolloutStep {
    pub level: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// A sample path from `(start_state, start_level)` to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutTrace {
    pub start_level: usize,
    pub steps: Vec<RolloutStep>,
    /// `Σ_{t=l}^{H-1} γ^t r_t` with absolute-time discounting.
    pub discounted_sum: f64,
}

impl RolloutTrace {
    /// Recomputes the discounted sum from the steps.
    pub fn recompute_sum(&self, discount: f64) -> f64 {
        self.steps
            .iter()
            .map(|s| discount.powi(s.level as i32) * s.reward)
            .sum()
    }
}

/// Follows `pi` from `start_state` at `start_level` until the horizon.
///
/// Each step draws the reward first, then the next state. Rewards are
/// discounted by `γ^t` with `t` the absolute level, so a rollout started at
/// level `l` is not renormalized to `γ^0`.
pub fn rollout_policy(
    model: &MdpModel,
    pi: &Policy,
    start_state: usize,
    start_level: usize,
    rng: &mut RngStream,
) -> RolloutTrace {
    let horizon = model.horizon();
    assert!(
        start_level < horizon,
        "start level {start_level} must be below the horizon {horizon}"
    );
    assert!(
        pi.horizon() >= horizon,
        "policy is shorter than the model horizon"
    );
    let gamma = model.discount();
    let mut steps = Vec::with_capacity(horizon - start_level);
    let mut state = start_state;
    let mut weight = gamma.powi(start_level as i32);
    let mut total = 0.0;
    for level in start_level..horizon {
        let action = pi.action(level, state);
        let reward = sample_reward(model, state, action, rng);
        let next_state = sample_transition(model, state, action, rng);
        total += weight * reward;
        weight *= gamma;
        steps.push(RolloutStep {
            level,
            state,
            action,
            reward,
            next_state,
        });
        state = next_state;
    }
    RolloutTrace {
        start_level,
        steps,
        discounted_sum: total,
    }
}
