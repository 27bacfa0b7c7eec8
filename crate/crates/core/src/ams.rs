//! Adaptive multi-stage sampling: a recursive depth-first estimator that runs
//! a UCB bandit over actions at every sampled `(state, level)` and backs the
//! count-weighted action means up the sample tree.
//!
//! Each recursive call draws fresh samples; nothing is shared between calls
//! that land on the same state. Values are in value-to-go form (`[0, H - l]`
//! for rewards in `[0, 1]` and `γ ≤ 1`); [`level_anchored`] converts to the
//! absolute-time convention used by the tree planners.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::mdp::{sample_reward, sample_transition, MdpModel};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmsConfig {
    /// Samples drawn at every visited state, at every level.
    pub samples_per_state: usize,
}

impl AmsConfig {
    pub fn new(samples_per_state: usize) -> Self {
        Self { samples_per_state }
    }

    pub fn validate(&self, model: &MdpModel) -> Result<()> {
        if self.samples_per_state < model.num_actions() {
            return Err(LabError::InvalidConfig(format!(
                "AMS needs at least one sample per action: N = {} < |A| = {}",
                self.samples_per_state,
                model.num_actions()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmsEstimate {
    /// Value-to-go estimate at the queried `(y, l)`.
    pub value: f64,
    /// Action samples drawn over the whole recursion.
    pub work: u64,
    /// Next-state samples drawn by the top-level call (always `N` when `l < H`).
    pub root_next_states: u64,
}

/// Converts a value-to-go estimate at level `l` to the absolute-time
/// convention, i.e. multiplies by `γ^l`.
pub fn level_anchored(model: &MdpModel, level: usize, value_to_go: f64) -> f64 {
    model.discount().powi(level as i32) * value_to_go
}

/// Estimates `V*_{H-l}(y)`.
pub fn ams_estimate(
    model: &MdpModel,
    y: usize,
    level: usize,
    config: &AmsConfig,
    rng: &mut RngStream,
) -> Result<AmsEstimate> {
    config.validate(model)?;
    if y >= model.num_states() {
        return Err(LabError::InvalidConfig(format!("state {y} out of range")));
    }
    if level > model.horizon() {
        return Err(LabError::InvalidConfig(format!(
            "level {level} beyond horizon {}",
            model.horizon()
        )));
    }
    if level == model.horizon() {
        return Ok(AmsEstimate {
            value: 0.0,
            work: 0,
            root_next_states: 0,
        });
    }
    let n = config.samples_per_state;
    // sqrt(2 ln i) for i = 0..=N, shared by every call.
    let bonus: Vec<f64> = (0..=n)
        .map(|i| (2.0 * (i.max(1) as f64).ln()).sqrt())
        .collect();
    let mut sampler = Sampler {
        model,
        n,
        bonus,
        work: 0,
    };
    let value = sampler.estimate(y, level, rng);
    Ok(AmsEstimate {
        value,
        work: sampler.work,
        root_next_states: n as u64,
    })
}

struct Sampler<'a> {
    model: &'a MdpModel,
    n: usize,
    bonus: Vec<f64>,
    work: u64,
}

impl Sampler<'_> {
    fn estimate(&mut self, y: usize, level: usize, rng: &mut RngStream) -> f64 {
        if level == self.model.horizon() {
            return 0.0;
        }
        let na = self.model.num_actions();
        let gamma = self.model.discount();
        let mut counts = vec![0u64; na];
        let mut sums = vec![0.0; na];
        let mut total = 0.0;
        for i in 0..self.n {
            let a = if i < na {
                i
            } else {
                let b = self.bonus[i];
                let mut best = 0;
                let mut best_value = f64::NEG_INFINITY;
                for a in 0..na {
                    let t = counts[a] as f64;
                    let v = sums[a] / t + b / t.sqrt();
                    if v > best_value {
                        best = a;
                        best_value = v;
                    }
                }
                best
            };
            let r = sample_reward(self.model, y, a, rng);
            let z = sample_transition(self.model, y, a, rng);
            self.work += 1;
            let q = r + gamma * self.estimate(z, level + 1, rng);
            counts[a] += 1;
            sums[a] += q;
            total += q;
        }
        total / self.n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::test_models::{single_state, symmetric_two_state};

    #[test]
    fn base_case_is_zero() {
        let m = single_state(3, 1.0, 1.0);
        let mut rng = RngStream::new(0);
        let e = ams_estimate(&m, 0, 3, &AmsConfig::new(4), &mut rng).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.work, 0);
    }

    #[test]
    fn forced_recursion_sums_rewards() {
        let m = single_state(2, 1.0, 1.0);
        for n in [1, 3, 7] {
            let mut rng = RngStream::new(1);
            let e = ams_estimate(&m, 0, 0, &AmsConfig::new(n), &mut rng).unwrap();
            assert!((e.value - 2.0).abs() < 1e-12);
            assert_eq!(e.work, (n + n * n) as u64);
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let m = symmetric_two_state(2);
        let mut rng = RngStream::new(0);
        assert!(ams_estimate(&m, 0, 0, &AmsConfig::new(1), &mut rng).is_err());
    }

    #[test]
    fn work_within_complexity_bound_and_value_in_range() {
        let m = symmetric_two_state(3);
        let n = 5;
        let mut rng = RngStream::new(2);
        let e = ams_estimate(&m, 0, 0, &AmsConfig::new(n), &mut rng).unwrap();
        let full = (n + n * n + n * n * n) as u64;
        assert_eq!(e.work, full);
        assert!(e.work <= ((m.num_actions() * n) as u64).pow(3));
        assert!((0.0..=3.0).contains(&e.value));
        assert_eq!(e.root_next_states, n as u64);
    }

    #[test]
    fn anchoring_scales_by_discount_power() {
        let m = single_state(3, 0.5, 1.0);
        assert!((level_anchored(&m, 2, 1.5) - 0.375).abs() < 1e-15);
    }
}
