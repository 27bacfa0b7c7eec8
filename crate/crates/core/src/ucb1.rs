//! UCB1 with the policy set as its arm set.
//!
//! Each step selects the policy with the largest index
//! `Q(π) + sqrt(2 ln n / T(π))`, rolls it out once from the root and updates
//! that arm only. Unplayed arms share the constant `i_max`, which dominates
//! every played index, so all arms are drained once in canonical order before
//! any is repeated. Ties go to the lowest canonical index.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::mdp::{
    enumerate_policies, rollout_policy, EnumerationCap, MdpModel, Policy, PolicySpace,
};
use crate::rng::RngStream;

/// Which policies serve as arms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSet {
    /// All of `Π_H`.
    #[default]
    Full,
    /// Deterministic models only: one representative per root action
    /// sequence, i.e. per distinct root trajectory (`|A|^H` arms).
    Trajectories,
}

/// Builds the arm list for a model.
pub fn build_arms(model: &MdpModel, arm_set: ArmSet, cap: EnumerationCap) -> Result<Vec<Policy>> {
    match arm_set {
        ArmSet::Full => enumerate_policies(model, cap),
        ArmSet::Trajectories => trajectory_arms(model, cap),
    }
}

fn trajectory_arms(model: &MdpModel, cap: EnumerationCap) -> Result<Vec<Policy>> {
    if !model.is_deterministic() {
        return Err(LabError::InvalidConfig(
            "trajectory arm set requires deterministic transitions".into(),
        ));
    }
    let (ns, na, horizon) = (model.num_states(), model.num_actions(), model.horizon());
    // Same size as a policy space with one free entry per level.
    let entries: Vec<(usize, usize)> = (0..horizon).map(|l| (l, 0)).collect();
    let count = PolicySpace::restricted(model, horizon, &entries).check_cap(cap)?;
    let next_state = |y: usize, a: usize| {
        model
            .transition_row(y, a)
            .iter()
            .position(|&p| p > 0.0)
            .expect("deterministic row has a target")
    };
    let mut arms = Vec::with_capacity(count as usize);
    let mut seq = vec![0usize; horizon];
    loop {
        let mut pi = Policy::constant(horizon, ns, 0);
        let mut y = model.initial_state();
        for (l, &a) in seq.iter().enumerate() {
            pi.set_action(l, y, a);
            y = next_state(y, a);
        }
        arms.push(pi);
        // Odometer over action sequences, first level most significant.
        let mut pos = horizon;
        loop {
            if pos == 0 {
                return Ok(arms);
            }
            pos -= 1;
            if seq[pos] + 1 < na {
                seq[pos] += 1;
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// Running statistics of UCB1 over a fixed arm list.
#[derive(Debug, Clone)]
pub struct Ucb1State {
    arms: Vec<Policy>,
    counts: Vec<u64>,
    sums: Vec<f64>,
    n: u64,
    i_max: f64,
    value_cap: f64,
}

fn i_max_for(value_cap: f64, n: u64) -> f64 {
    value_cap + (2.0 * (n.max(2) as f64).ln()).sqrt() + 1.0
}

impl Ucb1State {
    /// `horizon` bounds every rollout sum; `n_max` is the planned budget used
    /// to fix `i_max = H + sqrt(2 ln n_max) + 1`.
    pub fn new(arms: Vec<Policy>, horizon: usize, n_max: u64) -> Result<Self> {
        if arms.is_empty() {
            return Err(LabError::InvalidConfig(
                "UCB1 needs at least one arm".into(),
            ));
        }
        let k = arms.len();
        let value_cap = horizon as f64;
        Ok(Self {
            arms,
            counts: vec![0; k],
            sums: vec![0.0; k],
            n: 0,
            i_max: i_max_for(value_cap, n_max),
            value_cap,
        })
    }

    pub fn for_model(
        model: &MdpModel,
        arm_set: ArmSet,
        cap: EnumerationCap,
        n_max: u64,
    ) -> Result<Self> {
        Self::new(build_arms(model, arm_set, cap)?, model.horizon(), n_max)
    }

    pub fn arms(&self) -> &[Policy] {
        &self.arms
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }

    /// `Q^n(π)`, the sample average of the arm's rollout sums.
    pub fn sample_average(&self, arm: usize) -> Option<f64> {
        (self.counts[arm] > 0).then(|| self.sums[arm] / self.counts[arm] as f64)
    }

    fn index_with_log(&self, arm: usize, log_n: f64) -> f64 {
        match self.counts[arm] {
            0 => self.i_max,
            t => self.sums[arm] / t as f64 + (2.0 * log_n / t as f64).sqrt(),
        }
    }

    /// UCB1 index of `arm` at the current `n`.
    pub fn index(&self, arm: usize) -> f64 {
        self.index_with_log(arm, (self.n.max(1) as f64).ln())
    }

    /// Arm with the largest index; the lowest canonical index wins ties.
    pub fn select(&self) -> usize {
        let log_n = (self.n.max(1) as f64).ln();
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for arm in 0..self.arms.len() {
            let v = self.index_with_log(arm, log_n);
            if v > best_value {
                best = arm;
                best_value = v;
            }
        }
        best
    }

    /// Records one rollout sum for `arm`.
    pub fn record(&mut self, arm: usize, sum: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += sum;
        self.n += 1;
        let floor = self.value_cap + (2.0 * (self.n.max(2) as f64).ln()).sqrt();
        if self.i_max <= floor {
            self.i_max = i_max_for(self.value_cap, self.n);
        }
    }

    /// Select, roll out from the root at level 0, update. Returns the chosen
    /// arm and its rollout sum.
    pub fn step(&mut self, model: &MdpModel, rng: &mut RngStream) -> (usize, f64) {
        let arm = self.select();
        let trace = rollout_policy(model, &self.arms[arm], model.initial_state(), 0, rng);
        self.record(arm, trace.discounted_sum);
        (arm, trace.discounted_sum)
    }

    /// Mean of every rollout sum so far: the estimate of `V*_H(x)`.
    pub fn estimate(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(LabError::UndefinedEstimate);
        }
        Ok(self.sums.iter().sum::<f64>() / self.n as f64)
    }

    /// The per-`(y, a, l)` view of the policy index: `+I(π^n)` when `a` is the
    /// action the current argmax policy `π^n` plays at `(y, l)`, `-I(π^n)`
    /// otherwise. Its per-node argmax reproduces [`Self::select`].
    pub fn state_action_index_view(&self, y: usize, a: usize, level: usize) -> f64 {
        let best = self.select();
        let value = self.index(best);
        if self.arms[best].action(level, y) == a {
            value
        } else {
            -value
        }
    }

    /// Rebuilds a policy by maximizing [`Self::state_action_index_view`] at
    /// every `(y, l)`.
    pub fn policy_from_index_view(&self, num_actions: usize) -> Policy {
        let reference = &self.arms[0];
        let (horizon, ns) = (reference.horizon(), reference.num_states());
        let mut pi = Policy::constant(horizon, ns, 0);
        for l in 0..horizon {
            for y in 0..ns {
                let mut best = 0;
                let mut best_value = f64::NEG_INFINITY;
                for a in 0..num_actions {
                    let v = self.state_action_index_view(y, a, l);
                    if v > best_value {
                        best = a;
                        best_value = v;
                    }
                }
                pi.set_action(l, y, best);
            }
        }
        pi
    }
}
