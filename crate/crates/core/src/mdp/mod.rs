//! Finite-horizon MDP model, validation and the sampling primitives every
//! planner goes through.
//!
//! States and actions are dense 0-based indices. Algorithms only observe the
//! model via [`sample_transition`] and [`sample_reward`]; closed-form means are
//! reserved for the exact oracles.

mod generate;
mod policy;
mod rollout;

pub use generate::{
    generate_mdp, nonstationarity_witness_mdp, GeneratorKind, GeneratorSpec, RewardFamily,
};
pub use policy::{enumerate_policies, EnumerationCap, Policy, PolicyIter, PolicySpace};
pub use rollout::{rollout_policy, RolloutStep, RolloutTrace};

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rng::RngStream;

/// Absolute tolerance on transition row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Distribution of the one-step reward `R(x, a)`; support is always `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum RewardSpec {
    Deterministic(f64),
    Bernoulli(f64),
}

impl RewardSpec {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardSpec::Deterministic(v) | RewardSpec::Bernoulli(v) => v,
        }
    }

    pub fn param(&self) -> f64 {
        self.mean()
    }

    fn is_valid(&self) -> bool {
        let p = self.param();
        p.is_finite() && (0.0..=1.0).contains(&p)
    }

    /// Draws one reward. Deterministic rewards consume no draws; Bernoulli
    /// rewards consume exactly one.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            RewardSpec::Deterministic(v) => v,
            RewardSpec::Bernoulli(p) => {
                if rng.uniform() < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A finite-horizon MDP with a fixed root state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpFile", into = "MdpFile")]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    discount: f64,
    initial_state: usize,
    /// Flat `[x][a][y]`.
    transitions: Vec<f64>,
    /// Flat `[x][a]`.
    rewards: Vec<RewardSpec>,
}

/// On-disk layout of an MDP document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub discount: f64,
    pub initial_state: usize,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<RewardSpec>>,
}

impl TryFrom<MdpFile> for MdpModel {
    type Error = LabError;

    fn try_from(file: MdpFile) -> Result<Self> {
        MdpModel::from_nested(
            file.num_states,
            file.num_actions,
            file.horizon,
            file.discount,
            file.initial_state,
            file.transitions,
            file.rewards,
        )
    }
}

impl From<MdpModel> for MdpFile {
    fn from(m: MdpModel) -> Self {
        let transitions = (0..m.num_states)
            .map(|x| {
                (0..m.num_actions)
                    .map(|a| m.transition_row(x, a).to_vec())
                    .collect()
            })
            .collect();
        let rewards = (0..m.num_states)
            .map(|x| (0..m.num_actions).map(|a| *m.reward(x, a)).collect())
            .collect();
        MdpFile {
            num_states: m.num_states,
            num_actions: m.num_actions,
            horizon: m.horizon,
            discount: m.discount,
            initial_state: m.initial_state,
            transitions,
            rewards,
        }
    }
}

impl MdpModel {
    /// Builds a model after checking only that the tensors have the declared
    /// shape. Value-level invariants are reported by [`validate_model`].
    pub fn from_nested(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        discount: f64,
        initial_state: usize,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<RewardSpec>>,
    ) -> Result<Self> {
        let shape =
            |what: &str| LabError::InvalidModel(format!("{what} does not match declared sizes"));
        if transitions.len() != num_states || rewards.len() != num_states {
            return Err(shape("outer state dimension"));
        }
        let mut flat_t = Vec::with_capacity(num_states * num_actions * num_states);
        let mut flat_r = Vec::with_capacity(num_states * num_actions);
        for (x, (t_rows, r_row)) in transitions.into_iter().zip(rewards).enumerate() {
            if t_rows.len() != num_actions || r_row.len() != num_actions {
                return Err(shape(&format!("action dimension at state {x}")));
            }
            for (a, row) in t_rows.into_iter().enumerate() {
                if row.len() != num_states {
                    return Err(shape(&format!("transition row ({x},{a})")));
                }
                flat_t.extend(row);
            }
            flat_r.extend(r_row);
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            discount,
            initial_state,
            transitions: flat_t,
            rewards: flat_r,
        })
    }

    /// Builds a model from flat tensors and rejects it unless it is valid.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        discount: f64,
        initial_state: usize,
        transitions: Vec<f64>,
        rewards: Vec<RewardSpec>,
    ) -> Result<Self> {
        if transitions.len() != num_states * num_actions * num_states
            || rewards.len() != num_states * num_actions
        {
            return Err(LabError::InvalidModel(
                "tensor lengths do not match declared sizes".into(),
            ));
        }
        let model = Self {
            num_states,
            num_actions,
            horizon,
            discount,
            initial_state,
            transitions,
            rewards,
        };
        model.ensure_valid()?;
        Ok(model)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transition_row(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub fn transition_prob(&self, x: usize, a: usize, y: usize) -> f64 {
        self.transition_row(x, a)[y]
    }

    pub fn reward(&self, x: usize, a: usize) -> &RewardSpec {
        &self.rewards[x * self.num_actions + a]
    }

    pub fn mean_reward(&self, x: usize, a: usize) -> f64 {
        self.reward(x, a).mean()
    }

    /// Same model with a different root state.
    pub fn with_initial_state(&self, initial_state: usize) -> Self {
        Self {
            initial_state,
            ..self.clone()
        }
    }

    /// Same model with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    /// Every reward mean multiplied by `factor`.
    pub fn with_scaled_rewards(&self, factor: f64) -> Self {
        let rewards = self
            .rewards
            .iter()
            .map(|r| match *r {
                RewardSpec::Deterministic(v) => RewardSpec::Deterministic(v * factor),
                RewardSpec::Bernoulli(p) => RewardSpec::Bernoulli(p * factor),
            })
            .collect();
        Self {
            rewards,
            ..self.clone()
        }
    }

    /// True when every transition row is one-hot.
    pub fn is_deterministic(&self) -> bool {
        self.transitions
            .chunks(self.num_states.max(1))
            .all(|row| row.iter().filter(|&&p| p > 0.0).count() == 1)
    }

    /// Smallest strictly positive transition probability.
    pub fn min_positive_probability(&self) -> Option<f64> {
        self.transitions
            .iter()
            .copied()
            .filter(|&p| p > 0.0)
            .min_by(f64::total_cmp)
    }

    /// `Σ_{t<H} γ^t`, the largest possible discounted return.
    pub fn max_return(&self) -> f64 {
        (0..self.horizon)
            .map(|t| self.discount.powi(t as i32))
            .sum()
    }

    /// States reachable with positive probability at each level `0..H`,
    /// starting from the root at level 0 and allowing any action.
    pub fn reachable_by_level(&self) -> Vec<Vec<usize>> {
        let mut levels = Vec::with_capacity(self.horizon);
        let mut current = vec![false; self.num_states];
        current[self.initial_state] = true;
        for _ in 0..self.horizon {
            levels.push(
                (0..self.num_states)
                    .filter(|&y| current[y])
                    .collect::<Vec<_>>(),
            );
            let mut next = vec![false; self.num_states];
            for (x, _) in current.iter().enumerate().filter(|(_, &on)| on) {
                for a in 0..self.num_actions {
                    for (y, &p) in self.transition_row(x, a).iter().enumerate() {
                        if p > 0.0 {
                            next[y] = true;
                        }
                    }
                }
            }
            current = next;
        }
        levels
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_model(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(LabError::InvalidModel(report.to_string()))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// One broken model invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    EmptyStateSet,
    EmptyActionSet,
    ZeroHorizon,
    DiscountOutOfRange {
        discount: f64,
    },
    InitialStateOutOfRange {
        initial_state: usize,
    },
    NegativeProbability {
        state: usize,
        action: usize,
        next_state: usize,
        value: f64,
    },
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    RewardOutOfRange {
        state: usize,
        action: usize,
        reward: RewardSpec,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyStateSet => write!(f, "state set is empty"),
            Violation::EmptyActionSet => write!(f, "action set is empty"),
            Violation::ZeroHorizon => write!(f, "horizon must be at least 1"),
            Violation::DiscountOutOfRange { discount } => {
                write!(f, "discount {discount} is outside (0, 1]")
            }
            Violation::InitialStateOutOfRange { initial_state } => {
                write!(f, "initial state {initial_state} is out of range")
            }
            Violation::NegativeProbability {
                state,
                action,
                next_state,
                value,
            } => write!(
                f,
                "transition ({state},{action})->{next_state} has negative probability {value}"
            ),
            Violation::RowSum { state, action, sum } => {
                write!(f, "transition row ({state},{action}) sums to {sum}")
            }
            Violation::RewardOutOfRange {
                state,
                action,
                reward,
            } => {
                write!(
                    f,
                    "reward ({state},{action}) = {reward:?} has support outside [0, 1]"
                )
            }
        }
    }
}

/// Outcome of [`validate_model`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Lists every invariant the model breaks.
pub fn validate_model(model: &MdpModel) -> ValidationReport {
    let mut violations = Vec::new();
    if model.num_states == 0 {
        violations.push(Violation::EmptyStateSet);
    }
    if model.num_actions == 0 {
        violations.push(Violation::EmptyActionSet);
    }
    if model.horizon == 0 {
        violations.push(Violation::ZeroHorizon);
    }
    if !(model.discount > 0.0 && model.discount <= 1.0) {
        violations.push(Violation::DiscountOutOfRange {
            discount: model.discount,
        });
    }
    if model.initial_state >= model.num_states {
        violations.push(Violation::InitialStateOutOfRange {
            initial_state: model.initial_state,
        });
    }
    for x in 0..model.num_states {
        for a in 0..model.num_actions {
            let row = model.transition_row(x, a);
            for (y, &p) in row.iter().enumerate() {
                if p.is_nan() || p < 0.0 {
                    violations.push(Violation::NegativeProbability {
                        state: x,
                        action: a,
                        next_state: y,
                        value: p,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.is_nan() || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSum {
                    state: x,
                    action: a,
                    sum,
                });
            }
            let reward = *model.reward(x, a);
            if !reward.is_valid() {
                violations.push(Violation::RewardOutOfRange {
                    state: x,
                    action: a,
                    reward,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Draws the next state from `P^a_{x·}` with exactly one uniform draw.
pub fn sample_transition(model: &MdpModel, x: usize, a: usize, rng: &mut RngStream) -> usize {
    assert!(x < model.num_states, "state {x} out of range");
    assert!(a < model.num_actions, "action {a} out of range");
    let row = model.transition_row(x, a);
    let u = rng.uniform();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (y, &p) in row.iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_positive = y;
            if u < cumulative {
                return y;
            }
        }
    }
    // Row sums a hair under 1 can leave u past the final bucket.
    last_positive
}

/// Draws one sample of `R(x, a)`.
pub fn sample_reward(model: &MdpModel, x: usize, a: usize, rng: &mut RngStream) -> f64 {
    assert!(x < model.num_states, "state {x} out of range");
    assert!(a < model.num_actions, "action {a} out of range");
    model.reward(x, a).sample(rng)
}


#[cfg(test)]
mod tests {
    use super::test_models::*;
    use super::*;

    fn two_state_with_row(row: [f64; 2], reward: RewardSpec) -> MdpModel {
        MdpModel::from_nested(
            2,
            1,
            2,
            1.0,
            0,
            vec![vec![row.to_vec()], vec![vec![0.0, 1.0]]],
            vec![vec![reward], vec![RewardSpec::Deterministic(0.0)]],
        )
        .unwrap()
    }

    #[test]
    fn valid_model_has_empty_report() {
        let report = validate_model(&symmetric_two_state(3));
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn short_row_is_reported_with_location() {
        let m = two_state_with_row([0.4, 0.5], RewardSpec::Deterministic(0.5));
        let report = validate_model(&m);
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::RowSum { state, action, sum } => {
                assert_eq!((*state, *action), (0, 0));
                assert!((sum - 0.9).abs() < 1e-12);
            }
            v => panic!("unexpected violation {v}"),
        }
    }

    #[test]
    fn bernoulli_above_one_is_reported() {
        let m = two_state_with_row([1.0, 0.0], RewardSpec::Bernoulli(1.3));
        let report = validate_model(&m);
        assert_eq!(
            report.violations,
            vec![Violation::RewardOutOfRange {
                state: 0,
                action: 0,
                reward: RewardSpec::Bernoulli(1.3)
            }]
        );
        assert!(m.ensure_valid().is_err());
    }

    #[test]
    fn scalar_violations_are_reported() {
        let m = MdpModel::from_nested(
            1,
            1,
            0,
            1.5,
            3,
            vec![vec![vec![1.0]]],
            vec![vec![RewardSpec::Deterministic(0.0)]],
        )
        .unwrap();
        let report = validate_model(&m);
        assert_eq!(report.violations.len(), 3);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let err = MdpModel::from_nested(
            2,
            1,
            1,
            1.0,
            0,
            vec![vec![vec![1.0, 0.0]]],
            vec![vec![RewardSpec::Deterministic(0.0)]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn degenerate_row_always_hits_its_state() {
        let mut t = vec![0.0; 5];
        t[3] = 1.0;
        let mut rows = vec![vec![vec![0.2; 5]]; 5];
        rows[0][0] = t;
        let m = MdpModel::from_nested(
            5,
            1,
            1,
            1.0,
            0,
            rows,
            vec![vec![RewardSpec::Deterministic(0.0)]; 5],
        )
        .unwrap();
        assert!(validate_model(&m).is_valid());
        let mut rng = RngStream::new(1);
        for _ in 0..1000 {
            assert_eq!(sample_transition(&m, 0, 0, &mut rng), 3);
        }
        assert_eq!(rng.draws(), 1000);
    }

    #[test]
    fn uniform_row_frequencies_match() {
        // Binomial sd at 1e5 draws is 0.0016; 0.01 is > 6 sd.
        let m = symmetric_two_state(1);
        let mut rng = RngStream::new(99);
        let draws = 100_000;
        let ones = (0..draws)
            .filter(|_| sample_transition(&m, 0, 1, &mut rng) == 1)
            .count();
        let freq = ones as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
    }

    #[test]
    fn same_seed_same_transition() {
        let m = symmetric_two_state(1);
        let a = sample_transition(&m, 1, 0, &mut RngStream::new(5));
        let b = sample_transition(&m, 1, 0, &mut RngStream::new(5));
        assert_eq!(a, b);
    }

    #[test]
    fn reward_sampling() {
        let m = single_state(1, 1.0, 0.7);
        let mut rng = RngStream::new(0);
        assert_eq!(sample_reward(&m, 0, 0, &mut rng), 0.7);
        assert_eq!(rng.draws(), 0);

        let certain = RewardSpec::Bernoulli(1.0);
        assert_eq!(certain.sample(&mut rng), 1.0);
        assert_eq!(rng.draws(), 1);

        let quarter = RewardSpec::Bernoulli(0.25);
        let mut rng = RngStream::new(3);
        let mean = (0..100_000).map(|_| quarter.sample(&mut rng)).sum::<f64>() / 100_000.0;
        assert!((mean - 0.25).abs() < 0.01, "{mean}");
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn out_of_range_action_panics() {
        let m = single_state(1, 1.0, 0.5);
        sample_transition(&m, 0, 1, &mut RngStream::new(0));
    }

    #[test]
    fn json_layout_roundtrips() {
        let m = symmetric_two_state(2);
        let text = m.to_json_string().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["transitions"][1][0][1], 0.5);
        assert_eq!(v["rewards"][0][1]["kind"], "bernoulli");
        assert_eq!(v["rewards"][0][1]["param"], 0.5);
        assert_eq!(MdpModel::from_json_str(&text).unwrap(), m);
    }

    #[test]
    fn reachability_by_level() {
        let m = MdpModel::new(
            3,
            1,
            3,
            1.0,
            0,
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            vec![RewardSpec::Deterministic(0.0); 3],
        )
        .unwrap();
        assert_eq!(m.reachable_by_level(), vec![vec![0], vec![1], vec![2]]);
        assert!(m.is_deterministic());
    }
}
