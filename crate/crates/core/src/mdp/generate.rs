use serde::{Deserialize, Serialize};

use super::{MdpModel, RewardSpec};
use crate::error::{LabError, Result};
use crate::rng::RngStream;

/// Family used for randomly drawn reward means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardFamily {
    #[default]
    Deterministic,
    Bernoulli,
}

impl RewardFamily {
    fn make(self, mean: f64) -> RewardSpec {
        match self {
            RewardFamily::Deterministic => RewardSpec::Deterministic(mean),
            RewardFamily::Bernoulli => RewardSpec::Bernoulli(mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Random rows drawn uniformly from the simplex over `support` random
    /// next states (all states when `None`).
    RandomStochastic {
        #[serde(default)]
        support: Option<usize>,
    },
    /// Every row uniform over all states.
    UniformStochastic,
    /// One-hot rows with uniformly drawn targets.
    RandomDeterministic,
    /// Deterministic chain whose root gap `Δ_min` equals `gap`: action 0 at
    /// the root leads to a reward-1 sink, every other action to a sink whose
    /// per-step shortfall adds up to exactly `gap`.
    ChainWithGap { gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub rewards: RewardFamily,
}

fn default_discount() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Self {
            kind,
            num_states,
            num_actions,
            horizon,
            discount: 1.0,
            rewards: RewardFamily::Deterministic,
        }
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    pub fn with_rewards(mut self, rewards: RewardFamily) -> Self {
        self.rewards = rewards;
        self
    }
}

/// Builds a model from a generator spec; identical `(spec, seed)` pairs give
/// identical models.
pub fn generate_mdp(spec: &GeneratorSpec, seed: u64) -> Result<MdpModel> {
    let (ns, na) = (spec.num_states, spec.num_actions);
    if ns == 0 || na == 0 || spec.horizon == 0 {
        return Err(LabError::InvalidConfig(
            "generator needs at least one state, one action and horizon 1".into(),
        ));
    }
    let mut rng = RngStream::new(seed);
    let model = match &spec.kind {
        GeneratorKind::RandomStochastic { support } => {
            let k = support.unwrap_or(ns);
            if k == 0 || k > ns {
                return Err(LabError::InvalidConfig(format!(
                    "support {k} must be in 1..={ns}"
                )));
            }
            let mut t = Vec::with_capacity(ns * na * ns);
            for _ in 0..ns * na {
                t.extend(random_simplex_row(ns, k, &mut rng));
            }
            let r = random_rewards(ns * na, spec.rewards, &mut rng);
            MdpModel::new(ns, na, spec.horizon, spec.discount, 0, t, r)?
        }
        GeneratorKind::UniformStochastic => {
            let t = vec![1.0 / ns as f64; ns * na * ns];
            let r = random_rewards(ns * na, spec.rewards, &mut rng);
            MdpModel::new(ns, na, spec.horizon, spec.discount, 0, t, r)?
        }
        GeneratorKind::RandomDeterministic => {
            let mut t = vec![0.0; ns * na * ns];
            for row in t.chunks_mut(ns) {
                let y = uniform_index(ns, &mut rng);
                row[y] = 1.0;
            }
            let r = random_rewards(ns * na, spec.rewards, &mut rng);
            MdpModel::new(ns, na, spec.horizon, spec.discount, 0, t, r)?
        }
        GeneratorKind::ChainWithGap { gap } => chain_with_gap(spec, *gap)?,
    };
    Ok(model)
}

fn uniform_index(n: usize, rng: &mut RngStream) -> usize {
    ((rng.uniform() * n as f64) as usize).min(n - 1)
}

fn random_simplex_row(ns: usize, support: usize, rng: &mut RngStream) -> Vec<f64> {
    // Partial Fisher-Yates picks the support; exponential weights make the
    // normalized row uniform on the simplex.
    let mut idx: Vec<usize> = (0..ns).collect();
    for i in 0..support {
        let j = i + uniform_index(ns - i, rng);
        idx.swap(i, j);
    }
    let mut row = vec![0.0; ns];
    let mut total = 0.0;
    for &y in &idx[..support] {
        let w = -(1.0 - rng.uniform()).ln() + 1e-12;
        row[y] = w;
        total += w;
    }
    row.iter_mut().for_each(|p| *p /= total);
    row
}

fn random_rewards(count: usize, family: RewardFamily, rng: &mut RngStream) -> Vec<RewardSpec> {
    (0..count).map(|_| family.make(rng.uniform())).collect()
}

fn chain_with_gap(spec: &GeneratorSpec, gap: f64) -> Result<MdpModel> {
    let (ns, na, h, gamma) = (
        spec.num_states,
        spec.num_actions,
        spec.horizon,
        spec.discount,
    );
    if na < 2 {
        return Err(LabError::Sizing(
            "chain_with_gap needs at least two actions".into(),
        ));
    }
    if ns < 2 {
        return Err(LabError::Sizing(
            "chain_with_gap needs at least two states".into(),
        ));
    }
    if !(gap.is_finite() && gap >= 0.0) {
        return Err(LabError::InvalidConfig(format!(
            "gap {gap} must be a nonnegative number"
        )));
    }
    let total_weight: f64 = (0..h).map(|t| gamma.powi(t as i32)).sum();
    // With two states only the root reward can carry the gap.
    let (capacity, carrier_weight) = if ns >= 3 {
        (total_weight, total_weight)
    } else {
        (1.0, 1.0)
    };
    if gap > capacity {
        return Err(LabError::Sizing(format!(
            "gap {gap} exceeds the largest realizable return difference {capacity}"
        )));
    }
    let bad_reward = 1.0 - gap / carrier_weight;
    let good = 1;
    let bad = if ns >= 3 { 2 } else { 1 };

    let mut t = vec![0.0; ns * na * ns];
    let mut r = vec![RewardSpec::Deterministic(0.5); ns * na];
    let mut set = |x: usize, a: usize, y: usize, reward: f64| {
        t[(x * na + a) * ns + y] = 1.0;
        r[x * na + a] = RewardSpec::Deterministic(reward);
    };
    for a in 0..na {
        if a == 0 {
            set(0, a, good, 1.0);
        } else {
            set(0, a, bad, bad_reward);
        }
        set(good, a, good, 1.0);
        if bad != good {
            set(bad, a, bad, bad_reward);
        }
        for x in 3..ns {
            set(x, a, x, 0.5);
        }
    }
    if ns == 2 {
        // Only state 1 follows the root; keep its reward at 1 for every action.
        for a in 0..na {
            r[na + a] = RewardSpec::Deterministic(1.0);
        }
    }
    MdpModel::new(ns, na, h, gamma, 0, t, r)
}

/// Two-level instance where UCT's root action values drift with `n`.
///
/// The root reward is the same for both actions; the good branch hides a
/// Bernoulli(0.9) action next to a Bernoulli(0.1) one, so early visits that
/// still explore the bad level-1 action pull the root estimate down.
pub fn nonstationarity_witness_mdp() -> MdpModel {
    use RewardSpec::*;
    let t = vec![
        // root
        0.0, 1.0, 0.0, //
        0.0, 0.0, 1.0, //
        // good branch
        0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, //
        // bad branch
        0.0, 0.0, 1.0, //
        0.0, 0.0, 1.0,
    ];
    let r = vec![
        Deterministic(0.5),
        Deterministic(0.5),
        Bernoulli(0.9),
        Bernoulli(0.1),
        Bernoulli(0.3),
        Bernoulli(0.3),
    ];
    MdpModel::new(3, 2, 2, 1.0, 0, t, r).expect("witness model is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_model;

    #[test]
    fn random_deterministic_is_valid_and_one_hot() {
        let spec = GeneratorSpec::new(GeneratorKind::RandomDeterministic, 10, 2, 15);
        let m = generate_mdp(&spec, 17).unwrap();
        assert!(validate_model(&m).is_valid());
        assert!(m.is_deterministic());
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [
            GeneratorKind::RandomStochastic { support: None },
            GeneratorKind::RandomStochastic { support: Some(2) },
            GeneratorKind::RandomDeterministic,
            GeneratorKind::UniformStochastic,
        ] {
            let spec = GeneratorSpec::new(kind, 4, 3, 3).with_rewards(RewardFamily::Bernoulli);
            assert_eq!(
                generate_mdp(&spec, 5).unwrap(),
                generate_mdp(&spec, 5).unwrap()
            );
            assert_ne!(
                generate_mdp(&spec, 5).unwrap(),
                generate_mdp(&spec, 6).unwrap()
            );
        }
    }

    #[test]
    fn sparse_support_is_respected() {
        let spec = GeneratorSpec::new(
            GeneratorKind::RandomStochastic { support: Some(2) },
            6,
            2,
            2,
        );
        let m = generate_mdp(&spec, 3).unwrap();
        for x in 0..6 {
            for a in 0..2 {
                let nz = m.transition_row(x, a).iter().filter(|&&p| p > 0.0).count();
                assert_eq!(nz, 2);
            }
        }
    }

    #[test]
    fn chain_rejects_infeasible_gap() {
        let spec = GeneratorSpec::new(GeneratorKind::ChainWithGap { gap: 4.0 }, 3, 2, 3);
        assert!(matches!(generate_mdp(&spec, 0), Err(LabError::Sizing(_))));
        let spec = GeneratorSpec::new(GeneratorKind::ChainWithGap { gap: 1.5 }, 2, 2, 3);
        assert!(matches!(generate_mdp(&spec, 0), Err(LabError::Sizing(_))));
        let spec = GeneratorSpec::new(GeneratorKind::ChainWithGap { gap: 2.5 }, 3, 2, 3);
        assert!(generate_mdp(&spec, 0).is_ok());
    }

    #[test]
    fn spec_json_shape() {
        let spec = GeneratorSpec::new(GeneratorKind::ChainWithGap { gap: 0.1 }, 3, 2, 2);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"chain_with_gap\""), "{text}");
        let back: GeneratorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let parsed: GeneratorSpec = serde_json::from_str(
            r#"{"kind":"random_stochastic","num_states":3,"num_actions":2,"horizon":3}"#,
        )
        .unwrap();
        assert_eq!(
            parsed.kind,
            GeneratorKind::RandomStochastic { support: None }
        );
        assert_eq!(parsed.discount, 1.0);
    }
}
