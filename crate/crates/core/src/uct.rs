//! UCT and UCT-C over per-`(state, level)` visit statistics.
//!
//! A simulation walks from the root at level 0 to the horizon, choosing at
//! each visited `(y, l)` the action maximizing the variant's index, then adds
//! the trailing absolute-time sum `S(y, l) = Σ_{t≥l} γ^t r_t` to every visited
//! `(y, a, l)`. The estimate is the root average, i.e. the mean of all
//! rollout sums.
//!
//! - `Uct`: `Q(y,a,l) + sqrt(2 ln T(y,l) / T(y,a,l))`.
//! - `UctcDet`: `Q(y,a,l) + β_l T(y,l)^{p_l} / T(y,a,l)^{q_l}`.
//! - `UctcStoch`: as `UctcDet`, but `Q` is rebuilt from the empirical
//!   immediate-reward mean (weighted by `γ^l`) plus the empirical-frequency
//!   weighted sum of child values `V(z, l+1)`.
//!
//! The polynomial bonus is a reconstruction: only its shape (a polynomial in
//! the parent and arm counts with per-level constants) is pinned down, and the
//! defaults `β = 1, p = 1/4, q = 1/2` are a convention.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::mdp::{sample_reward, sample_transition, MdpModel};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UctVariant {
    Uct,
    UctcDet,
    UctcStoch,
}

impl UctVariant {
    pub fn needs_params(self) -> bool {
        !matches!(self, UctVariant::Uct)
    }
}

/// Per-level constants of the polynomial bonus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UctcParams {
    pub beta: Vec<f64>,
    pub exponent_parent: Vec<f64>,
    pub exponent_arm: Vec<f64>,
}

impl UctcParams {
    /// The same constants at every level.
    pub fn uniform(
        horizon: usize,
        beta: f64,
        exponent_parent: f64,
        exponent_arm: f64,
    ) -> Result<Self> {
        let p = Self {
            beta: vec![beta; horizon],
            exponent_parent: vec![exponent_parent; horizon],
            exponent_arm: vec![exponent_arm; horizon],
        };
        p.validate(horizon)?;
        Ok(p)
    }

    /// `β = 1`, `p = 1/4`, `q = 1/2` at every level.
    pub fn default_for(horizon: usize) -> Self {
        Self::uniform(horizon, 1.0, 0.25, 0.5).expect("default constants are in range")
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidConfig(msg));
        if self.beta.len() < horizon
            || self.exponent_parent.len() < horizon
            || self.exponent_arm.len() < horizon
        {
            return bad(format!("UCT-C constants must cover {horizon} levels"));
        }
        for l in 0..horizon {
            if !(self.beta[l] > 0.0 && self.beta[l].is_finite()) {
                return bad(format!("beta[{l}] = {} must be positive", self.beta[l]));
            }
            let p = self.exponent_parent[l];
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("exponent_parent[{l}] = {p} must be in (0, 1)"));
            }
            let q = self.exponent_arm[l];
            if !(q > 0.0 && q <= 1.0) {
                return bad(format!("exponent_arm[{l}] = {q} must be in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// `β_l · t_parent^{p_l} / t_arm^{q_l}`; callers handle `t_arm = 0`.
pub fn uctc_bonus(params: &UctcParams, level: usize, t_parent: u64, t_arm: u64) -> f64 {
    debug_assert!(t_arm >= 1 && t_parent >= t_arm);
    params.beta[level] * (t_parent as f64).powf(params.exponent_parent[level])
        / (t_arm as f64).powf(params.exponent_arm[level])
}

/// Visit statistics of one `(state, level)` node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub visits: u64,
    pub action_counts: Vec<u64>,
    /// Σ of trailing sums over visits that took the action.
    pub action_sums: Vec<f64>,
    /// Stochastic variant only: Σ of immediate rewards per action.
    pub reward_sums: Vec<f64>,
    /// Stochastic variant only: next-state counts per action.
    pub child_counts: Vec<BTreeMap<usize, u64>>,
}

impl NodeStats {
    fn new(num_actions: usize) -> Self {
        Self {
            visits: 0,
            action_counts: vec![0; num_actions],
            action_sums: vec![0.0; num_actions],
            reward_sums: vec![0.0; num_actions],
            child_counts: vec![BTreeMap::new(); num_actions],
        }
    }

    /// `V^n(y, l)`.
    pub fn value(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.action_sums.iter().sum::<f64>() / self.visits as f64)
    }

    /// `Q^n(y, a, l)`.
    pub fn action_value(&self, a: usize) -> Option<f64> {
        (self.action_counts[a] > 0).then(|| self.action_sums[a] / self.action_counts[a] as f64)
    }
}

/// Counters backing the complexity comparison.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeMetrics {
    pub simulations: u64,
    pub node_count: usize,
    /// Distinct states stored at each level.
    pub states_per_level: Vec<usize>,
    /// `node_count × |A|` statistics slots.
    pub memory_proxy: usize,
    pub nodes_created: u64,
    pub node_updates: u64,
    pub index_evaluations: u64,
    /// Child terms summed inside stochastic-variant action values.
    pub weighted_sum_terms: u64,
    /// `nodes_created + node_updates + weighted_sum_terms`.
    pub update_work: u64,
}

/// One row of a tree dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDump {
    pub level: usize,
    pub state: usize,
    pub visits: u64,
    pub action_counts: Vec<u64>,
    pub action_values: Vec<Option<f64>>,
}

/// Tree of `(state, level)` statistics shared by all UCT variants.
#[derive(Debug, Clone)]
pub struct UctTreeStats {
    nodes: HashMap<(usize, usize), NodeStats>,
    n: u64,
    num_actions: usize,
    horizon: usize,
    discount: f64,
    v_max: f64,
    q_max: f64,
    i_uct_max: f64,
    nodes_created: u64,
    node_updates: u64,
    index_evaluations: u64,
    weighted_sum_terms: u64,
}

impl UctTreeStats {
    /// Constants: `V_max = Q_max = H + 1`,
    /// `I_max = Q_max + sqrt(2 ln n_max) + 1`, plus the largest bonus an arm
    /// can collect while its node still has untried actions, so untried
    /// actions always win.
    pub fn new(model: &MdpModel, n_max: u64, params: Option<&UctcParams>) -> Self {
        let horizon = model.horizon();
        let na = model.num_actions();
        let q_max = horizon as f64 + 1.0;
        let early_bonus = params.map_or(0.0, |p| {
            (0..horizon)
                .map(|l| p.beta[l] * (na as f64).powf(p.exponent_parent[l]))
                .fold(0.0, f64::max)
        });
        Self {
            nodes: HashMap::new(),
            n: 0,
            num_actions: na,
            horizon,
            discount: model.discount(),
            v_max: q_max,
            q_max,
            i_uct_max: q_max + (2.0 * (n_max.max(2) as f64).ln()).sqrt() + 1.0 + early_bonus,
            nodes_created: 0,
            node_updates: 0,
            index_evaluations: 0,
            weighted_sum_terms: 0,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn i_uct_max(&self) -> f64 {
        self.i_uct_max
    }

    pub fn node(&self, y: usize, level: usize) -> Option<&NodeStats> {
        self.nodes.get(&(y, level))
    }

    pub fn nodes(&self) -> impl Iterator<Item = ((usize, usize), &NodeStats)> {
        self.nodes.iter().map(|(&k, v)| (k, v))
    }

    /// `Q^n(y, a, l)` as a plain sample average.
    pub fn action_value(&self, y: usize, a: usize, level: usize) -> Option<f64> {
        self.node(y, level).and_then(|n| n.action_value(a))
    }

    /// `V^n(y, l)`, or `V_max` for an unvisited node.
    pub fn node_value(&self, y: usize, level: usize) -> f64 {
        self.node(y, level)
            .and_then(NodeStats::value)
            .unwrap_or(self.v_max)
    }

    /// UCT index: `Q + sqrt(2 ln T(y,l) / T(y,a,l))`, or `I_max` if untried.
    pub fn uct_index(&self, y: usize, a: usize, level: usize) -> f64 {
        match self.node(y, level) {
            Some(node) if node.action_counts[a] > 0 => {
                let t = node.action_counts[a] as f64;
                node.action_sums[a] / t + (2.0 * (node.visits as f64).ln() / t).sqrt()
            }
            _ => self.i_uct_max,
        }
    }

    /// UCT-C index on a deterministic model.
    pub fn uctc_det_index(&self, params: &UctcParams, y: usize, a: usize, level: usize) -> f64 {
        match self.node(y, level) {
            Some(node) if node.action_counts[a] > 0 => {
                let t = node.action_counts[a];
                node.action_sums[a] / t as f64 + uctc_bonus(params, level, node.visits, t)
            }
            _ => self.i_uct_max,
        }
    }

    /// Stochastic-variant action value without the bonus, and the number of
    /// child terms it summed.
    fn stochastic_q(&self, node: &NodeStats, a: usize, level: usize) -> (f64, u64) {
        let t = node.action_counts[a] as f64;
        let immediate = node.reward_sums[a] / t * self.discount.powi(level as i32);
        if level + 1 == self.horizon {
            return (immediate, 0);
        }
        let children = &node.child_counts[a];
        let future: f64 = children
            .iter()
            .map(|(&z, &count)| count as f64 / t * self.node_value(z, level + 1))
            .sum();
        (immediate + future, children.len() as u64)
    }

    /// UCT-C index with the weighted-sum action value.
    pub fn uctc_stoch_index(&self, params: &UctcParams, y: usize, a: usize, level: usize) -> f64 {
        match self.node(y, level) {
            Some(node) if node.action_counts[a] > 0 => {
                let (q, _) = self.stochastic_q(node, a, level);
                q + uctc_bonus(params, level, node.visits, node.action_counts[a])
            }
            _ => self.i_uct_max,
        }
    }

    fn choose_action(
        &mut self,
        variant: UctVariant,
        params: Option<&UctcParams>,
        y: usize,
        level: usize,
    ) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        let mut terms = 0;
        for a in 0..self.num_actions {
            let value = match (variant, self.nodes.get(&(y, level))) {
                (_, None) => self.i_uct_max,
                (_, Some(node)) if node.action_counts[a] == 0 => self.i_uct_max,
                (UctVariant::Uct, _) => self.uct_index(y, a, level),
                (UctVariant::UctcDet, _) => {
                    self.uctc_det_index(params.expect("checked by caller"), y, a, level)
                }
                (UctVariant::UctcStoch, Some(node)) => {
                    let p = params.expect("checked by caller");
                    let (q, k) = self.stochastic_q(node, a, level);
                    terms += k;
                    q + uctc_bonus(p, level, node.visits, node.action_counts[a])
                }
            };
            if value > best_value {
                best = a;
                best_value = value;
            }
        }
        self.index_evaluations += self.num_actions as u64;
        self.weighted_sum_terms += terms;
        best
    }

    /// Runs one simulation from the root and returns its rollout sum.
    pub fn simulate_once(
        &mut self,
        model: &MdpModel,
        variant: UctVariant,
        params: Option<&UctcParams>,
        rng: &mut RngStream,
    ) -> Result<f64> {
        if variant.needs_params() {
            match params {
                Some(p) => p.validate(self.horizon)?,
                None => {
                    return Err(LabError::InvalidConfig(format!(
                        "{variant:?} requires UCT-C constants"
                    )))
                }
            }
        }
        let horizon = self.horizon;
        let mut path = Vec::with_capacity(horizon);
        let mut y = model.initial_state();
        for level in 0..horizon {
            let a = self.choose_action(variant, params, y, level);
            let r = sample_reward(model, y, a, rng);
            let z = sample_transition(model, y, a, rng);
            path.push((y, a, r, z));
            y = z;
        }

        let mut trailing = vec![0.0; horizon + 1];
        for (level, &(_, _, r, _)) in path.iter().enumerate().rev() {
            trailing[level] = self.discount.powi(level as i32) * r + trailing[level + 1];
        }

        let stochastic = variant == UctVariant::UctcStoch;
        let na = self.num_actions;
        for (level, &(y, a, r, z)) in path.iter().enumerate() {
            let node = self
                .nodes
                .entry((y, level))
                .or_insert_with(|| NodeStats::new(na));
            if node.visits == 0 {
                self.nodes_created += 1;
            }
            node.visits += 1;
            node.action_counts[a] += 1;
            node.action_sums[a] += trailing[level];
            if stochastic {
                node.reward_sums[a] += r;
                *node.child_counts[a].entry(z).or_insert(0) += 1;
            }
            self.node_updates += 1;
        }
        self.n += 1;
        let floor = self.q_max + (2.0 * (self.n.max(2) as f64).ln()).sqrt();
        if self.i_uct_max <= floor {
            self.i_uct_max = floor + 1.0;
        }
        Ok(trailing[0])
    }

    /// `V^n(x, 0)`: the mean of all rollout sums.
    pub fn estimate(&self, model: &MdpModel) -> Result<f64> {
        self.node(model.initial_state(), 0)
            .and_then(NodeStats::value)
            .ok_or(LabError::UndefinedEstimate)
    }

    pub fn metrics(&self) -> TreeMetrics {
        let mut states_per_level = vec![0; self.horizon];
        for &(_, level) in self.nodes.keys() {
            states_per_level[level] += 1;
        }
        TreeMetrics {
            simulations: self.n,
            node_count: self.nodes.len(),
            states_per_level,
            memory_proxy: self.nodes.len() * self.num_actions,
            nodes_created: self.nodes_created,
            node_updates: self.node_updates,
            index_evaluations: self.index_evaluations,
            weighted_sum_terms: self.weighted_sum_terms,
            update_work: self.nodes_created + self.node_updates + self.weighted_sum_terms,
        }
    }

    /// Every node sorted by `(level, state)`.
    pub fn dump(&self) -> Vec<NodeDump> {
        let mut rows: Vec<NodeDump> = self
            .nodes
            .iter()
            .map(|(&(state, level), node)| NodeDump {
                level,
                state,
                visits: node.visits,
                action_counts: node.action_counts.clone(),
                action_values: (0..self.num_actions)
                    .map(|a| node.action_value(a))
                    .collect(),
            })
            .collect();
        rows.sort_by_key(|r| (r.level, r.state));
        rows
    }
}
