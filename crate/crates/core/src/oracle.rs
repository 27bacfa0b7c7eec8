//! Exact ground truth: backward induction, exact policy evaluation, brute-force
//! enumeration over `Π_H`, and the gap quantities that drive the bounds.
//!
//! Backward induction works in remaining-horizon form (`V*_h`, discount per
//! remaining step). Planners accumulate absolute-time sums `Σ_{t≥l} γ^t r_t`,
//! so [`ValueTable::level_value`] exposes the level-anchored `γ^l · V*_{H-l}`
//! for direct comparison.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::mdp::{EnumerationCap, MdpModel, Policy, PolicySpace};

/// Values within this distance of the maximum count as optimal.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-10;

/// Tolerance used when collecting maximizing actions.
pub const ACTION_TIE_TOLERANCE: f64 = 1e-12;

/// Output of backward induction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    horizon: usize,
    discount: f64,
    /// `values[h][y] = V*_h(y)` for `h = 0..=H`.
    values: Vec<Vec<f64>>,
    /// `optimal_actions[l][y]`: maximizers at level `l` with `H - l` steps left.
    optimal_actions: Vec<Vec<Vec<usize>>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `V*_h(y)`.
    pub fn value_to_go(&self, h: usize, y: usize) -> f64 {
        self.values[h][y]
    }

    /// `V*_H(y)`.
    pub fn optimal_value(&self, y: usize) -> f64 {
        self.values[self.horizon][y]
    }

    /// `γ^l · V*_{H-l}(y)`, on the same scale as trailing rollout sums.
    pub fn level_value(&self, level: usize, y: usize) -> f64 {
        self.discount.powi(level as i32) * self.values[self.horizon - level][y]
    }

    pub fn optimal_actions(&self, level: usize, y: usize) -> &[usize] {
        &self.optimal_actions[level][y]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// An optimal policy taking the lowest maximizing action everywhere.
    pub fn greedy_policy(&self) -> Policy {
        let ns = self.values[0].len();
        let mut pi = Policy::constant(self.horizon, ns, 0);
        for l in 0..self.horizon {
            for y in 0..ns {
                pi.set_action(l, y, self.optimal_actions[l][y][0]);
            }
        }
        pi
    }
}

fn q_value(model: &MdpModel, next: &[f64], y: usize, a: usize) -> f64 {
    let expected_next: f64 = model
        .transition_row(y, a)
        .iter()
        .zip(next)
        .map(|(p, v)| p * v)
        .sum();
    model.mean_reward(y, a) + model.discount() * expected_next
}

/// Exact `V*_h(y)` for every `h ≤ H` via the Bellman optimality recursion.
pub fn backward_induction(model: &MdpModel) -> Result<ValueTable> {
    model.ensure_valid()?;
    let (ns, na, horizon) = (model.num_states(), model.num_actions(), model.horizon());
    let mut values = vec![vec![0.0; ns]];
    let mut optimal_actions = vec![Vec::new(); horizon];
    for h in 1..=horizon {
        let next = &values[h - 1];
        let mut current = vec![0.0; ns];
        let mut argmax = Vec::with_capacity(ns);
        for (y, slot) in current.iter_mut().enumerate() {
            let q: Vec<f64> = (0..na).map(|a| q_value(model, next, y, a)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            *slot = best;
            argmax.push(
                (0..na)
                    .filter(|&a| q[a] >= best - ACTION_TIE_TOLERANCE)
                    .collect::<Vec<_>>(),
            );
        }
        values.push(current);
        optimal_actions[horizon - h] = argmax;
    }
    Ok(ValueTable {
        horizon,
        discount: model.discount(),
        values,
        optimal_actions,
    })
}

/// `V^π_h(x)` over the policy's own horizon, by forward propagation of the
/// state distribution along the chain the policy induces.
pub fn exact_policy_value(model: &MdpModel, pi: &Policy, x: usize) -> f64 {
    let ns = model.num_states();
    let mut dist = vec![0.0; ns];
    dist[x] = 1.0;
    let mut weight = 1.0;
    let mut total = 0.0;
    for t in 0..pi.horizon() {
        let mut next = vec![0.0; ns];
        for (y, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let a = pi.action(t, y);
            total += weight * mass * model.mean_reward(y, a);
            for (z, &p) in model.transition_row(y, a).iter().enumerate() {
                next[z] += mass * p;
            }
        }
        dist = next;
        weight *= model.discount();
    }
    total
}

/// `V^π_h(y)` for every start state at once, by backward evaluation.
pub fn policy_values_to_go(model: &MdpModel, pi: &Policy) -> Vec<f64> {
    let ns = model.num_states();
    let mut next = vec![0.0; ns];
    for t in (0..pi.horizon()).rev() {
        next = (0..ns)
            .map(|y| q_value(model, &next, y, pi.action(t, y)))
            .collect();
    }
    next
}

/// Brute-force optimum over `Π_H`.
#[derive(Debug, Clone)]
pub struct BruteForce {
    pub value: f64,
    /// Every maximizing policy, canonical order.
    pub optimal_policies: Vec<Policy>,
    /// Indices of the maximizers in canonical order.
    pub optimal_indices: Vec<usize>,
    /// `V^π_H(x)` for every policy, canonical order.
    pub policy_values: Vec<f64>,
}

/// Maximizes [`exact_policy_value`] over every policy in `Π_H`.
pub fn brute_force_optimal_value(
    model: &MdpModel,
    x: usize,
    cap: EnumerationCap,
) -> Result<BruteForce> {
    model.ensure_valid()?;
    let space = PolicySpace::full(model, model.horizon());
    space.check_cap(cap)?;
    let mut policy_values = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for pi in space.iter() {
        let v = exact_policy_value(model, &pi, x);
        best = best.max(v);
        policy_values.push(v);
    }
    let optimal_indices: Vec<usize> = policy_values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= best - OPTIMALITY_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    let mut optimal_policies = Vec::with_capacity(optimal_indices.len());
    let mut wanted = optimal_indices.iter().peekable();
    for (i, pi) in space.iter().enumerate() {
        match wanted.peek() {
            Some(&&j) if j == i => {
                optimal_policies.push(pi);
                wanted.next();
            }
            None => break,
            _ => {}
        }
    }
    Ok(BruteForce {
        value: best,
        optimal_policies,
        optimal_indices,
        policy_values,
    })
}

/// A gap that may be unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum GapValue {
    Value(f64),
    /// Every candidate has zero gap; the minimum over positive gaps is empty.
    NoSuboptimal,
    /// Enumeration would exceed the cap.
    Skipped,
}

impl GapValue {
    pub fn value(&self) -> Option<f64> {
        match *self {
            GapValue::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// `Δ^h_min` at one remaining horizon `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGap {
    pub h: usize,
    /// `min_y` over every state (the default reading).
    pub all_states: GapValue,
    /// `min_y` over states reachable from the root at level `H - h`.
    pub reachable: GapValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub optimal_value: f64,
    /// `Δ_π` for every policy in canonical order, when enumeration fits.
    pub per_policy_gaps: Option<Vec<f64>>,
    pub optimal_policy_count: Option<usize>,
    pub delta_min: GapValue,
    /// Entries for `h = 1..H-1`.
    pub per_level_delta_min: Vec<LevelGap>,
    /// The optimal action is unique at every node an optimal policy reaches,
    /// i.e. the optimal policy is unique up to entries that cannot affect
    /// `V^π_H(x)`.
    pub unique_optimal: bool,
}

impl GapReport {
    /// Positive root gaps, when enumerated.
    pub fn positive_gaps(&self) -> Option<Vec<f64>> {
        self.per_policy_gaps
            .as_ref()
            .map(|g| g.iter().copied().filter(|&d| d > 0.0).collect())
    }

    /// `min_h (Δ^h_min)^2` over levels with a defined all-states gap.
    pub fn min_squared_level_gap(&self) -> Option<f64> {
        self.per_level_delta_min
            .iter()
            .filter_map(|g| g.all_states.value())
            .map(|d| d * d)
            .min_by(f64::total_cmp)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GapOptions {
    pub cap: EnumerationCap,
}

fn snap_gap(gap: f64) -> f64 {
    if gap < OPTIMALITY_TOLERANCE {
        0.0
    } else {
        gap
    }
}

fn min_positive(gaps: impl Iterator<Item = f64>) -> GapValue {
    gaps.filter(|&g| g > 0.0)
        .min_by(f64::total_cmp)
        .map_or(GapValue::NoSuboptimal, GapValue::Value)
}

/// States reachable after exactly `t` steps from `start`, for `t = 0..steps`.
fn reachable_from(model: &MdpModel, start: &[usize], steps: usize) -> Vec<Vec<usize>> {
    let ns = model.num_states();
    let mut out = Vec::with_capacity(steps);
    let mut current = start.to_vec();
    for _ in 0..steps {
        out.push(current.clone());
        let mut on = vec![false; ns];
        for &y in &current {
            for a in 0..model.num_actions() {
                for (z, &p) in model.transition_row(y, a).iter().enumerate() {
                    if p > 0.0 {
                        on[z] = true;
                    }
                }
            }
        }
        current = (0..ns).filter(|&z| on[z]).collect();
    }
    out
}

fn level_gap(
    model: &MdpModel,
    table: &ValueTable,
    h: usize,
    starts: &[usize],
    space: &PolicySpace,
    cap: EnumerationCap,
) -> GapValue {
    if space.check_cap(cap).is_err() {
        return GapValue::Skipped;
    }
    let sub = model.with_horizon(h);
    min_positive(space.iter().map(|pi| {
        let v = policy_values_to_go(&sub, &pi);
        let worst_state_gap = starts
            .iter()
            .map(|&y| table.value_to_go(h, y) - v[y])
            .fold(f64::INFINITY, f64::min);
        snap_gap(worst_state_gap)
    }))
}

fn optimal_policy_is_unique(model: &MdpModel, table: &ValueTable, x: usize) -> bool {
    let ns = model.num_states();
    let mut frontier = vec![x];
    for l in 0..model.horizon() {
        let mut on = vec![false; ns];
        for &y in &frontier {
            let acts = table.optimal_actions(l, y);
            if acts.len() > 1 {
                return false;
            }
            for (z, &p) in model.transition_row(y, acts[0]).iter().enumerate() {
                if p > 0.0 {
                    on[z] = true;
                }
            }
        }
        frontier = (0..ns).filter(|&z| on[z]).collect();
    }
    true
}

/// Root gaps `Δ_π`, `Δ_min`, per-level `Δ^h_min` and the uniqueness flag.
pub fn compute_gaps(model: &MdpModel, x: usize, options: GapOptions) -> Result<GapReport> {
    let table = backward_induction(model)?;
    let root = model.with_initial_state(x);

    let (per_policy_gaps, optimal_policy_count, delta_min) =
        match brute_force_optimal_value(&root, x, options.cap) {
            Ok(bf) => {
                let gaps: Vec<f64> = bf
                    .policy_values
                    .iter()
                    .map(|v| snap_gap(bf.value - v))
                    .collect();
                let dmin = min_positive(gaps.iter().copied());
                (Some(gaps), Some(bf.optimal_indices.len()), dmin)
            }
            Err(LabError::Sizing(_)) => (None, None, GapValue::Skipped),
            Err(e) => return Err(e),
        };

    let horizon = model.horizon();
    let reach = root.reachable_by_level();
    let mut per_level_delta_min = Vec::new();
    for h in 1..horizon {
        let all: Vec<usize> = (0..model.num_states()).collect();
        let all_space = PolicySpace::full(model, h);
        let all_states = level_gap(model, &table, h, &all, &all_space, options.cap);

        let starts = &reach[horizon - h];
        let entries: Vec<(usize, usize)> = reachable_from(model, starts, h)
            .into_iter()
            .enumerate()
            .flat_map(|(t, ys)| ys.into_iter().map(move |y| (t, y)))
            .collect();
        let reach_space = PolicySpace::restricted(model, h, &entries);
        let reachable = level_gap(model, &table, h, starts, &reach_space, options.cap);
        per_level_delta_min.push(LevelGap {
            h,
            all_states,
            reachable,
        });
    }

    let nothing_feasible = per_policy_gaps.is_none()
        && per_level_delta_min
            .iter()
            .all(|g| g.all_states == GapValue::Skipped && g.reachable == GapValue::Skipped);
    if nothing_feasible {
        return Err(LabError::Sizing(format!(
            "no gap quantity fits the enumeration cap {}",
            options.cap.0
        )));
    }

    Ok(GapReport {
        optimal_value: table.optimal_value(x),
        per_policy_gaps,
        optimal_policy_count,
        delta_min,
        per_level_delta_min,
        unique_optimal: optimal_policy_is_unique(model, &table, x),
    })
}
