use serde::{Deserialize, Serialize};

use super::MdpModel;
use crate::error::{LabError, Result};

/// A non-stationary deterministic policy: one state-to-action map per level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Policy {
    horizon: usize,
    num_states: usize,
    /// Entry `(l, y)` at `l * num_states + y`.
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        actions: Vec<usize>,
    ) -> Result<Self> {
        if actions.len() != horizon * num_states {
            return Err(LabError::InvalidConfig(format!(
                "policy table has {} entries, expected {}x{}",
                actions.len(),
                horizon,
                num_states
            )));
        }
        if let Some(bad) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(LabError::InvalidConfig(format!(
                "policy action {bad} out of range"
            )));
        }
        Ok(Self {
            horizon,
            num_states,
            actions,
        })
    }

    /// The policy that plays `action` everywhere.
    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        Self {
            horizon,
            num_states,
            actions: vec![action; horizon * num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// `π_l(y)`.
    pub fn action(&self, level: usize, state: usize) -> usize {
        self.actions[level * self.num_states + state]
    }

    pub fn set_action(&mut self, level: usize, state: usize, action: usize) {
        self.actions[level * self.num_states + state] = action;
    }

    pub fn table(&self) -> &[usize] {
        &self.actions
    }
}

/// Upper limit on how many policies may be enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationCap(pub u64);

impl Default for EnumerationCap {
    fn default() -> Self {
        EnumerationCap(1_000_000)
    }
}

/// The set `Π_h` for a model, optionally with only some entries left free.
#[derive(Debug, Clone)]
pub struct PolicySpace {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    /// Table positions that vary, most significant first. Others stay at 0.
    free: Vec<usize>,
}

impl PolicySpace {
    /// All `h`-horizon policies over the model's states and actions.
    pub fn full(model: &MdpModel, horizon: usize) -> Self {
        Self {
            horizon,
            num_states: model.num_states(),
            num_actions: model.num_actions(),
            free: (0..horizon * model.num_states()).collect(),
        }
    }

    /// Policies that vary only at the listed `(level, state)` entries.
    pub fn restricted(model: &MdpModel, horizon: usize, entries: &[(usize, usize)]) -> Self {
        let n = model.num_states();
        let mut free: Vec<usize> = entries.iter().map(|&(l, y)| l * n + y).collect();
        free.sort_unstable();
        free.dedup();
        Self {
            horizon,
            num_states: n,
            num_actions: model.num_actions(),
            free,
        }
    }

    /// `|A|^(free entries)` as a float; never overflows.
    pub fn size(&self) -> f64 {
        (self.num_actions as f64).powf(self.free.len() as f64)
    }

    /// Exact size when it fits in a `u64`.
    pub fn exact_size(&self) -> Option<u64> {
        let mut acc: u64 = 1;
        for _ in 0..self.free.len() {
            acc = acc.checked_mul(self.num_actions as u64)?;
        }
        Some(acc)
    }

    fn describe(&self) -> String {
        format!("{}^{}", self.num_actions, self.free.len())
    }

    /// Errors unless the space fits under `cap`.
    pub fn check_cap(&self, cap: EnumerationCap) -> Result<u64> {
        match self.exact_size() {
            Some(k) if k <= cap.0 => Ok(k),
            _ => Err(LabError::Sizing(format!(
                "policy set of size |A|^(|X|H) = {} (~{:.3e}) exceeds enumeration cap {}",
                self.describe(),
                self.size(),
                cap.0
            ))),
        }
    }

    /// Lazily walks the space in canonical order: level-major, then state,
    /// then action, with the first entry most significant.
    pub fn iter(&self) -> PolicyIter {
        PolicyIter {
            current: Some(Policy::constant(self.horizon, self.num_states, 0)),
            free: self.free.clone(),
            num_actions: self.num_actions,
        }
    }
}

/// Iterator over a [`PolicySpace`].
#[derive(Debug, Clone)]
pub struct PolicyIter {
    current: Option<Policy>,
    free: Vec<usize>,
    num_actions: usize,
}

impl Iterator for PolicyIter {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        let out = self.current.clone()?;
        let mut advanced = false;
        if let Some(cur) = self.current.as_mut() {
            for &pos in self.free.iter().rev() {
                if cur.actions[pos] + 1 < self.num_actions {
                    cur.actions[pos] += 1;
                    advanced = true;
                    break;
                }
                cur.actions[pos] = 0;
            }
        }
        if !advanced {
            self.current = None;
        }
        Some(out)
    }
}

/// Every `H`-horizon policy of the model, in canonical order.
pub fn enumerate_policies(model: &MdpModel, cap: EnumerationCap) -> Result<Vec<Policy>> {
    let space = PolicySpace::full(model, model.horizon());
    let k = space.check_cap(cap)?;
    let mut out = Vec::with_capacity(k as usize);
    out.extend(space.iter());
    Ok(out)
}
