//! Closed-form error bounds for UCB1 over policies and for UCT-C, and the
//! crossover search between them.
//!
//! The UCB1 bound comes in two shapes:
//!
//! - exact sum over positive policy gaps,
//!   `Σ [8 ln n / (Δ n) + (1 + π²/3) Δ / n]`;
//! - simplified, `C · (K / Δ_min) · ln n / n` with `K = |A|^{|X|H}`, or
//!   `K = min(|A|, |X|)^H` for deterministic models.
//!
//! The UCT-C bound is `H |A| / min_h (Δ^h_min)² / √n`, multiplied by
//! `min(|X|, ⌊1/β⌋)` when a transition-probability floor `β` is given.
//! Its hidden constant is taken as 1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::oracle::GapReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantMode {
    /// Auer et al.'s constants: 8 on the log term, `1 + π²/3` on the rest.
    #[default]
    ExplicitAuer,
    /// Leading constant 1 and no lower-order term.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ucb1Mode {
    #[default]
    ExactSum,
    Simplified,
}

/// How to read a single gap figure quoted for both bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapReading {
    /// The figure is `min_h (Δ^h_min)²` itself.
    #[default]
    Squared,
    /// The figure is a gap `Δ`; the squared level gap is `Δ²`.
    Gap,
}

impl GapReading {
    pub fn squared_level_gap(self, figure: f64) -> f64 {
        match self {
            GapReading::Squared => figure,
            GapReading::Gap => figure * figure,
        }
    }
}

/// The gap quantities the bounds consume.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GapSummary {
    /// Strictly positive policy gaps (exact-sum mode only).
    pub policy_gaps: Option<Vec<f64>>,
    pub delta_min: Option<f64>,
    pub min_squared_level_gap: Option<f64>,
}

impl GapSummary {
    pub fn from_report(report: &GapReport) -> Self {
        Self {
            policy_gaps: report.positive_gaps(),
            delta_min: report.delta_min.value(),
            min_squared_level_gap: report.min_squared_level_gap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub horizon: usize,
    pub num_actions: usize,
    pub num_states: usize,
    pub discount: f64,
    pub gaps: GapSummary,
    /// Lower bound on positive transition probabilities.
    pub beta: Option<f64>,
    pub constant_mode: ConstantMode,
    pub deterministic: bool,
}

impl BoundInputs {
    fn check(&self) -> Result<()> {
        if let Some(b) = self.beta {
            if !(b > 0.0 && b <= 1.0) {
                return Err(LabError::UndefinedBound(format!(
                    "beta = {b} is outside (0, 1]"
                )));
            }
        }
        if self.horizon == 0 || self.num_actions == 0 || self.num_states == 0 {
            return Err(LabError::UndefinedBound("empty model dimensions".into()));
        }
        Ok(())
    }

    /// Number of arms in the simplified UCB1 bound.
    pub fn arm_count(&self) -> f64 {
        let h = self.horizon as f64;
        if self.deterministic {
            (self.num_actions.min(self.num_states) as f64).powf(h)
        } else {
            (self.num_actions as f64).powf(self.num_states as f64 * h)
        }
    }

    /// Largest possible return, `Σ_{t<H} γ^t`.
    fn max_gap(&self) -> f64 {
        (0..self.horizon)
            .map(|t| self.discount.powi(t as i32))
            .sum()
    }

    /// The `min(|X|, ⌊1/β⌋)` factor, or 1 without `β`.
    pub fn stochastic_factor(&self) -> f64 {
        match self.beta {
            // The epsilon keeps ⌊1/0.2⌋ at 5 despite rounding.
            Some(b) => ((1.0 / b + 1e-9).floor()).min(self.num_states as f64),
            None => 1.0,
        }
    }
}

fn check_n(n: f64) -> Result<()> {
    if n.is_finite() && n >= 1.0 {
        Ok(())
    } else {
        Err(LabError::UndefinedBound(format!(
            "step n = {n} must be at least 1"
        )))
    }
}

/// Upper bound on `|V* - E[estimate]|` for UCB1 over policies after `n` steps.
///
/// Exact-sum mode holds for `n ≥ |Π_H|`; that precondition is not checked.
pub fn ucb1_error_bound(inputs: &BoundInputs, mode: Ucb1Mode, n: f64) -> Result<f64> {
    inputs.check()?;
    check_n(n)?;
    let tail = 1.0 + PI * PI / 3.0;
    match mode {
        Ucb1Mode::ExactSum => {
            let gaps = inputs.gaps.policy_gaps.as_ref().ok_or_else(|| {
                LabError::UndefinedBound("exact-sum mode needs the policy gaps".into())
            })?;
            let (c_log, c_tail) = match inputs.constant_mode {
                ConstantMode::ExplicitAuer => (8.0, tail),
                ConstantMode::Unit => (1.0, 0.0),
            };
            Ok(gaps
                .iter()
                .filter(|&&d| d > 0.0)
                .map(|&d| c_log * n.ln() / (d * n) + c_tail * d / n)
                .sum())
        }
        Ucb1Mode::Simplified => {
            let Some(delta) = inputs.gaps.delta_min else {
                return Ok(0.0);
            };
            if delta <= 0.0 {
                return Err(LabError::UndefinedBound("Δ_min must be positive".into()));
            }
            let k = inputs.arm_count();
            Ok(match inputs.constant_mode {
                ConstantMode::Unit => k / delta * n.ln() / n,
                // Every term of the exact sum is dominated termwise.
                ConstantMode::ExplicitAuer => {
                    8.0 * k / delta * n.ln() / n + tail * k * inputs.max_gap() / n
                }
            })
        }
    }
}

/// UCT-C error bound with unit constant.
pub fn uctc_error_bound(inputs: &BoundInputs, n: f64) -> Result<f64> {
    inputs.check()?;
    check_n(n)?;
    let m = inputs
        .gaps
        .min_squared_level_gap
        .ok_or_else(|| LabError::UndefinedBound("missing min_h (Δ^h_min)²".into()))?;
    if m <= 0.0 {
        return Err(LabError::UndefinedBound(
            "min_h (Δ^h_min)² must be positive".into(),
        ));
    }
    let h = inputs.horizon as f64;
    let a = inputs.num_actions as f64;
    Ok(inputs.stochastic_factor() * h * a / m / n.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub n: f64,
    pub ucb1_bound: f64,
    pub uctc_bound: f64,
    pub difference: f64,
}

/// `points` values log-spaced over `[lo, hi]`, both ends included.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && points >= 2, "bad log grid");
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == points {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// Both bounds and their difference at every grid point.
pub fn difference_curve(
    ucb1: &BoundInputs,
    mode: Ucb1Mode,
    uctc: &BoundInputs,
    grid: &[f64],
) -> Result<Vec<BoundPoint>> {
    grid.iter()
        .map(|&n| {
            let u = ucb1_error_bound(ucb1, mode, n)?;
            let c = uctc_error_bound(uctc, n)?;
            Ok(BoundPoint {
                n,
                ucb1_bound: u,
                uctc_bound: c,
                difference: u - c,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for SearchRange {
    fn default() -> Self {
        Self {
            lo: 2.0,
            hi: 1e12,
            points: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    /// Smallest integer step at which the UCB1 bound is below the UCT-C bound.
    pub n_star: u64,
    /// Consecutive grid points bracketing `n_star`.
    pub bracket: (f64, f64),
}

/// Finds where the UCB1 bound drops below the UCT-C bound for good: a scan of
/// the log grid locates the last point with a nonnegative difference, then
/// integer bisection pins the sign change down inside the following step.
///
/// `ln n / √n` is unimodal, so for some constant ratios the difference is
/// briefly negative near `n = 2` before turning positive; that early dip is
/// not the crossover.
pub fn bound_crossover(
    ucb1: &BoundInputs,
    mode: Ucb1Mode,
    uctc: &BoundInputs,
    range: SearchRange,
) -> Result<Crossover> {
    let diff = |n: f64| -> Result<f64> {
        Ok(ucb1_error_bound(ucb1, mode, n)? - uctc_error_bound(uctc, n)?)
    };
    let grid = log_grid(range.lo, range.hi, range.points);
    let mut last_nonneg = None;
    for (i, &n) in grid.iter().enumerate() {
        if diff(n)? >= 0.0 {
            last_nonneg = Some(i);
        }
    }
    let Some(i) = last_nonneg else {
        return Ok(Crossover {
            n_star: grid[0].ceil() as u64,
            bracket: (grid[0], grid[0]),
        });
    };
    if i + 1 == grid.len() {
        return Err(LabError::UndefinedBound(format!(
            "no crossover on [{}, {}]",
            range.lo, range.hi
        )));
    }
    let (a, b) = (grid[i], grid[i + 1]);
    // Invariant: diff(lo) >= 0, diff(hi) < 0.
    let mut lo = a.floor() as u64;
    let mut hi = b.ceil() as u64;
    if diff(lo as f64)? < 0.0 {
        lo = a.ceil() as u64;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if diff(mid as f64)? < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Crossover {
        n_star: hi,
        bracket: (a, b),
    })
}

/// The deterministic instance of the figure: `|X| = 10, |A| = 2, H = 15`,
/// `Δ_min = 0.1`, with the squared level gap derived from `reading`.
/// Returns the UCB1 inputs (refined arm count, unit constant) and the UCT-C
/// inputs.
pub fn fig1_inputs(reading: GapReading) -> (BoundInputs, BoundInputs) {
    let figure = 0.1;
    let base = BoundInputs {
        horizon: 15,
        num_actions: 2,
        num_states: 10,
        discount: 1.0,
        gaps: GapSummary {
            policy_gaps: None,
            delta_min: Some(figure),
            min_squared_level_gap: Some(reading.squared_level_gap(figure)),
        },
        beta: None,
        constant_mode: ConstantMode::Unit,
        deterministic: true,
    };
    (base.clone(), base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inputs(gaps: GapSummary) -> BoundInputs {
        BoundInputs {
            horizon: 15,
            num_actions: 2,
            num_states: 10,
            discount: 1.0,
            gaps,
            beta: None,
            constant_mode: ConstantMode::ExplicitAuer,
            deterministic: true,
        }
    }

    fn single_gap(d: f64) -> GapSummary {
        GapSummary {
            policy_gaps: Some(vec![d]),
            delta_min: Some(d),
            min_squared_level_gap: Some(d * d),
        }
    }

    #[test]
    fn exact_sum_single_arm() {
        let b = ucb1_error_bound(&inputs(single_gap(0.5)), Ucb1Mode::ExactSum, 100.0).unwrap();
        assert!((b - 0.7582765704265769).abs() < 1e-12, "{b}");
    }

    #[test]
    fn exact_sum_empty_is_zero() {
        let g = GapSummary {
            policy_gaps: Some(vec![]),
            ..Default::default()
        };
        assert_eq!(
            ucb1_error_bound(&inputs(g), Ucb1Mode::ExactSum, 50.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn exact_sum_needs_gaps() {
        let g = GapSummary::default();
        assert!(ucb1_error_bound(&inputs(g), Ucb1Mode::ExactSum, 50.0).is_err());
    }

    #[test]
    fn simplified_refined_unit() {
        let (u, _) = fig1_inputs(GapReading::Squared);
        let b = ucb1_error_bound(&u, Ucb1Mode::Simplified, std::f64::consts::E).unwrap();
        assert!((b - 120546.7352830582).abs() < 1e-6, "{b}");
    }

    #[test]
    fn simplified_stochastic_uses_full_policy_count() {
        let mut u = inputs(single_gap(0.5));
        u.deterministic = false;
        u.horizon = 1;
        u.num_states = 3;
        assert_eq!(u.arm_count(), 8.0);
    }

    #[test]
    fn uctc_examples() {
        let (_, c) = fig1_inputs(GapReading::Squared);
        assert!((uctc_error_bound(&c, 1.0).unwrap() - 300.0).abs() < 1e-9);
        assert!((uctc_error_bound(&c, 4.0).unwrap() - 150.0).abs() < 1e-9);
        let mut s = c.clone();
        s.beta = Some(0.2);
        assert!((uctc_error_bound(&s, 1.0).unwrap() - 1500.0).abs() < 1e-9);
    }

    #[test]
    fn uctc_zero_gap_rejected() {
        let mut c = inputs(single_gap(0.5));
        c.gaps.min_squared_level_gap = Some(0.0);
        assert!(uctc_error_bound(&c, 10.0).is_err());
    }

    #[test]
    fn crossover_equal_constants_is_two() {
        // Unit constants with K/Δ_min = H|A|/m = 30.
        let u = BoundInputs {
            horizon: 1,
            num_actions: 3,
            num_states: 3,
            discount: 1.0,
            gaps: GapSummary {
                policy_gaps: None,
                delta_min: Some(0.1),
                min_squared_level_gap: Some(0.1),
            },
            beta: None,
            constant_mode: ConstantMode::Unit,
            deterministic: true,
        };
        let mut c = u.clone();
        c.num_actions = 30;
        c.gaps.min_squared_level_gap = Some(1.0);
        let x = bound_crossover(&u, Ucb1Mode::Simplified, &c, SearchRange::default()).unwrap();
        assert_eq!(x.n_star, 2);
    }

    #[test]
    fn fig1_crossover_matches_bisection_oracle() {
        let (u, c) = fig1_inputs(GapReading::Squared);
        let x = bound_crossover(&u, Ucb1Mode::Simplified, &c, SearchRange::default()).unwrap();
        assert_eq!(x.n_star, 476_343_261);
        assert!(x.bracket.0 <= x.n_star as f64 && x.n_star as f64 <= x.bracket.1.ceil());
    }

    #[test]
    fn fig1_crossover_gap_reading() {
        let (u, c) = fig1_inputs(GapReading::Gap);
        let x = bound_crossover(&u, Ucb1Mode::Simplified, &c, SearchRange::default()).unwrap();
        assert_eq!(x.n_star, 2_603_500);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(10.0, 1e10, 10);
        assert_eq!(g[0], 10.0);
        assert_eq!(g[9], 1e10);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn bounds_decrease_in_n(n in 3.0f64..1e9, d in 0.01f64..2.0) {
            let i = inputs(single_gap(d));
            for mode in [Ucb1Mode::ExactSum, Ucb1Mode::Simplified] {
                let a = ucb1_error_bound(&i, mode, n).unwrap();
                let b = ucb1_error_bound(&i, mode, n * 1.5).unwrap();
                prop_assert!(a > 0.0 && b < a);
            }
            let a = uctc_error_bound(&i, n).unwrap();
            prop_assert!(a > 0.0 && uctc_error_bound(&i, n * 1.5).unwrap() < a);
        }

        #[test]
        fn uctc_scaling(n in 1.0f64..1e9, k in 1.0f64..100.0, h in 1usize..20) {
            let mut i = inputs(single_gap(0.3));
            i.horizon = h;
            let a = uctc_error_bound(&i, n).unwrap();
            prop_assert!((uctc_error_bound(&i, n * k).unwrap() - a / k.sqrt()).abs() <= 1e-9 * a);
            i.horizon = 2 * h;
            prop_assert!((uctc_error_bound(&i, n).unwrap() - 2.0 * a).abs() <= 1e-9 * a);
        }

        #[test]
        fn ucb1_eventually_below_uctc(c1 in 1.0f64..1e4, m in 0.05f64..1.0) {
            let u = BoundInputs {
                horizon: 1,
                num_actions: 1,
                num_states: 1,
                discount: 1.0,
                gaps: GapSummary { policy_gaps: None, delta_min: Some(1.0 / c1), min_squared_level_gap: Some(m) },
                beta: None,
                constant_mode: ConstantMode::Unit,
                deterministic: true,
            };
            let range = SearchRange { lo: 2.0, hi: 1e14, points: 2000 };
            let x = bound_crossover(&u, Ucb1Mode::Simplified, &u, range).unwrap();
            for n in log_grid(x.n_star as f64, 1e14, 200) {
                prop_assert!(ucb1_error_bound(&u, Ucb1Mode::Simplified, n).unwrap()
                    < uctc_error_bound(&u, n).unwrap());
            }
        }
    }
}
