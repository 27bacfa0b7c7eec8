//! Seeded, replicated convergence runs against the exact oracle, and their
//! CSV/JSON output.
//!
//! Every `(algorithm, replication)` pair gets its own stream seeded with
//! `mix_seed(base_seed, replication, algorithm.id())`, so curves do not depend
//! on which other algorithms run or on the worker count. Pairs run on a
//! rayon pool and are reduced in `(algorithm, replication)` order.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ams::{ams_estimate, AmsConfig};
use crate::bounds::{
    bound_crossover, difference_curve, fig1_inputs, log_grid, BoundInputs, BoundPoint,
    ConstantMode, Crossover, GapReading, GapSummary, SearchRange, Ucb1Mode,
};
use crate::error::{LabError, Result};
use crate::mdp::{
    generate_mdp, nonstationarity_witness_mdp, EnumerationCap, GeneratorSpec, MdpModel,
};
use crate::oracle::{backward_induction, compute_gaps, GapOptions, GapReport};
use crate::rng::RngStream;
use crate::ucb1::{ArmSet, Ucb1State};
use crate::uct::{UctTreeStats, UctVariant, UctcParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ucb1,
    Uct,
    UctcDet,
    UctcStoch,
    Ams,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ucb1,
        Algorithm::Uct,
        Algorithm::UctcDet,
        Algorithm::UctcStoch,
        Algorithm::Ams,
    ];

    /// Stable stream id; never renumber.
    pub fn id(self) -> u64 {
        match self {
            Algorithm::Ucb1 => 1,
            Algorithm::Uct => 2,
            Algorithm::UctcDet => 3,
            Algorithm::UctcStoch => 4,
            Algorithm::Ams => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ucb1 => "ucb1",
            Algorithm::Uct => "uct",
            Algorithm::UctcDet => "uctc_det",
            Algorithm::UctcStoch => "uctc_stoch",
            Algorithm::Ams => "ams",
        }
    }

    fn tree_variant(self) -> Option<UctVariant> {
        match self {
            Algorithm::Uct => Some(UctVariant::Uct),
            Algorithm::UctcDet => Some(UctVariant::UctcDet),
            Algorithm::UctcStoch => Some(UctVariant::UctcStoch),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LabError;

    /// Case-insensitive; `-` and `_` are interchangeable (`UCTC-det`).
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| LabError::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Parses a comma-separated algorithm list.
pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    File(PathBuf),
    Generator { spec: GeneratorSpec, seed: u64 },
    NonstationarityWitness,
}

impl MdpSource {
    pub fn load(&self) -> Result<MdpModel> {
        match self {
            MdpSource::File(p) => MdpModel::load(p),
            MdpSource::Generator { spec, seed } => generate_mdp(spec, *seed),
            MdpSource::NonstationarityWitness => Ok(nonstationarity_witness_mdp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_replications() -> u64 {
    20
}

fn default_workers() -> usize {
    1
}

fn default_ams_samples() -> Vec<usize> {
    vec![50, 100, 200, 400]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    pub algorithms: Vec<Algorithm>,
    pub n_max: u64,
    /// Defaults to 20 log-spaced steps from 100 to `n_max`.
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to `UctcParams::default_for(H)`.
    #[serde(default)]
    pub uctc_params: Option<UctcParams>,
    #[serde(default)]
    pub arm_set: ArmSet,
    #[serde(default)]
    pub enumeration_cap: EnumerationCap,
    /// Samples per state for AMS; each value is one AMS checkpoint.
    #[serde(default = "default_ams_samples")]
    pub ams_samples: Vec<usize>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Also keep every rollout sum (small runs only).
    #[serde(default)]
    pub record_steps: bool,
}

impl ExperimentConfig {
    pub fn new(mdp: MdpSource, algorithms: Vec<Algorithm>, n_max: u64) -> Self {
        Self {
            mdp,
            algorithms,
            n_max,
            checkpoints: None,
            replications: default_replications(),
            base_seed: 0,
            uctc_params: None,
            arm_set: ArmSet::default(),
            enumeration_cap: EnumerationCap::default(),
            ams_samples: default_ams_samples(),
            workers: default_workers(),
            output_dir: None,
            format: OutputFormat::default(),
            record_steps: false,
        }
    }

    /// Reads a config, or the config embedded in a run manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let inner = match value.get("config") {
            Some(c) if value.get("version").is_some() => c.clone(),
            _ => value,
        };
        Ok(serde_json::from_value(inner)?)
    }

    pub fn resolved_checkpoints(&self) -> Vec<u64> {
        match &self.checkpoints {
            Some(c) => c.clone(),
            None => default_checkpoints(self.n_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidConfig(m));
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return bad("algorithm listed twice".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let needs_steps = self.algorithms.iter().any(|a| *a != Algorithm::Ams);
        if needs_steps {
            if self.n_max == 0 {
                return bad("n_max must be at least 1".into());
            }
            let c = self.resolved_checkpoints();
            if c.is_empty() || c[0] == 0 || c.windows(2).any(|w| w[0] >= w[1]) {
                return bad("checkpoints must be positive and strictly increasing".into());
            }
            if *c.last().unwrap() > self.n_max {
                return bad(format!(
                    "checkpoint {} exceeds n_max {}",
                    c.last().unwrap(),
                    self.n_max
                ));
            }
        }
        if self.algorithms.contains(&Algorithm::Ams) {
            let s = &self.ams_samples;
            if s.is_empty() || s.windows(2).any(|w| w[0] >= w[1]) {
                return bad("ams_samples must be non-empty and strictly increasing".into());
            }
        }
        Ok(())
    }
}

/// 20 log-spaced integer steps from 100 (or 1 for tiny runs) to `n_max`.
pub fn default_checkpoints(n_max: u64) -> Vec<u64> {
    if n_max == 0 {
        return Vec::new();
    }
    let lo = if n_max >= 100 { 100.0 } else { 1.0 };
    if n_max as f64 <= lo {
        return vec![n_max];
    }
    let mut c: Vec<u64> = log_grid(lo, n_max as f64, 20)
        .into_iter()
        .map(|x| x.round() as u64)
        .collect();
    c.dedup();
    *c.last_mut().unwrap() = n_max;
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    /// `|mean(estimate) - V*|`, the headline criterion.
    pub abs_mean_error: f64,
    /// `mean(|estimate - V*|)`.
    pub mean_abs_error: f64,
    /// Standard error of the mean estimate across replications.
    pub stderr: f64,
    pub mean_estimate: f64,
    /// Mean tree size (UCT variants) or sample work (AMS).
    pub nodes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub algorithm: Algorithm,
    pub points: Vec<CurvePoint>,
    /// `estimates[k][r]`: replication `r` at point `k`.
    pub estimates: Vec<Vec<f64>>,
}

/// What one `(algorithm, replication)` pair produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRun {
    pub estimates: Vec<f64>,
    pub nodes: Vec<Option<f64>>,
    /// Rollout sums in step order, when recorded.
    pub step_sums: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub optimal_value: f64,
    pub gaps: Option<GapReport>,
    pub curves: Vec<ErrorCurve>,
    /// Indexed like `curves`, then by replication.
    pub runs: Vec<Vec<ReplicationRun>>,
}

/// Runs one algorithm for one replication and reads the estimate at every
/// checkpoint (or every AMS sample size).
pub fn run_replication(
    model: &MdpModel,
    config: &ExperimentConfig,
    algorithm: Algorithm,
    replication: u64,
) -> Result<ReplicationRun> {
    let mut rng = RngStream::derive(config.base_seed, replication, algorithm.id());
    if algorithm == Algorithm::Ams {
        let mut estimates = Vec::new();
        let mut nodes = Vec::new();
        for &n in &config.ams_samples {
            let e = ams_estimate(
                model,
                model.initial_state(),
                0,
                &AmsConfig::new(n),
                &mut rng,
            )?;
            estimates.push(e.value);
            nodes.push(Some(e.work as f64));
        }
        return Ok(ReplicationRun {
            estimates,
            nodes,
            step_sums: None,
        });
    }

    let checkpoints = config.resolved_checkpoints();
    let mut step_sums = config
        .record_steps
        .then(|| Vec::with_capacity(config.n_max as usize));
    let mut estimates = Vec::with_capacity(checkpoints.len());
    let mut nodes = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    match algorithm.tree_variant() {
        None => {
            let mut state =
                Ucb1State::for_model(model, config.arm_set, config.enumeration_cap, config.n_max)?;
            for step in 1..=config.n_max {
                let (_, sum) = state.step(model, &mut rng);
                if let Some(s) = step_sums.as_mut() {
                    s.push(sum);
                }
                if next < checkpoints.len() && checkpoints[next] == step {
                    estimates.push(state.estimate()?);
                    nodes.push(None);
                    next += 1;
                }
            }
        }
        Some(variant) => {
            let params = match &config.uctc_params {
                Some(p) => p.clone(),
                None => UctcParams::default_for(model.horizon()),
            };
            let params = variant.needs_params().then_some(&params);
            let mut tree = UctTreeStats::new(model, config.n_max, params);
            for step in 1..=config.n_max {
                let sum = tree.simulate_once(model, variant, params, &mut rng)?;
                if let Some(s) = step_sums.as_mut() {
                    s.push(sum);
                }
                if next < checkpoints.len() && checkpoints[next] == step {
                    estimates.push(tree.estimate(model)?);
                    nodes.push(Some(tree.metrics().node_count as f64));
                    next += 1;
                }
            }
        }
    }
    Ok(ReplicationRun {
        estimates,
        nodes,
        step_sums,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean; 0 for a single value.
fn std_error(xs: &[f64]) -> f64 {
    let k = xs.len();
    if k < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

/// Aggregates replications at one point.
pub fn summarize_point(
    n: u64,
    estimates: &[f64],
    nodes: &[Option<f64>],
    optimal_value: f64,
) -> CurvePoint {
    let errors: Vec<f64> = estimates
        .iter()
        .map(|e| (e - optimal_value).abs())
        .collect();
    let m = mean(estimates);
    let node_values: Option<Vec<f64>> = nodes.iter().copied().collect();
    CurvePoint {
        n,
        abs_mean_error: (m - optimal_value).abs(),
        mean_abs_error: mean(&errors),
        stderr: std_error(estimates),
        mean_estimate: m,
        nodes: node_values.map(|v| mean(&v)),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let model = config.mdp.load()?;
    model.ensure_valid()?;
    let table = backward_induction(&model)?;
    let optimal_value = table.optimal_value(model.initial_state());
    let gaps = match compute_gaps(
        &model,
        model.initial_state(),
        GapOptions {
            cap: config.enumeration_cap,
        },
    ) {
        Ok(g) => Some(g),
        Err(LabError::Sizing(_)) => None,
        Err(e) => return Err(e),
    };

    let jobs: Vec<(Algorithm, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| (0..config.replications).map(move |r| (a, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| LabError::InvalidConfig(format!("worker pool: {e}")))?;
    let results: Vec<Result<ReplicationRun>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, r)| run_replication(&model, config, a, r))
            .collect()
    });

    let reps = config.replications as usize;
    let mut results = results.into_iter();
    let mut curves = Vec::new();
    let mut runs = Vec::new();
    for &algorithm in &config.algorithms {
        let alg_runs: Vec<ReplicationRun> = results.by_ref().take(reps).collect::<Result<_>>()?;
        let steps: Vec<u64> = if algorithm == Algorithm::Ams {
            config.ams_samples.iter().map(|&n| n as u64).collect()
        } else {
            config.resolved_checkpoints()
        };
        let mut points = Vec::with_capacity(steps.len());
        let mut estimates = Vec::with_capacity(steps.len());
        for (k, &n) in steps.iter().enumerate() {
            let est: Vec<f64> = alg_runs.iter().map(|r| r.estimates[k]).collect();
            let nodes: Vec<Option<f64>> = alg_runs.iter().map(|r| r.nodes[k]).collect();
            points.push(summarize_point(n, &est, &nodes, optimal_value));
            estimates.push(est);
        }
        curves.push(ErrorCurve {
            algorithm,
            points,
            estimates,
        });
        runs.push(alg_runs);
    }
    Ok(ExperimentResult {
        optimal_value,
        gaps,
        curves,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub base_seed: u64,
    pub optimal_value: f64,
    pub config: ExperimentConfig,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct CsvRow<'a> {
    algorithm: &'a str,
    n: u64,
    abs_mean_error: f64,
    mean_abs_error: f64,
    stderr: f64,
    mean_estimate: f64,
    nodes: Option<f64>,
}

/// Writes the curves (`curves.csv` or `curves.json`), `manifest.json`, and
/// `steps.csv` when rollout sums were recorded. Returns the written paths.
pub fn emit_results(
    result: &ExperimentResult,
    config: &ExperimentConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    if result.curves.is_empty() {
        return Err(LabError::InvalidConfig("nothing to emit".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match format {
        OutputFormat::Csv => {
            let path = out_dir.join("curves.csv");
            let mut w = csv::Writer::from_path(&path)?;
            for curve in &result.curves {
                for p in &curve.points {
                    w.serialize(CsvRow {
                        algorithm: curve.algorithm.name(),
                        n: p.n,
                        abs_mean_error: p.abs_mean_error,
                        mean_abs_error: p.mean_abs_error,
                        stderr: p.stderr,
                        mean_estimate: p.mean_estimate,
                        nodes: p.nodes,
                    })?;
                }
            }
            w.flush()?;
            written.push(path);
        }
        OutputFormat::Json => {
            let path = out_dir.join("curves.json");
            let curves: Vec<serde_json::Value> = result
                .curves
                .iter()
                .map(|c| serde_json::json!({ "algorithm": c.algorithm, "points": c.points }))
                .collect();
            fs::write(&path, serde_json::to_string_pretty(&curves)? + "\n")?;
            written.push(path);
        }
    }

    if result.runs.iter().flatten().any(|r| r.step_sums.is_some()) {
        let path = out_dir.join("steps.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["algorithm", "replication", "n", "rollout_sum"])?;
        for (curve, runs) in result.curves.iter().zip(&result.runs) {
            for (r, run) in runs.iter().enumerate() {
                for (i, s) in run.step_sums.iter().flatten().enumerate() {
                    w.write_record([
                        curve.algorithm.name(),
                        &r.to_string(),
                        &(i + 1).to_string(),
                        &s.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        written.push(path);
    }

    let mut resolved = config.clone();
    resolved.checkpoints = Some(config.resolved_checkpoints());
    let manifest = RunManifest {
        version: VERSION.to_string(),
        base_seed: config.base_seed,
        optimal_value: result.optimal_value,
        config: resolved,
    };
    let path = out_dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    written.push(path);
    Ok(written)
}

/// UCB1 and UCT-C bound inputs for a model from its gap report.
pub fn model_bound_inputs(
    model: &MdpModel,
    gaps: &GapReport,
    constant_mode: ConstantMode,
) -> BoundInputs {
    BoundInputs {
        horizon: model.horizon(),
        num_actions: model.num_actions(),
        num_states: model.num_states(),
        discount: model.discount(),
        gaps: GapSummary::from_report(gaps),
        beta: if model.is_deterministic() {
            None
        } else {
            model.min_positive_probability()
        },
        constant_mode,
        deterministic: model.is_deterministic(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig1Params {
    pub reading: GapReading,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for Fig1Params {
    fn default() -> Self {
        Self {
            reading: GapReading::Squared,
            lo: 10.0,
            hi: 1e10,
            points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Curve {
    pub points: Vec<BoundPoint>,
    pub crossover: Crossover,
}

/// The bound-difference curve for the 10-state, 2-action, horizon-15
/// deterministic instance with `Δ = 0.1`, plus its crossover.
pub fn fig1_bound_curve(params: &Fig1Params) -> Result<Fig1Curve> {
    let (ucb1, uctc) = fig1_inputs(params.reading);
    let grid = log_grid(params.lo, params.hi, params.points);
    let points = difference_curve(&ucb1, Ucb1Mode::Simplified, &uctc, &grid)?;
    let crossover = bound_crossover(&ucb1, Ucb1Mode::Simplified, &uctc, SearchRange::default())?;
    Ok(Fig1Curve { points, crossover })
}

/// Writes `n,ucb1_bound,uctc_bound,difference` rows.
pub fn write_bound_csv(path: &Path, points: &[BoundPoint]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Number of sign changes along a curve (zeros count as positive).
pub fn sign_changes(points: &[BoundPoint]) -> usize {
    points
        .windows(2)
        .filter(|w| (w[0].difference >= 0.0) != (w[1].difference >= 0.0))
        .count()
}
