//! Acceptance suite: each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use mcts_rate::bounds::{ucb1_error_bound, ConstantMode, Ucb1Mode};
use mcts_rate::experiment::{
    emit_results, fig1_bound_curve, model_bound_inputs, run_experiment, sign_changes, Algorithm,
    ExperimentConfig, Fig1Params, MdpSource,
};
use mcts_rate::mdp::{
    generate_mdp, nonstationarity_witness_mdp, EnumerationCap, GeneratorKind, GeneratorSpec,
    MdpModel,
};
use mcts_rate::oracle::{backward_induction, brute_force_optimal_value, compute_gaps, GapOptions};
use mcts_rate::ucb1::{ArmSet, Ucb1State};
use mcts_rate::uct::{UctTreeStats, UctVariant, UctcParams};
use mcts_rate::RngStream;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_error(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn chain_spec() -> GeneratorSpec {
    GeneratorSpec::new(GeneratorKind::ChainWithGap { gap: 0.1 }, 3, 2, 2)
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..60u64 {
        let ns = 1 + (seed % 3) as usize;
        let na = 1 + (seed / 3 % 2) as usize;
        let h = 1 + (seed / 6 % 3) as usize;
        let kind = if seed % 2 == 0 {
            GeneratorKind::RandomStochastic { support: None }
        } else {
            GeneratorKind::RandomDeterministic
        };
        let m =
            generate_mdp(&GeneratorSpec::new(kind, ns, na, h), seed).map_err(|e| e.to_string())?;
        let bi = backward_induction(&m)
            .map_err(|e| e.to_string())?
            .optimal_value(0);
        let bf = brute_force_optimal_value(&m, 0, EnumerationCap::default())
            .map_err(|e| e.to_string())?
            .value;
        worst = worst.max((bi - bf).abs());
        count += 1;
    }
    check(
        worst <= 1e-10,
        format!("{count} models, max |BI - BF| = {worst:.2e} (tol 1e-10)"),
    )
}

fn ucb1_bound_conformance() -> Outcome {
    let spec = chain_spec();
    let model = generate_mdp(&spec, 0).map_err(|e| e.to_string())?;
    let gaps = compute_gaps(&model, 0, GapOptions::default()).map_err(|e| e.to_string())?;
    let policies = gaps.per_policy_gaps.as_ref().map_or(0, Vec::len) as u64;
    let inputs = model_bound_inputs(&model, &gaps, ConstantMode::ExplicitAuer);
    let mut config = ExperimentConfig::new(
        MdpSource::Generator { spec, seed: 0 },
        vec![Algorithm::Ucb1],
        200_000,
    );
    config.replications = 20;
    let result = run_experiment(&config).map_err(|e| e.to_string())?;
    let mut checked = 0;
    let mut worst_ratio: f64 = 0.0;
    for p in result.curves[0].points.iter().filter(|p| p.n >= policies) {
        let bound =
            ucb1_error_bound(&inputs, Ucb1Mode::ExactSum, p.n as f64).map_err(|e| e.to_string())?;
        worst_ratio = worst_ratio.max(p.abs_mean_error / bound);
        checked += 1;
    }
    let last = result.curves[0].points.last().unwrap();
    check(
        checked > 0 && worst_ratio <= 1.0,
        format!(
            "|Π_H| = {policies}, {checked} checkpoints, max error/bound = {worst_ratio:.3}, final error {:.4} at n = {}",
            last.abs_mean_error, last.n
        ),
    )
}

fn suboptimal_play_counts() -> Outcome {
    let model = generate_mdp(&chain_spec(), 0).map_err(|e| e.to_string())?;
    let gaps = compute_gaps(&model, 0, GapOptions::default()).map_err(|e| e.to_string())?;
    let policy_gaps = gaps.per_policy_gaps.unwrap();
    let n: u64 = 10_000;
    let reps = 100;
    let mut plays = vec![0.0; policy_gaps.len()];
    for r in 0..reps {
        let mut state = Ucb1State::for_model(&model, ArmSet::Full, EnumerationCap::default(), n)
            .map_err(|e| e.to_string())?;
        let mut rng = RngStream::derive(0, r, Algorithm::Ucb1.id());
        for _ in 0..n {
            state.step(&model, &mut rng);
        }
        for (total, &c) in plays.iter_mut().zip(state.counts()) {
            *total += c as f64 / reps as f64;
        }
    }
    let mut worst_ratio: f64 = 0.0;
    let mut suboptimal = 0;
    for (&d, &p) in policy_gaps.iter().zip(&plays) {
        if d > 0.0 {
            let limit = 8.0 / (d * d) * (n as f64).ln() + 1.0 + PI * PI / 3.0;
            worst_ratio = worst_ratio.max(p / limit);
            suboptimal += 1;
        }
    }
    check(
        suboptimal > 0 && worst_ratio <= 1.0,
        format!("{suboptimal} suboptimal policies, max mean plays / limit = {worst_ratio:.4} over {reps} reps"),
    )
}

fn tree_optimality() -> Outcome {
    let params = UctcParams::uniform(5, 0.5, 0.25, 0.5).map_err(|e| e.to_string())?;
    let det = GeneratorSpec::new(GeneratorKind::RandomDeterministic, 5, 2, 5);
    let sto = GeneratorSpec::new(GeneratorKind::RandomStochastic { support: None }, 5, 2, 5);
    let det_model = generate_mdp(&det, 0).map_err(|e| e.to_string())?;
    let unique = compute_gaps(&det_model, 0, GapOptions::default())
        .map_err(|e| e.to_string())?
        .unique_optimal;
    let mut lines = Vec::new();
    let mut ok = unique;
    for (spec, algorithms) in [
        (det, vec![Algorithm::Uct, Algorithm::UctcDet]),
        (sto, vec![Algorithm::UctcStoch]),
    ] {
        let mut config =
            ExperimentConfig::new(MdpSource::Generator { spec, seed: 0 }, algorithms, 100_000);
        config.checkpoints = Some(vec![1_000, 100_000]);
        config.replications = 10;
        config.uctc_params = Some(params.clone());
        let result = run_experiment(&config).map_err(|e| e.to_string())?;
        for curve in &result.curves {
            let (early, late) = (
                curve.points[0].mean_abs_error,
                curve.points[1].mean_abs_error,
            );
            ok &= late < 0.05 && late < early;
            lines.push(format!("{} {:.4} -> {:.4}", curve.algorithm, early, late));
        }
    }
    check(
        ok,
        format!(
            "unique optimum: {unique}; mean |error| n=1e3 -> 1e5: {}",
            lines.join(", ")
        ),
    )
}

fn nonstationarity_witness() -> Outcome {
    let model = nonstationarity_witness_mdp();
    let table = backward_induction(&model).map_err(|e| e.to_string())?;
    let best = table.optimal_actions(0, 0)[0];
    let reps = 200;
    let (mut early, mut late) = (Vec::new(), Vec::new());
    for r in 0..reps {
        let mut tree = UctTreeStats::new(&model, 10_000, None);
        let mut rng = RngStream::derive(5, r, Algorithm::Uct.id());
        for step in 1..=10_000u64 {
            tree.simulate_once(&model, UctVariant::Uct, None, &mut rng)
                .map_err(|e| e.to_string())?;
            if step == 100 {
                early.push(tree.action_value(0, best, 0).unwrap());
            }
        }
        late.push(tree.action_value(0, best, 0).unwrap());
    }
    let diff = (mean(&late) - mean(&early)).abs();
    let se = (std_error(&early).powi(2) + std_error(&late).powi(2)).sqrt();
    check(
        diff > 3.0 * se,
        format!(
            "E[Q^n] at n=100: {:.4}, n=1e4: {:.4}, |diff| = {diff:.4} vs 3·SE = {:.4}",
            mean(&early),
            mean(&late),
            3.0 * se
        ),
    )
}

fn fig1_reproduction() -> Outcome {
    const N_STAR: u64 = 476_343_261;
    let f = fig1_bound_curve(&Fig1Params::default()).map_err(|e| e.to_string())?;
    let first = f.points[0];
    let changes = sign_changes(&f.points);
    let (lo, hi) = f.crossover.bracket;
    let step = hi - lo;
    let within = (f.crossover.n_star as f64 - N_STAR as f64).abs() <= step;
    check(
        first.n == 10.0 && first.difference > 0.0 && changes == 1 && within,
        format!(
            "difference at n=10 = {:.2}, sign changes = {changes}, n* = {} (oracle {N_STAR}, grid step {:.0})",
            first.difference, f.crossover.n_star, step
        ),
    )
}

fn complexity_in_state_count() -> Outcome {
    let params = UctcParams::default_for(5);
    let mut ok = true;
    let mut summary = Vec::new();
    for variant in [UctVariant::Uct, UctVariant::UctcStoch] {
        let mut min_node_margin = usize::MAX;
        let mut min_work_margin = i64::MAX;
        for trial in 0..10u64 {
            let mut stats = Vec::new();
            for ns in [5, 50] {
                let spec = GeneratorSpec::new(GeneratorKind::UniformStochastic, ns, 2, 5);
                let model: MdpModel = generate_mdp(&spec, trial).map_err(|e| e.to_string())?;
                let p = variant.needs_params().then_some(&params);
                let mut tree = UctTreeStats::new(&model, 10_000, p);
                let mut rng = RngStream::new(trial);
                for _ in 0..10_000 {
                    tree.simulate_once(&model, variant, p, &mut rng)
                        .map_err(|e| e.to_string())?;
                }
                stats.push(tree.metrics());
            }
            let (small, large) = (&stats[0], &stats[1]);
            ok &= large.node_count > small.node_count && large.update_work > small.update_work;
            min_node_margin =
                min_node_margin.min(large.node_count.saturating_sub(small.node_count));
            min_work_margin =
                min_work_margin.min(large.update_work as i64 - small.update_work as i64);
        }
        summary.push(format!(
            "{variant:?}: min node margin {min_node_margin}, min work margin {min_work_margin}"
        ));
    }
    check(
        ok,
        format!("10 trials, |X| = 5 vs 50; {}", summary.join("; ")),
    )
}

fn determinism() -> Outcome {
    let spec = GeneratorSpec::new(GeneratorKind::RandomStochastic { support: None }, 4, 2, 3);
    let mut config = ExperimentConfig::new(
        MdpSource::Generator { spec, seed: 9 },
        vec![
            Algorithm::Ucb1,
            Algorithm::Uct,
            Algorithm::UctcDet,
            Algorithm::UctcStoch,
            Algorithm::Ams,
        ],
        5_000,
    );
    config.replications = 8;
    config.ams_samples = vec![4, 8];
    config.base_seed = 42;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, workers) in [1, 1, 4, 4].into_iter().enumerate() {
        config.workers = workers;
        let out = dir.path().join(format!("run{i}"));
        let result = run_experiment(&config).map_err(|e| e.to_string())?;
        emit_results(&result, &config, &out, config.format).map_err(|e| e.to_string())?;
        outputs.push(std::fs::read(out.join("curves.csv")).map_err(|e| e.to_string())?);
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    check(
        identical,
        format!(
            "4 runs (workers 1, 1, 4, 4), {} CSV bytes each, identical: {identical}",
            outputs[0].len()
        ),
    )
}

fn ams_sanity() -> Outcome {
    let spec = GeneratorSpec::new(GeneratorKind::RandomStochastic { support: None }, 3, 2, 3);
    let mut config = ExperimentConfig::new(
        MdpSource::Generator { spec, seed: 0 },
        vec![Algorithm::Ams],
        0,
    );
    config.replications = 20;
    config.ams_samples = vec![50, 200, 400];
    let result = run_experiment(&config).map_err(|e| e.to_string())?;
    let pts = &result.curves[0].points;
    let (e50, e200, e400) = (
        pts[0].mean_abs_error,
        pts[1].mean_abs_error,
        pts[2].mean_abs_error,
    );
    check(
        e200 <= 0.05 && e400 <= e50,
        format!(
            "V* = {:.4}, mean |error| N=50: {e50:.4}, N=200: {e200:.4} (tol 0.05), N=400: {e400:.4}",
            result.optimal_value
        ),
    )
}

fn main() {
    // Keep `cargo test -- --list` and filters from running the whole suite.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 9] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 UCB1 bound conformance", ucb1_bound_conformance),
        ("3 suboptimal-play counts", suboptimal_play_counts),
        ("4 UCT/UCT-C optimality", tree_optimality),
        ("5 non-stationarity witness", nonstationarity_witness),
        ("6 bound-difference crossover", fig1_reproduction),
        ("7 complexity vs |X|", complexity_in_state_count),
        ("8 determinism", determinism),
        ("9 AMS sanity", ams_sanity),
    ];
    let filter = args.iter().find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
