//! `mcts-rate`: generate and solve MDPs, run convergence experiments, and
//! evaluate the bound curves.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mcts_rate::ams::{ams_estimate, level_anchored, AmsConfig};
use mcts_rate::bounds::{
    bound_crossover, difference_curve, log_grid, ConstantMode, GapReading, SearchRange, Ucb1Mode,
};
use mcts_rate::experiment::{
    emit_results, fig1_bound_curve, model_bound_inputs, parse_algorithms, run_experiment,
    sign_changes, write_bound_csv, ExperimentConfig, Fig1Params, OutputFormat,
};
use mcts_rate::mdp::{
    generate_mdp, nonstationarity_witness_mdp, EnumerationCap, GeneratorSpec, MdpModel,
};
use mcts_rate::oracle::{backward_induction, compute_gaps, GapOptions};
use mcts_rate::{LabError, RngStream};

#[derive(Parser)]
#[command(
    name = "mcts-rate",
    version,
    about = "Convergence-rate lab for UCB1, UCT and UCT-C"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an MDP from a generator spec and write it as JSON.
    GenMdp {
        /// Generator spec (JSON).
        #[arg(long, required_unless_present = "witness")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the fixed two-level drift instance instead.
        #[arg(long, conflicts_with = "config")]
        witness: bool,
    },
    /// Exact values, optimal actions and gaps of an MDP.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = EnumerationCap::default().0)]
        cap: u64,
    },
    /// Run a replicated convergence experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated, e.g. `ucb1,uct,uctc-det`.
        #[arg(long)]
        algorithms: Option<String>,
        #[arg(long)]
        n_max: Option<u64>,
        #[arg(long)]
        reps: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// UCB1 and UCT-C bound curves for an MDP, from its exact gaps.
    Bounds {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Constants::ExplicitAuer)]
        constants: Constants,
        #[arg(long, default_value_t = 2.0)]
        n_min: f64,
        #[arg(long, default_value_t = 1e8)]
        n_max: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound-difference curve for the 10-state, horizon-15 example.
    Fig1 {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Reading::Squared)]
        gap_reading: Reading,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// One AMS estimate with its work counter and wall time.
    Ams {
        #[arg(long)]
        mdp: PathBuf,
        /// Samples per state.
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the model's initial state.
        #[arg(long)]
        state: Option<usize>,
        #[arg(long, default_value_t = 0)]
        level: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Simplified,
}

#[derive(Clone, Copy, ValueEnum)]
enum Constants {
    ExplicitAuer,
    Unit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reading {
    Squared,
    Gap,
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_mdp(path: &Path) -> Result<MdpModel> {
    MdpModel::load(path).with_context(|| format!("loading MDP from {}", path.display()))
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenMdp {
            config,
            seed,
            out,
            witness,
        } => {
            let model = if witness {
                nonstationarity_witness_mdp()
            } else {
                let path = config.expect("required by clap");
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let spec: GeneratorSpec =
                    serde_json::from_str(&text).context("parsing generator spec")?;
                generate_mdp(&spec, seed)?
            };
            write_or_print(out.as_deref(), &(model.to_json_string()? + "\n"))
        }
        Command::Solve { mdp, out, cap } => {
            let model = load_mdp(&mdp)?;
            let table = backward_induction(&model)?;
            let x = model.initial_state();
            let gaps = match compute_gaps(
                &model,
                x,
                GapOptions {
                    cap: EnumerationCap(cap),
                },
            ) {
                Ok(g) => Some(g),
                Err(LabError::Sizing(m)) => {
                    eprintln!("gaps skipped: {m}");
                    None
                }
                Err(e) => return Err(e.into()),
            };
            let h = model.horizon();
            let actions: Vec<Vec<&[usize]>> = (0..h)
                .map(|l| {
                    (0..model.num_states())
                        .map(|y| table.optimal_actions(l, y))
                        .collect()
                })
                .collect();
            let report = serde_json::json!({
                "optimal_value": table.optimal_value(x),
                "values_to_go": table.values(),
                "optimal_actions": actions,
                "gaps": gaps,
            });
            write_or_print(
                out.as_deref(),
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )
        }
        Command::Run {
            config,
            seed,
            out,
            algorithms,
            n_max,
            reps,
            workers,
            format,
        } => {
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(a) = algorithms {
                cfg.algorithms = parse_algorithms(&a)?;
            }
            if let Some(n) = n_max {
                cfg.n_max = n;
                if let Some(c) = cfg.checkpoints.as_mut() {
                    c.retain(|&k| k <= n);
                    if c.is_empty() {
                        cfg.checkpoints = None;
                    }
                }
            }
            if let Some(r) = reps {
                cfg.replications = r;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(f) = format {
                cfg.format = match f {
                    Format::Csv => OutputFormat::Csv,
                    Format::Json => OutputFormat::Json,
                };
            }
            if let Some(o) = out {
                cfg.output_dir = Some(o);
            }
            let Some(dir) = cfg.output_dir.clone() else {
                bail!("no output directory: pass --out or set output_dir");
            };
            let result = run_experiment(&cfg)?;
            let files = emit_results(&result, &cfg, &dir, cfg.format)?;
            println!("V* = {}", result.optimal_value);
            for curve in &result.curves {
                let last = curve.points.last().expect("non-empty curve");
                println!(
                    "{:<10} n = {:>10}  |mean - V*| = {:.6}  mean|err| = {:.6}",
                    curve.algorithm.name(),
                    last.n,
                    last.abs_mean_error,
                    last.mean_abs_error
                );
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Bounds {
            mdp,
            mode,
            constants,
            n_min,
            n_max,
            points,
            out,
        } => {
            let model = load_mdp(&mdp)?;
            let gaps = compute_gaps(&model, model.initial_state(), GapOptions::default())?;
            let constant_mode = match constants {
                Constants::ExplicitAuer => ConstantMode::ExplicitAuer,
                Constants::Unit => ConstantMode::Unit,
            };
            let inputs = model_bound_inputs(&model, &gaps, constant_mode);
            let mode = match mode {
                Mode::Exact => Ucb1Mode::ExactSum,
                Mode::Simplified => Ucb1Mode::Simplified,
            };
            if n_min < 1.0 || n_max < n_min || points < 2 {
                bail!("need 1 <= n-min <= n-max and at least 2 points");
            }
            let curve = difference_curve(&inputs, mode, &inputs, &log_grid(n_min, n_max, points))?;
            match out {
                Some(p) => write_bound_csv(&p, &curve)?,
                None => {
                    println!("n,ucb1_bound,uctc_bound,difference");
                    for p in &curve {
                        println!("{},{},{},{}", p.n, p.ucb1_bound, p.uctc_bound, p.difference);
                    }
                }
            }
            match bound_crossover(&inputs, mode, &inputs, SearchRange::default()) {
                Ok(x) => eprintln!("crossover n* = {}", x.n_star),
                Err(e) => eprintln!("crossover: {e}"),
            }
            Ok(())
        }
        Command::Fig1 {
            out,
            gap_reading,
            points,
        } => {
            let reading = match gap_reading {
                Reading::Squared => GapReading::Squared,
                Reading::Gap => GapReading::Gap,
            };
            let params = Fig1Params {
                reading,
                points,
                ..Fig1Params::default()
            };
            if points < 2 {
                bail!("need at least 2 points");
            }
            let f = fig1_bound_curve(&params)?;
            let path = out.unwrap_or_else(|| PathBuf::from("fig1.csv"));
            write_bound_csv(&path, &f.points)?;
            println!("crossover n* = {}", f.crossover.n_star);
            println!("sign changes on grid: {}", sign_changes(&f.points));
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Ams {
            mdp,
            samples,
            seed,
            state,
            level,
        } => {
            let model = load_mdp(&mdp)?;
            let y = state.unwrap_or(model.initial_state());
            let mut rng = RngStream::new(seed);
            let start = Instant::now();
            let e = ams_estimate(&model, y, level, &AmsConfig::new(samples), &mut rng)?;
            let elapsed = start.elapsed();
            let table = backward_induction(&model)?;
            let exact = table.value_to_go(model.horizon() - level.min(model.horizon()), y);
            println!("estimate (value-to-go) = {}", e.value);
            println!(
                "estimate (level-anchored) = {}",
                level_anchored(&model, level, e.value)
            );
            println!("exact value-to-go = {exact}");
            println!("work = {}", e.work);
            println!("wall time = {:.3} s", elapsed.as_secs_f64());
            Ok(())
        }
    }
}
