//! Command-line front end: optimization runs, benchmark tables, queue
//! workers, and default-config emission.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

use hybridevo::config::{Backend, RunConfig};
use hybridevo::engines::EngineRegistry;
use hybridevo::error::Result;
use hybridevo::hybrid::{OptimizationPlan, Runner, StagePlan};
use hybridevo::objectives::{Objective, RastriginObjective};
use hybridevo::parallel::{Evaluator, FileQueue, FileQueueEvaluator, PoolEvaluator};
use hybridevo::{Individual, RunHistory};

#[derive(Parser)]
#[command(name = "hybridevo", about = "Hybrid evolutionary optimization toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization plan from a config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Resume from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Reproduce a benchmark suite.
    Bench {
        /// Suite name; only `table1` is available.
        suite: String,
        /// Seeded repeats per cell.
        #[arg(long, default_value_t = 10)]
        repeats: usize,
    },
    /// Process jobs from a shared queue directory until terminated.
    Worker {
        /// Queue directory (with pending/, running/, done/).
        #[arg(long)]
        queue: PathBuf,
        /// Config file defining the objective this worker serves.
        #[arg(long)]
        config: PathBuf,
    },
    /// Config utilities.
    Config {
        /// Print a complete default config to stdout.
        #[arg(long)]
        dump_defaults: bool,
    },
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, resume } => cmd_run(&config, resume),
        Command::Bench { suite, repeats } => cmd_bench(&suite, repeats),
        Command::Worker { queue, config } => cmd_worker(&queue, &config),
        Command::Config { dump_defaults } => cmd_config(dump_defaults),
    };
    match outcome {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn build_evaluator(cfg: &RunConfig) -> Result<Box<dyn Evaluator>> {
    match cfg.backend {
        Backend::Pool => {
            let registry = Arc::new(cfg.build_objective_registry()?);
            Ok(Box::new(PoolEvaluator::new(registry, cfg.workers)?))
        }
        Backend::FileQueue => {
            let queue = FileQueue::init(&cfg.queue_dir)?;
            Ok(Box::new(FileQueueEvaluator::new(
                queue,
                Duration::from_millis(cfg.queue_poll_ms),
                Duration::from_millis(cfg.queue_timeout_ms),
            )))
        }
    }
}

fn cmd_run(config_path: &Path, resume: bool) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let objective = cfg.build_objective()?;
    let plan = cfg.build_plan()?;
    let evaluator = build_evaluator(&cfg)?;
    let registry = EngineRegistry::with_builtins();

    std::fs::create_dir_all(&cfg.output_dir)?;
    let checkpoint_path = (cfg.checkpoint_enabled || resume)
        .then(|| cfg.output_dir.join("checkpoint.json"));

    let runner = Runner {
        plan: &plan,
        objective: objective.clone(),
        evaluator: evaluator.as_ref(),
        registry: &registry,
        checkpoint_path,
    };

    let started = Instant::now();
    let mut history = RunHistory::new();
    let outcome = if resume {
        runner.resume(&mut history)
    } else {
        runner.run(&mut history)
    };
    // Persist whatever progress was made, then surface the failure.
    write_history(&cfg.output_dir, &history)?;
    let best = outcome?;
    let elapsed = started.elapsed();

    write_best(&cfg.output_dir, &best)?;
    let summary = render_summary(&cfg, &plan, objective.as_ref(), &history, &best, elapsed)?;
    std::fs::write(cfg.output_dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn write_history(dir: &Path, history: &RunHistory) -> Result<()> {
    let file = std::fs::File::create(dir.join("history.csv"))?;
    history.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

/// Final best control vector: a dimension header, then one value per line.
fn write_best(dir: &Path, best: &Individual) -> Result<()> {
    let mut out = String::new();
    let x = best.x.as_slice();
    out.push_str(&format!("# dimension: {}\n", x.len()));
    for v in x {
        out.push_str(&format!("{v:.16e}\n"));
    }
    std::fs::write(dir.join("best.csv"), out)?;
    Ok(())
}

fn render_summary(
    cfg: &RunConfig,
    plan: &OptimizationPlan,
    objective: &dyn Objective,
    history: &RunHistory,
    best: &Individual,
    elapsed: Duration,
) -> Result<String> {
    let mut s = String::new();
    let stages: Vec<String> = plan
        .stages
        .iter()
        .map(|st| format!("{} ({} gens x pop {})", st.engine, st.generations, st.population_size))
        .collect();
    s.push_str(&format!("objective:      {}\n", objective.id()));
    s.push_str(&format!("seed:           {}\n", plan.seed));
    s.push_str(&format!("stages:         {}\n", stages.join(" -> ")));
    s.push_str(&format!("evaluations:    {}\n", history.len()));
    let value = best.value().ok_or(hybridevo::Error::NotEvaluated)?;
    s.push_str(&format!("best value:     {value:.10e}\n"));
    s.push_str(&format!("wall time:      {:.3} s\n", elapsed.as_secs_f64()));
    s.push_str(&format!("output dir:     {}\n", cfg.output_dir.display()));
    Ok(s)
}

fn cmd_worker(queue_dir: &Path, config_path: &Path) -> Result<()> {
    if !queue_dir.is_dir() {
        return Err(hybridevo::Error::Queue(format!(
            "queue directory {} does not exist",
            queue_dir.display()
        )));
    }
    let cfg = RunConfig::load(config_path)?;
    let registry = cfg.build_objective_registry()?;
    let queue = FileQueue::init(queue_dir)?;
    let poll = Duration::from_millis(cfg.queue_poll_ms);
    eprintln!("worker: serving '{}' from {}", cfg.objective_id(), queue_dir.display());
    loop {
        match queue.process_one(&registry)? {
            Some(job_id) => eprintln!("worker: processed job {job_id}"),
            None => std::thread::sleep(poll),
        }
    }
}

fn cmd_config(dump_defaults: bool) -> Result<()> {
    if !dump_defaults {
        return Err(hybridevo::Error::InvalidArgument(
            "nothing to do; pass --dump-defaults".into(),
        ));
    }
    print!("{}", RunConfig::dump_defaults());
    Ok(())
}

/// Benchmark cells: (dimension, population, generations) with published
/// single-draw reference best costs for GA and PSO.
const TABLE1_CELLS: [(usize, usize, usize, f64, f64); 3] = [
    (2, 40, 100, 0.99, 7.7e-10),
    (50, 40, 100, 172.1, 322.0),
    (50, 100, 200, 97.8, 158.7),
];

fn cmd_bench(suite: &str, repeats: usize) -> Result<()> {
    if suite != "table1" {
        return Err(hybridevo::Error::InvalidArgument(format!(
            "unknown suite '{suite}'; available: table1"
        )));
    }
    if repeats < 1 {
        return Err(hybridevo::Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{:<6} {:>4} {:>5} {:>6} {:>12} {:>12} {:>10}",
        "engine", "dim", "pop", "iters", "median", "iqr", "reference"
    )?;
    for (dim, pop, gens, ga_ref, pso_ref) in TABLE1_CELLS {
        for (engine, reference) in [("ga", ga_ref), ("pso", pso_ref)] {
            let mut costs: Vec<f64> = (0..repeats)
                .map(|i| bench_best_cost(engine, dim, pop, gens, i as u64 + 1))
                .collect::<Result<_>>()?;
            costs.sort_by(f64::total_cmp);
            let median = quantile(&costs, 0.5);
            let iqr = quantile(&costs, 0.75) - quantile(&costs, 0.25);
            writeln!(
                out,
                "{engine:<6} {dim:>4} {pop:>5} {gens:>6} {median:>12.4e} {iqr:>12.4e} {reference:>10.2e}"
            )?;
        }
    }
    Ok(())
}

/// One single-stage Rastrigin run; returns the best cost (negated objective).
fn bench_best_cost(engine: &str, dim: usize, pop: usize, gens: usize, seed: u64) -> Result<f64> {
    let objective: Arc<dyn Objective> = Arc::new(RastriginObjective::standard(dim)?);
    let plan = OptimizationPlan {
        stages: vec![StagePlan {
            engine: engine.into(),
            generations: gens,
            population_size: pop,
        }],
        seed,
        engine_params: Default::default(),
    };
    let evaluator = PoolEvaluator::for_objective(objective.clone(), 1)?;
    let registry = EngineRegistry::with_builtins();
    let runner = Runner {
        plan: &plan,
        objective,
        evaluator: &evaluator,
        registry: &registry,
        checkpoint_path: None,
    };
    let mut history = RunHistory::new();
    let best = runner.run(&mut history)?;
    Ok(-best.value().ok_or(hybridevo::Error::NotEvaluated)?)
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
