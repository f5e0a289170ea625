use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use wfplace::experiment::{
    emit_runs, emit_savings, emit_table, emit_train_log, parse_table, run_plan, summarize_saving,
    ExperimentPlan,
};
use wfplace::model::validate_scenario;
use wfplace::rl::{load_checkpoint, save_checkpoint, train, TrainConfig};
use wfplace::scenario::{
    generate_scenario, load_scenario, save_scenario, with_staggered_arrivals, GeneratorConfig,
};
use wfplace::sim::{run_strategy, SimConfig, SlotPlacementEnv, Strategy};

#[derive(Parser)]
#[command(
    name = "wfplace",
    about = "Dataset placement for data-sharing scientific workflows on edge-cloud topologies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file from a generator config.
    Generate {
        /// Generator config JSON; omit for the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Stagger workflow arrivals this many slots apart (first
        /// arrival at slot 2), making the scenario dynamic.
        #[arg(long)]
        stagger: Option<u32>,
    },
    /// Run one strategy end to end on a scenario; writes the run CSV.
    Place {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        strategy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint from `train` for the dym_rl strategy; trained on
        /// the fly when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train the runtime placement policy on a scenario.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
    },
    /// Run an experiment plan; writes the result table plus a per-run log
    /// next to it.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Time savings of every strategy against a reference, from a result
    /// table produced by `sweep`.
    Summarize {
        /// Results CSV from `sweep`.
        #[arg(long)]
        config: PathBuf,
        /// Reference strategy.
        #[arg(long, default_value = "dpso")]
        strategy: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn parse_strategy(name: &str) -> Result<Strategy> {
    Strategy::parse(name).with_context(|| {
        format!(
            "unknown strategy {name:?}; expected one of {}",
            Strategy::ALL.map(|s| s.name()).join(", ")
        )
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("read {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parse {what} {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            config,
            out,
            seed,
            stagger,
        } => {
            let mut cfg: GeneratorConfig = match config {
                Some(path) => read_json(&path, "generator config")?,
                None => GeneratorConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let mut scenario = generate_scenario(&cfg)?;
            if let Some(gap) = stagger {
                scenario = with_staggered_arrivals(scenario, 2, gap);
            }
            let violations = validate_scenario(&scenario);
            if !violations.is_empty() {
                bail!("generated scenario failed validation: {violations:?}");
            }
            save_scenario(&scenario, &out)?;
            println!(
                "wrote {} ({} datacenters, {} workflows, {} datasets)",
                out.display(),
                scenario.datacenters.len(),
                scenario.workflows.len(),
                scenario.datasets.len()
            );
            Ok(())
        }
        Command::Place {
            config,
            strategy,
            seed,
            out,
            model,
        } => {
            let strategy = parse_strategy(&strategy)?;
            let scenario = load_scenario(&config)?;
            let mut cfg = SimConfig::desk_scale();
            if let Some(opt) = scenario.optimizer {
                cfg.optimizer = opt;
            }
            cfg.optimizer.seed = seed;
            cfg.slot_optimizer.seed = seed;
            cfg.rl_train.seed = seed;
            if let Some(path) = model {
                cfg.rl_policy = Some(load_checkpoint(&path)?);
            }
            let summary = run_strategy(&scenario, strategy, &cfg, seed)?;
            fs::write(&out, summary.to_csv())
                .with_context(|| format!("write {}", out.display()))?;
            println!(
                "{strategy}: build {} s, runtime {} s over {} slots (avg {} s), total {} s",
                summary.build_time.seconds_f64(),
                summary.runtime_total.seconds_f64(),
                summary.slots,
                summary.avg_slot_time.seconds_f64(),
                summary.total.seconds_f64()
            );
            Ok(())
        }
        Command::Train {
            config,
            out,
            log,
            seed,
            episodes,
        } => {
            let scenario = load_scenario(&config)?;
            let mut cfg = SimConfig::desk_scale();
            if let Some(opt) = scenario.optimizer {
                cfg.optimizer = opt;
            }
            cfg.rl_train = TrainConfig {
                episodes,
                seed,
                ..TrainConfig::default()
            };
            cfg.optimizer.seed = seed;
            let mut env = SlotPlacementEnv::new(&scenario, &cfg)?;
            let output = train(&mut env, &cfg.rl_train)?;
            save_checkpoint(&output.nets, &out)?;
            if let Some(log_path) = log {
                fs::write(&log_path, emit_train_log(&output.log))
                    .with_context(|| format!("write {}", log_path.display()))?;
            }
            println!(
                "trained {} episodes ({} transitions, {} updates); checkpoint {}",
                episodes,
                output.transitions,
                output.updates,
                out.display()
            );
            Ok(())
        }
        Command::Sweep {
            config,
            out,
            seed,
            repeats,
        } => {
            let mut plan: ExperimentPlan = read_json(&config, "experiment plan")?;
            if let Some(seed) = seed {
                plan.seed = seed;
            }
            if let Some(repeats) = repeats {
                plan.repeats = repeats;
            }
            let result = run_plan(&plan)?;
            fs::write(&out, emit_table(&result.table))
                .with_context(|| format!("write {}", out.display()))?;
            let runs_path = runs_path_for(&out);
            fs::write(&runs_path, emit_runs(&result.runs))
                .with_context(|| format!("write {}", runs_path.display()))?;
            for (point, strategy, err) in &result.failures {
                eprintln!("cell failed: sweep={point} strategy={strategy}: {err}");
            }
            println!(
                "wrote {} ({} cells) and {}",
                out.display(),
                result.table.len(),
                runs_path.display()
            );
            if result.failures.is_empty() {
                Ok(())
            } else {
                bail!("{} cell(s) failed", result.failures.len())
            }
        }
        Command::Summarize {
            config,
            strategy,
            out,
        } => {
            let reference = parse_strategy(&strategy)?;
            let text = fs::read_to_string(&config)
                .with_context(|| format!("read results {}", config.display()))?;
            let table = parse_table(&text)?;
            let savings = summarize_saving(&table, reference)?;
            fs::write(&out, emit_savings(&savings))
                .with_context(|| format!("write {}", out.display()))?;
            println!("wrote {} ({} rows)", out.display(), savings.len());
            Ok(())
        }
    }
}

fn runs_path_for(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    out.with_file_name(format!("{stem}_runs.csv"))
}
