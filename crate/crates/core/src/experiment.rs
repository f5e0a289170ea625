//! Sweep harness: repeated seeded end-to-end runs over one varying
//! dimension, with paired seeds across strategies and CSV output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ChargePolicy;
use crate::optimize::OptimizerConfig;
use crate::rl::TrainConfig;
use crate::scenario::{generate_scenario, with_staggered_arrivals, GenError, GeneratorConfig};
use crate::sim::{run_strategy, SimConfig, SimError, SlotPlacementEnv, Strategy};

/// The varying dimension of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepAxis {
    BandwidthMultiplier { values: Vec<f64> },
    EdgeCapacity { values_mb: Vec<u64> },
    EdgeCount { values: Vec<u32> },
    Sharing,
}

impl SweepAxis {
    pub fn default_bandwidth() -> Self {
        SweepAxis::BandwidthMultiplier {
            values: vec![0.5, 0.8, 1.5, 3.0, 5.0],
        }
    }

    pub fn default_capacity() -> Self {
        SweepAxis::EdgeCapacity {
            values_mb: [150u64, 200, 250, 300, 350]
                .iter()
                .map(|gb| gb * 1024)
                .collect(),
        }
    }

    /// (label, config) per sweep point.
    fn points(&self, base: &GeneratorConfig) -> Vec<(String, GeneratorConfig)> {
        match self {
            SweepAxis::BandwidthMultiplier { values } => values
                .iter()
                .map(|&m| {
                    let mut cfg = base.clone();
                    cfg.bandwidth_multiplier = m;
                    (format!("{m}"), cfg)
                })
                .collect(),
            SweepAxis::EdgeCapacity { values_mb } => values_mb
                .iter()
                .map(|&c| {
                    let mut cfg = base.clone();
                    cfg.edge_capacity_mb = c;
                    (format!("{c}"), cfg)
                })
                .collect(),
            SweepAxis::EdgeCount { values } => values
                .iter()
                .map(|&n| {
                    let mut cfg = base.clone();
                    cfg.edges_per_region = n;
                    (format!("{n}"), cfg)
                })
                .collect(),
            SweepAxis::Sharing => [true, false]
                .iter()
                .map(|&on| {
                    let mut cfg = base.clone();
                    cfg.sharing_enabled = on;
                    (if on { "on" } else { "off" }.to_string(), cfg)
                })
                .collect(),
        }
    }
}

/// Workflow arrivals for dynamic sweeps: later workflows join every
/// `gap` slots starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalPlan {
    pub start: u32,
    pub gap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub base: GeneratorConfig,
    pub sweep: SweepAxis,
    pub strategies: Vec<Strategy>,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_optimizer: Option<OptimizerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rl_episodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rl_maxstep: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rl_update_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<ArrivalPlan>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            base: GeneratorConfig::default(),
            sweep: SweepAxis::default_bandwidth(),
            strategies: Strategy::ALL.to_vec(),
            repeats: 100,
            seed: 0,
            optimizer: None,
            slot_optimizer: None,
            rl_episodes: None,
            rl_maxstep: None,
            rl_update_every: None,
            arrivals: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan has no strategies")]
    NoStrategies,
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("reference strategy {0} is not in the table")]
    MissingReference(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One aggregated cell of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: String,
    pub strategy: Strategy,
    pub mean_avg_time_s: f64,
    pub sd: f64,
    pub mean_total_s: f64,
    pub repeats: usize,
}

/// One run of the per-run log the harness always writes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub sweep_value: String,
    pub strategy: Strategy,
    pub repeat: usize,
    pub avg_time_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Default)]
pub struct PlanResult {
    pub table: Vec<ResultRow>,
    pub runs: Vec<RunRow>,
    /// Cells that failed, with the error text; the plan keeps going.
    pub failures: Vec<(String, Strategy, String)>,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl ExperimentPlan {
    fn sim_config(&self, run_seed: u64) -> SimConfig {
        let mut cfg = SimConfig::desk_scale();
        if let Some(opt) = self.optimizer {
            cfg.optimizer = opt;
        }
        if let Some(opt) = self.slot_optimizer {
            cfg.slot_optimizer = opt;
        }
        cfg.optimizer.seed = run_seed;
        cfg.slot_optimizer.seed = run_seed;
        cfg
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            episodes: self.rl_episodes.unwrap_or(120),
            maxstep: self.rl_maxstep.unwrap_or(8),
            update_every: self.rl_update_every.unwrap_or(4),
            hidden: 48,
            seed,
            ..TrainConfig::default()
        }
    }
}

/// Run the whole plan: for each sweep point one scenario instance is
/// generated, every strategy runs `repeats` times on it with paired run
/// seeds, and the RL strategy is trained once per point and evaluated
/// greedily.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanResult, PlanError> {
    if plan.strategies.is_empty() {
        return Err(PlanError::NoStrategies);
    }
    if plan.repeats == 0 {
        return Err(PlanError::NoRepeats);
    }
    let mut result = PlanResult::default();
    // One scenario seed for the whole sweep: points differ only in the
    // swept parameter, so trends are not confounded by structure noise.
    let scenario_seed = mix(plan.seed, 0x5ce0, u64::MAX);
    for (point_idx, (label, gen_cfg)) in plan.sweep.points(&plan.base).iter().enumerate() {
        let mut scenario = generate_scenario(&GeneratorConfig {
            seed: scenario_seed,
            ..gen_cfg.clone()
        })?;
        if let Some(a) = plan.arrivals {
            scenario = with_staggered_arrivals(scenario, a.start, a.gap);
        }

        // Train the runtime policy once per sweep point.
        let rl_policy = if plan.strategies.contains(&Strategy::DymRl) {
            let mut cfg = plan.sim_config(mix(plan.seed, point_idx as u64, 1 << 40));
            cfg.rl_train = plan.train_config(mix(plan.seed, point_idx as u64, 1 << 41));
            let mut env = SlotPlacementEnv::new(&scenario, &cfg)
                .map_err(|e| PlanError::Sim(e))?;
            match crate::rl::train(&mut env, &cfg.rl_train) {
                Ok(out) => Some(out.nets),
                Err(e) => {
                    result
                        .failures
                        .push((label.clone(), Strategy::DymRl, e.to_string()));
                    None
                }
            }
        } else {
            None
        };

        for &strategy in &plan.strategies {
            let mut avg_times = Vec::with_capacity(plan.repeats);
            let mut totals = Vec::with_capacity(plan.repeats);
            let mut failed = false;
            for r in 0..plan.repeats {
                let run_seed = mix(plan.seed, point_idx as u64, r as u64);
                let mut cfg = plan.sim_config(run_seed);
                if strategy == Strategy::DymRl {
                    match &rl_policy {
                        Some(nets) => cfg.rl_policy = Some(nets.clone()),
                        None => {
                            failed = true;
                            break;
                        }
                    }
                }
                match run_strategy(&scenario, strategy, &cfg, run_seed) {
                    Ok(summary) => {
                        let avg = summary.avg_slot_time.seconds_f64();
                        let total = summary.total.seconds_f64();
                        result.runs.push(RunRow {
                            sweep_value: label.clone(),
                            strategy,
                            repeat: r,
                            avg_time_s: avg,
                            total_s: total,
                        });
                        avg_times.push(avg);
                        totals.push(total);
                    }
                    Err(e) => {
                        result
                            .failures
                            .push((label.clone(), strategy, e.to_string()));
                        failed = true;
                        break;
                    }
                }
            }
            if failed && avg_times.is_empty() {
                result.table.push(ResultRow {
                    sweep_value: label.clone(),
                    strategy,
                    mean_avg_time_s: f64::NAN,
                    sd: f64::NAN,
                    mean_total_s: f64::NAN,
                    repeats: 0,
                });
                continue;
            }
            let n = avg_times.len();
            let mean = avg_times.iter().sum::<f64>() / n as f64;
            let var = avg_times
                .iter()
                .map(|x| (x - mean) * (x - mean))
                .sum::<f64>()
                / n as f64;
            let mean_total = totals.iter().sum::<f64>() / n as f64;
            result.table.push(ResultRow {
                sweep_value: label.clone(),
                strategy,
                mean_avg_time_s: mean,
                sd: var.sqrt(),
                mean_total_s: mean_total,
                repeats: n,
            });
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingRow {
    pub sweep_value: String,
    pub strategy: Strategy,
    pub saving_pct: f64,
}

/// Percentage of time saved against a reference strategy, per sweep
/// point: (T_ref - T) / T_ref * 100.
pub fn summarize_saving(
    table: &[ResultRow],
    reference: Strategy,
) -> Result<Vec<SavingRow>, PlanError> {
    if !table.iter().any(|r| r.strategy == reference) {
        return Err(PlanError::MissingReference(reference.name().to_string()));
    }
    let mut out = Vec::new();
    for row in table {
        let reference_row = table
            .iter()
            .find(|r| r.sweep_value == row.sweep_value && r.strategy == reference)
            .ok_or_else(|| PlanError::MissingReference(reference.name().to_string()))?;
        let t_ref = reference_row.mean_avg_time_s;
        // The reference against itself is exactly zero, even when the
        // reference time itself is zero.
        let saving_pct = if t_ref == row.mean_avg_time_s {
            0.0
        } else {
            (t_ref - row.mean_avg_time_s) / t_ref * 100.0
        };
        out.push(SavingRow {
            sweep_value: row.sweep_value.clone(),
            strategy: row.strategy,
            saving_pct,
        });
    }
    Ok(out)
}

/// Deterministic CSV with a fixed column order.
pub fn emit_table(table: &[ResultRow]) -> String {
    let mut out = String::from("sweep_value,strategy,mean_avg_time_s,sd,mean_total_s,repeats\n");
    for r in table {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.sweep_value, r.strategy, r.mean_avg_time_s, r.sd, r.mean_total_s, r.repeats
        );
    }
    out
}

pub fn emit_runs(runs: &[RunRow]) -> String {
    let mut out = String::from("sweep_value,strategy,repeat,avg_time_s,total_s\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.sweep_value, r.strategy, r.repeat, r.avg_time_s, r.total_s
        );
    }
    out
}

pub fn emit_savings(savings: &[SavingRow]) -> String {
    let mut out = String::from("sweep_value,strategy,saving_pct\n");
    for r in savings {
        let _ = writeln!(out, "{},{},{}", r.sweep_value, r.strategy, r.saving_pct);
    }
    out
}

/// Parse a results CSV back into rows (for `summarize` runs on files).
pub fn parse_table(csv: &str) -> Result<Vec<ResultRow>, PlanError> {
    let mut out = Vec::new();
    for line in csv.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut f = line.split(',');
        let mut next = || f.next().unwrap_or_default().to_string();
        let sweep_value = next();
        let strategy = next();
        let strategy = Strategy::parse(&strategy)
            .ok_or_else(|| PlanError::MissingReference(strategy.clone()))?;
        out.push(ResultRow {
            sweep_value,
            strategy,
            mean_avg_time_s: next().parse().unwrap_or(f64::NAN),
            sd: next().parse().unwrap_or(f64::NAN),
            mean_total_s: next().parse().unwrap_or(f64::NAN),
            repeats: next().parse().unwrap_or(0),
        });
    }
    Ok(out)
}

/// Training-log CSV (episode, slot, reward, T_avg, MinT).
pub fn emit_train_log(log: &[crate::rl::TrainLogRow]) -> String {
    let mut out = String::from("episode,slot,reward,t_avg,min_t\n");
    for r in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.episode, r.slot, r.reward, r.t_avg, r.min_t
        );
    }
    out
}

/// Keep the charge policy nameable from plan files later if needed.
pub fn default_charge_policy() -> ChargePolicy {
    ChargePolicy::default()
}
