use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::placer::{BirthSitePlacer, RlPolicyPlacer, RuntimePlacer, SlotOptimizerPlacer};
use super::state::{advance_slot, SimulationState};
use super::{SimError, SlotPlacementEnv};
use crate::model::{
    stage_transfer_time, total_transfer_time, validate_scenario, ChargePolicy, PlacementMap,
    Scenario, SlotReport, Stage, TransferTime,
};
use crate::optimize::{run_metaheuristic, MetaheuristicKind, OptimizerConfig, SelectionRule};
use crate::rl::{train, ActorCritic, StateCodec, TrainConfig};

/// The six end-to-end placement strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    De,
    Dpso,
    GaDpso,
    DeDpso,
    DymRl,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Random,
        Strategy::De,
        Strategy::Dpso,
        Strategy::GaDpso,
        Strategy::DeDpso,
        Strategy::DymRl,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::De => "de",
            Strategy::Dpso => "dpso",
            Strategy::GaDpso => "ga_dpso",
            Strategy::DeDpso => "de_dpso",
            Strategy::DymRl => "dym_rl",
        }
    }

    pub fn parse(name: &str) -> Option<Strategy> {
        Strategy::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// Build-time heuristic behind each strategy; the runtime RL strategy
    /// pre-places with the hybrid optimizer.
    fn build_kind(&self) -> MetaheuristicKind {
        match self {
            Strategy::Random => MetaheuristicKind::Random,
            Strategy::De => MetaheuristicKind::De,
            Strategy::Dpso => MetaheuristicKind::Dpso,
            Strategy::GaDpso => MetaheuristicKind::GaDpso,
            Strategy::DeDpso | Strategy::DymRl => MetaheuristicKind::DeDpso,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a run needs beyond the scenario: optimizer budgets, the
/// charge policy, and (for the RL strategy) either a trained policy or a
/// training budget.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Build-time optimizer budget.
    pub optimizer: OptimizerConfig,
    /// Per-slot optimizer budget for the metaheuristic runtime placers.
    pub slot_optimizer: OptimizerConfig,
    pub charge_policy: ChargePolicy,
    pub selection_rule: SelectionRule,
    /// Trained networks for the RL strategy; when absent, `run_strategy`
    /// trains first using `rl_train`.
    pub rl_policy: Option<ActorCritic>,
    pub rl_train: TrainConfig,
    pub max_slots: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            optimizer: OptimizerConfig::default(),
            slot_optimizer: OptimizerConfig::desk_scale(0),
            charge_policy: ChargePolicy::default(),
            selection_rule: SelectionRule::default(),
            rl_policy: None,
            rl_train: TrainConfig::default(),
            max_slots: 10_000,
        }
    }
}

impl SimConfig {
    /// Small budgets for tests and sweeps.
    pub fn desk_scale() -> Self {
        SimConfig {
            optimizer: OptimizerConfig {
                n: 24,
                itermax: 60,
                ..Default::default()
            },
            slot_optimizer: OptimizerConfig {
                n: 16,
                itermax: 40,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

/// Build-time stage: privates go home, publics are placed by the chosen
/// strategy's heuristic; returns the map and the build-stage transfer
/// time under it.
pub fn place_build_time(
    s: &Scenario,
    strategy: Strategy,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(PlacementMap, TransferTime), SimError> {
    let opt_cfg = OptimizerConfig {
        seed,
        ..cfg.optimizer
    };
    let (map, time) = run_metaheuristic(strategy.build_kind(), s, &opt_cfg, cfg.selection_rule)?;
    Ok((map, time))
}

/// Per-run accounting: slot reports, the stage split, and the invariant
/// counters.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub strategy: Strategy,
    pub seed: u64,
    pub reports: Vec<SlotReport>,
    pub build_time: TransferTime,
    pub runtime_total: TransferTime,
    pub avg_slot_time: TransferTime,
    pub total: TransferTime,
    pub slots: u32,
    pub invariant_checks: u64,
    pub invariant_violations: u64,
}

impl RunSummary {
    /// Slot rows plus a footer record.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,moves,bytes_mb,time_s\n");
        for r in &self.reports {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.slot,
                r.moves,
                r.bytes_mb,
                r.time.seconds_f64()
            );
        }
        out.push_str("build_time_s,runtime_total_s,avg_slot_time_s,total_s\n");
        let _ = writeln!(
            out,
            "{},{},{},{}",
            self.build_time.seconds_f64(),
            self.runtime_total.seconds_f64(),
            self.avg_slot_time.seconds_f64(),
            self.total.seconds_f64()
        );
        out
    }
}

/// End-to-end run of one strategy: validate, pre-place, then advance
/// slots until every task has run and no event remains.
pub fn run_strategy(
    s: &Scenario,
    strategy: Strategy,
    cfg: &SimConfig,
    seed: u64,
) -> Result<RunSummary, SimError> {
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(SimError::InvalidScenario(violations));
    }

    let (build_map, build_time) = place_build_time(s, strategy, cfg, seed)?;
    debug_assert_eq!(
        build_time,
        stage_transfer_time(s, &build_map, Stage::Build, cfg.charge_policy)?.total
    );

    let mut placer: Box<dyn RuntimePlacer> = match strategy {
        Strategy::Random => Box::new(BirthSitePlacer::new(seed ^ 0xB1B7)),
        Strategy::De | Strategy::Dpso | Strategy::GaDpso | Strategy::DeDpso => {
            Box::new(SlotOptimizerPlacer::new(
                strategy.build_kind(),
                OptimizerConfig {
                    seed: seed ^ 0x510D,
                    ..cfg.slot_optimizer
                },
            ))
        }
        Strategy::DymRl => {
            let nets = match &cfg.rl_policy {
                Some(nets) => nets.clone(),
                None => {
                    let mut env = SlotPlacementEnv::new(s, cfg)?;
                    train(&mut env, &cfg.rl_train)?.nets
                }
            };
            let codec = StateCodec::for_scenario(s);
            Box::new(RlPolicyPlacer::new(nets, codec))
        }
    };

    let mut st = SimulationState::initialize(s, &build_map, cfg.charge_policy)?;
    st.check_invariants(s)?;
    let mut reports = Vec::new();
    let mut runtime_total = TransferTime::zero();
    let mut idle_streak = 0u32;
    while !st.is_done(s) {
        if st.slot >= cfg.max_slots {
            return Err(SimError::SlotLimit(cfg.max_slots));
        }
        let finished_before = st.finished.len();
        let report = advance_slot(&mut st, s, placer.as_mut())?;
        runtime_total += &report.time;
        let executed = st.finished.len() > finished_before;
        let event_fired = s.events.iter().any(|e| e.slot == report.slot);
        reports.push(report);
        if st.is_done(s) {
            break;
        }
        // Stall detection: nothing ran, nothing arrived, nothing will.
        let future_events = s.events.iter().any(|e| e.slot > st.slot);
        if !executed && !event_fired && !future_events {
            idle_streak += 1;
            if idle_streak >= 2 {
                return Err(SimError::Stalled { slot: st.slot });
            }
        } else {
            idle_streak = 0;
        }
    }
    let slots = reports.len() as u32;
    let avg_slot_time = runtime_total.div_count(slots as usize);
    let total = total_transfer_time(&build_time, &runtime_total);
    Ok(RunSummary {
        strategy,
        seed,
        reports,
        build_time,
        runtime_total,
        avg_slot_time,
        total,
        slots,
        invariant_checks: st.checks,
        invariant_violations: st.violations,
    })
}
