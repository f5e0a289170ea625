use std::collections::{BTreeMap, BTreeSet};

use super::engine::{place_build_time, SimConfig, Strategy};
use super::placer::{default_choices, placement_quality};
use super::state::{begin_slot, finish_slot, PendingDataset, SimulationState, SlotPrep};
use super::SimError;
use crate::model::{DatasetId, DcId, PlacementMap, Scenario};
use crate::rl::{
    ActionMatrix, EnvStep, PlacementEnv, RlError, StateCodec, StateVector, SystemSnapshot,
};

/// Training environment over the slotted simulation. Slots with no public
/// pending datasets run automatically; at each decision slot the agent
/// refines the placement of the pending batch, and `advance_slot` commits
/// the best proposal seen.
///
/// The slot structure is placement-independent (readiness is purely
/// topological), so every episode visits the same decision slots.
pub struct SlotPlacementEnv<'a> {
    scenario: &'a Scenario,
    cfg: SimConfig,
    codec: StateCodec,
    /// Episodes cycle through several build-time placements so the policy
    /// generalizes across the states other run seeds will produce.
    build_maps: Vec<PlacementMap>,
    episodes_seen: usize,
    st: SimulationState,
    prep: Option<SlotPrep>,
    pending_all: Vec<PendingDataset>,
    pending_ids: BTreeSet<DatasetId>,
    candidate: BTreeMap<DatasetId, DcId>,
    best: Option<(BTreeMap<DatasetId, DcId>, f64)>,
    default_time: f64,
    decision_index: usize,
}

impl<'a> SlotPlacementEnv<'a> {
    /// Build-time placements are computed once from seeds derived from
    /// the training seed; episodes then replay from those states in
    /// rotation.
    pub fn new(s: &'a Scenario, cfg: &SimConfig) -> Result<Self, SimError> {
        let mut build_maps = Vec::new();
        for k in 0..6u64 {
            let (map, _) =
                place_build_time(s, Strategy::DeDpso, cfg, cfg.rl_train.seed.wrapping_add(k))?;
            if !build_maps.contains(&map) {
                build_maps.push(map);
            }
        }
        let st = SimulationState::initialize(s, &build_maps[0], cfg.charge_policy)?;
        Ok(SlotPlacementEnv {
            scenario: s,
            cfg: cfg.clone(),
            codec: StateCodec::for_scenario(s),
            build_maps,
            episodes_seen: 0,
            st,
            prep: None,
            pending_all: Vec::new(),
            pending_ids: BTreeSet::new(),
            candidate: BTreeMap::new(),
            best: None,
            default_time: 0.0,
            decision_index: 0,
        })
    }

    /// Number of decision slots per episode (probed with a silent run).
    pub fn decision_slots(&mut self) -> Result<usize, RlError> {
        self.reset()?;
        let mut n = 1usize;
        while self.advance_slot()?.2.is_some() {
            n += 1;
        }
        Ok(n)
    }

    fn eval(&self, choices: &BTreeMap<DatasetId, DcId>) -> f64 {
        let prep = self.prep.as_ref().expect("at a decision slot");
        let fetch = prep.fetch_report.time.seconds_f64();
        fetch
            + placement_quality(self.scenario, &self.st, &self.pending_all, choices)
                .seconds_f64()
    }

    fn encode(&self) -> StateVector {
        let mut overlay = self.st.placement.clone();
        let mut used = self.st.used_mb.clone();
        for (&d, &dc) in &self.candidate {
            overlay.set(d, dc);
            if let (Some(ds), Some(pos)) = (self.scenario.dataset(d), self.scenario.dc_index(dc))
            {
                used[pos] += ds.size_mb;
            }
        }
        self.codec.encode_state(&SystemSnapshot {
            used_mb: &used,
            placement: &overlay,
            pending: &self.pending_ids,
        })
    }

    /// Run slots until one needs a placement decision; returns its state,
    /// or None when the episode is over.
    fn advance_to_decision(&mut self) -> Result<Option<StateVector>, SimError> {
        loop {
            if self.st.is_done(self.scenario) {
                self.prep = None;
                return Ok(None);
            }
            if self.st.slot >= self.cfg.max_slots {
                return Err(SimError::SlotLimit(self.cfg.max_slots));
            }
            let prep = begin_slot(&mut self.st, self.scenario)?;
            if prep.pending_public.is_empty() {
                finish_slot(&mut self.st, self.scenario, &prep, &BTreeMap::new())?;
                continue;
            }
            let mut pending_all = prep.pending_public.clone();
            pending_all.extend(prep.pending_private.iter().copied());
            pending_all.sort_by_key(|p| p.id);
            self.pending_ids = prep.pending_public.iter().map(|p| p.id).collect();
            self.pending_all = pending_all;
            self.prep = Some(prep);
            let mut default = default_choices(
                self.scenario,
                &self.st,
                &self.pending_all,
            )?;
            // Privates always sit at home in the choice map.
            for p in &self.pending_all {
                if let Some(home) = self.scenario.dataset(p.id).and_then(|d| d.home) {
                    default.insert(p.id, home);
                }
            }
            let t = self.eval(&default);
            self.candidate = default.clone();
            self.best = Some((default, t));
            self.default_time = t;
            return Ok(Some(self.encode()));
        }
    }
}

fn to_rl(e: SimError) -> RlError {
    RlError::Env(e.to_string())
}

impl PlacementEnv for SlotPlacementEnv<'_> {
    fn codec(&self) -> &StateCodec {
        &self.codec
    }

    fn reset(&mut self) -> Result<StateVector, RlError> {
        let map = &self.build_maps[self.episodes_seen % self.build_maps.len()];
        self.episodes_seen += 1;
        self.st = SimulationState::initialize(self.scenario, map, self.cfg.charge_policy)
            .map_err(to_rl)?;
        self.decision_index = 0;
        self.advance_to_decision()
            .map_err(to_rl)?
            .ok_or_else(|| RlError::Env("scenario has no decision slots".into()))
    }

    fn current_slot_time(&self) -> f64 {
        self.default_time
    }

    fn propose(&mut self, action: &ActionMatrix) -> Result<EnvStep, RlError> {
        let mut decisions = self.codec.decode_action(
            action,
            &self.pending_ids,
            self.scenario,
            &self.st.placement,
        )?;
        for p in &self.pending_all {
            if let Some(home) = self.scenario.dataset(p.id).and_then(|d| d.home) {
                decisions.insert(p.id, home);
            }
        }
        let t = self.eval(&decisions);
        match &self.best {
            Some((_, bt)) if *bt <= t => {}
            _ => self.best = Some((decisions.clone(), t)),
        }
        let realized_action = self.codec.placement_one_hot(&decisions);
        self.candidate = decisions;
        Ok(EnvStep {
            state: self.encode(),
            slot_time: t,
            realized_action,
        })
    }

    fn advance_slot(&mut self) -> Result<(f64, Vec<f64>, Option<StateVector>), RlError> {
        let prep = self
            .prep
            .take()
            .ok_or_else(|| RlError::Env("advance_slot outside a decision slot".into()))?;
        let (choices, committed) = self
            .best
            .take()
            .ok_or_else(|| RlError::Env("no proposal to commit".into()))?;
        let committed_action = self.codec.placement_one_hot(&choices);
        finish_slot(&mut self.st, self.scenario, &prep, &choices).map_err(to_rl)?;
        self.decision_index += 1;
        self.candidate.clear();
        self.pending_all.clear();
        self.pending_ids.clear();
        let next = self.advance_to_decision().map_err(to_rl)?;
        Ok((committed, committed_action, next))
    }

    fn slot_index(&self) -> usize {
        self.decision_index
    }
}
