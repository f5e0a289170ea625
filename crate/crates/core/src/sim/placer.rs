use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};


use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::state::{PendingDataset, SimulationState};
use super::SimError;
use crate::model::{
    assign_task, ChargePolicy, DatasetId, DcId, Scenario, TransferTime,
};
use crate::optimize::{
    repair_pending, run_discrete_search, MetaheuristicKind, OptimizerConfig, Particle,
    SelectionRule,
};
use crate::rl::{ActorCritic, StateCodec, SystemSnapshot};

/// Decide datacenters for this slot's pending public datasets.
pub trait RuntimePlacer {
    fn place(
        &mut self,
        s: &Scenario,
        st: &SimulationState,
        pending: &[PendingDataset],
    ) -> Result<BTreeMap<DatasetId, DcId>, SimError>;
}

/// Cost signal the runtime optimizers minimize for one slot: the
/// distribution moves of the pending datasets plus the fetches their
/// still-unfinished consumers will pay, under the task-assignment rule.
pub fn placement_quality(
    s: &Scenario,
    st: &SimulationState,
    pending: &[PendingDataset],
    choices: &BTreeMap<DatasetId, DcId>,
) -> TransferTime {
    let mut map = st.placement.clone();
    for (&d, &dc) in choices {
        map.set(d, dc);
    }
    let mut total = TransferTime::zero();
    for p in pending {
        let Some(&dest) = choices.get(&p.id) else { continue };
        let size = s.dataset(p.id).map(|ds| ds.size_mb).unwrap_or(0);
        if let Some(birth) = p.birth {
            if birth != dest {
                let from = s.dc_index(birth).expect("birth exists");
                let to = s.dc_index(dest).expect("destination exists");
                total += s.bandwidth.transfer_time(from, to, size);
            }
        }
    }
    let mut seen: BTreeSet<(DatasetId, DcId)> = BTreeSet::new();
    for p in pending {
        let Some(&loc) = choices.get(&p.id) else { continue };
        let Some(ds) = s.dataset(p.id) else { continue };
        for &t in &ds.consumers {
            if st.finished.contains(&t) || st.removed.contains(&t) {
                continue;
            }
            let dc = match st.assigned.get(&t) {
                Some(&dc) => dc,
                None => s.datacenters[assign_task(s, &map, t)].id,
            };
            if dc == loc {
                continue;
            }
            let charge = match st.charge_policy {
                ChargePolicy::PerTransfer => seen.insert((p.id, dc)),
                ChargePolicy::PerConsumer => true,
            };
            if charge {
                let from = s.dc_index(loc).expect("location exists");
                let to = s.dc_index(dc).expect("assignment exists");
                total += s.bandwidth.transfer_time(from, to, ds.size_mb);
            }
        }
    }
    total
}

/// Default decisions before any optimization: born datasets stay at their
/// birth site, arrivals go to the emptiest edge, privates go home.
pub fn default_choices(
    s: &Scenario,
    st: &SimulationState,
    pending: &[PendingDataset],
) -> Result<BTreeMap<DatasetId, DcId>, SimError> {
    let mut choices = BTreeMap::new();
    let mut free: Vec<(u64, usize)> = s
        .datacenters
        .iter()
        .enumerate()
        .filter_map(|(i, dc)| {
            dc.capacity
                .mb()
                .map(|cap| (cap.saturating_sub(st.used_mb[i]), i))
        })
        .collect();
    for p in pending {
        let dest = match (s.dataset(p.id).and_then(|d| d.home), p.birth) {
            (Some(home), _) => home,
            (None, Some(birth)) => birth,
            (None, None) => {
                free.sort_by_key(|&(room, i)| (std::cmp::Reverse(room), i));
                match free.first_mut() {
                    Some(slot) => {
                        let size = s.dataset(p.id).map(|d| d.size_mb).unwrap_or(0);
                        slot.0 = slot.0.saturating_sub(size);
                        s.datacenters[slot.1].id
                    }
                    None => {
                        let pos = s.region_cloud(0).unwrap_or(0);
                        s.datacenters[pos].id
                    }
                }
            }
        };
        choices.insert(p.id, dest);
    }
    repair_pending(s, &st.placement, &mut choices)?;
    Ok(choices)
}

/// The random strategy's runtime rule: generated datasets stay where the
/// producing task ran; arrivals are placed uniformly at random.
pub struct BirthSitePlacer {
    rng: ChaCha12Rng,
}

impl BirthSitePlacer {
    pub fn new(seed: u64) -> Self {
        BirthSitePlacer {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }
}

impl RuntimePlacer for BirthSitePlacer {
    fn place(
        &mut self,
        s: &Scenario,
        st: &SimulationState,
        pending: &[PendingDataset],
    ) -> Result<BTreeMap<DatasetId, DcId>, SimError> {
        let mut choices = BTreeMap::new();
        for p in pending {
            let dest = match p.birth {
                Some(birth) => birth,
                None => {
                    let pos = self.rng.random_range(0..s.datacenters.len());
                    s.datacenters[pos].id
                }
            };
            choices.insert(p.id, dest);
        }
        repair_pending(s, &st.placement, &mut choices)?;
        Ok(choices)
    }
}

/// Metaheuristic strategies re-run their optimizer each slot, scoped to
/// the pending datasets with the rest of the placement frozen.
pub struct SlotOptimizerPlacer {
    kind: MetaheuristicKind,
    cfg: OptimizerConfig,
    calls: u64,
}

impl SlotOptimizerPlacer {
    pub fn new(kind: MetaheuristicKind, cfg: OptimizerConfig) -> Self {
        SlotOptimizerPlacer {
            kind,
            cfg,
            calls: 0,
        }
    }
}

impl RuntimePlacer for SlotOptimizerPlacer {
    fn place(
        &mut self,
        s: &Scenario,
        st: &SimulationState,
        pending: &[PendingDataset],
    ) -> Result<BTreeMap<DatasetId, DcId>, SimError> {
        self.calls += 1;
        if pending.is_empty() {
            return Ok(BTreeMap::new());
        }
        let dim = pending.len();
        let num_dc = s.datacenters.len();
        // Independent stream per slot, derived from the run seed.
        let cfg = OptimizerConfig {
            seed: self.cfg.seed.wrapping_add(self.calls.wrapping_mul(0x9e37_79b9)),
            ..self.cfg
        };
        let decode = |p: &Particle| -> Result<BTreeMap<DatasetId, DcId>, crate::optimize::OptimError> {
            let mut choices = BTreeMap::new();
            for (k, pd) in pending.iter().enumerate() {
                let pos = p.positions[k] as usize;
                choices.insert(pd.id, s.datacenters[pos].id);
            }
            repair_pending(s, &st.placement, &mut choices)?;
            Ok(choices)
        };
        // Seed the swarm with the stay-at-birth incumbent so the search
        // never regresses below it.
        let incumbent = default_choices(s, st, pending)?;
        let warm = Particle::new(
            pending
                .iter()
                .map(|p| {
                    let dc = incumbent.get(&p.id).copied().expect("incumbent covers pending");
                    s.dc_index(dc).expect("known datacenter") as u16
                })
                .collect(),
        );
        let (best, _) = run_discrete_search(
            self.kind,
            dim,
            num_dc,
            &cfg,
            SelectionRule::default(),
            Some(warm),
            &mut |p| {
                let choices = decode(p)?;
                Ok(placement_quality(s, st, pending, &choices))
            },
        )?;
        Ok(decode(&best)?)
    }
}

/// Greedy evaluation of a trained policy: one actor pass per slot.
pub struct RlPolicyPlacer {
    nets: ActorCritic,
    codec: StateCodec,
}

impl RlPolicyPlacer {
    pub fn new(nets: ActorCritic, codec: StateCodec) -> Self {
        RlPolicyPlacer { nets, codec }
    }

    pub fn codec(&self) -> &StateCodec {
        &self.codec
    }
}

impl RuntimePlacer for RlPolicyPlacer {
    fn place(
        &mut self,
        s: &Scenario,
        st: &SimulationState,
        pending: &[PendingDataset],
    ) -> Result<BTreeMap<DatasetId, DcId>, SimError> {
        if pending.is_empty() {
            return Ok(BTreeMap::new());
        }
        // Pending datasets appear at their birth site (if any) while the
        // policy decides.
        let mut overlay = st.placement.clone();
        let pending_ids: BTreeSet<DatasetId> = pending.iter().map(|p| p.id).collect();
        for p in pending {
            if let Some(birth) = p.birth {
                overlay.set(p.id, birth);
            }
        }
        let state = self.codec.encode_state(&SystemSnapshot {
            used_mb: &st.used_mb,
            placement: &overlay,
            pending: &pending_ids,
        });
        let flat = self.nets.actor.forward(&state).map_err(SimError::Rl)?;
        let action = self.codec.action_from_flat(flat);
        let decisions = self
            .codec
            .decode_action(&action, &pending_ids, s, &st.placement)
            .map_err(SimError::Rl)?;
        Ok(decisions)
    }
}
