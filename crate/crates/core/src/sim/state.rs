use std::collections::{BTreeMap, BTreeSet};

use super::placer::RuntimePlacer;
use super::SimError;
use crate::model::{
    slot_transfer_time, ChargePolicy, DatasetId, DcId, DcKind, PlacementMap, Scenario, SlotReport,
    TaskId, WorkflowId,
};

/// A dataset awaiting a placement decision this slot. `birth` is the
/// datacenter it was produced at; datasets injected by workflow arrivals
/// have no birth site and their placement is free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingDataset {
    pub id: DatasetId,
    pub birth: Option<DcId>,
}

/// Mutable run state: the live placement, task queues, per-datacenter
/// load, and the invariant counters.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub slot: u32,
    pub placement: PlacementMap,
    pub live: BTreeSet<DatasetId>,
    pub ready: Vec<TaskId>,
    pub finished: BTreeSet<TaskId>,
    pub removed: BTreeSet<TaskId>,
    pub present: BTreeSet<WorkflowId>,
    pub used_mb: Vec<u64>,
    pub assigned: BTreeMap<TaskId, DcId>,
    pub charge_policy: ChargePolicy,
    /// (dataset, task) fetches already covered by the build-time figure.
    prepaid_datasets: BTreeSet<DatasetId>,
    initial_workflows: BTreeSet<WorkflowId>,
    pub checks: u64,
    pub violations: u64,
}

impl SimulationState {
    /// State after the build-time stage: private homes and optimizer
    /// placements are live, no task has run.
    pub fn initialize(
        s: &Scenario,
        build_map: &PlacementMap,
        charge_policy: ChargePolicy,
    ) -> Result<Self, SimError> {
        let mut used = vec![0u64; s.datacenters.len()];
        let mut live = BTreeSet::new();
        for (d, dc) in build_map.iter() {
            let ds = s
                .dataset(d)
                .ok_or(crate::model::ModelError::UnknownDataset(d))?;
            let pos = s
                .dc_index(dc)
                .ok_or(crate::model::ModelError::UnknownDatacenter(dc))?;
            used[pos] += ds.size_mb;
            live.insert(d);
        }
        let present: BTreeSet<WorkflowId> = s.initial_workflows().into_iter().collect();
        let st = SimulationState {
            slot: 0,
            placement: build_map.clone(),
            live: live.clone(),
            ready: Vec::new(),
            finished: BTreeSet::new(),
            removed: BTreeSet::new(),
            present: present.clone(),
            used_mb: used,
            assigned: BTreeMap::new(),
            charge_policy,
            prepaid_datasets: live,
            initial_workflows: present,
            checks: 0,
            violations: 0,
        };
        Ok(st)
    }

    /// A fetch of `d` by `task` was already charged by the build figure.
    pub fn is_prepaid(&self, d: DatasetId, task_wf: WorkflowId) -> bool {
        self.prepaid_datasets.contains(&d) && self.initial_workflows.contains(&task_wf)
    }

    /// All work done and no event left to fire.
    pub fn is_done(&self, s: &Scenario) -> bool {
        let future_events = s.events.iter().any(|e| e.slot > self.slot);
        if future_events {
            return false;
        }
        s.tasks_by_id().all(|(t, wf)| {
            !self.present.contains(&wf)
                || self.finished.contains(&t)
                || self.removed.contains(&t)
        })
    }

    fn load_of(&mut self, s: &Scenario, d: DatasetId) -> u64 {
        s.dataset(d).map(|ds| ds.size_mb).unwrap_or(0)
    }

    pub(crate) fn place_live(&mut self, s: &Scenario, d: DatasetId, dc: DcId) {
        let size = self.load_of(s, d);
        if let Some(old) = self.placement.get(d) {
            if let Some(pos) = s.dc_index(old) {
                self.used_mb[pos] -= size;
            }
        }
        if let Some(pos) = s.dc_index(dc) {
            self.used_mb[pos] += size;
        }
        self.placement.set(d, dc);
        self.live.insert(d);
    }

    fn drop_live(&mut self, s: &Scenario, d: DatasetId) {
        if let Some(dc) = self.placement.remove(d) {
            let size = self.load_of(s, d);
            if let Some(pos) = s.dc_index(dc) {
                self.used_mb[pos] -= size;
            }
        }
        self.live.remove(&d);
    }

    /// Capacity, privacy-home fixity, and topological-order checks; any
    /// failure is fatal.
    pub fn check_invariants(&mut self, s: &Scenario) -> Result<(), SimError> {
        for (i, dc) in s.datacenters.iter().enumerate() {
            self.checks += 1;
            if dc.kind == DcKind::Edge && !dc.capacity.allows(self.used_mb[i]) {
                self.violations += 1;
                return Err(SimError::Invariant {
                    slot: self.slot,
                    what: format!("{} over capacity: {} MB", dc.id, self.used_mb[i]),
                });
            }
        }
        for d in s.datasets.iter().filter(|d| d.is_private()) {
            if let Some(loc) = self.placement.get(d.id) {
                self.checks += 1;
                if Some(loc) != d.home {
                    self.violations += 1;
                    return Err(SimError::Invariant {
                        slot: self.slot,
                        what: format!("private dataset {} relocated to {}", d.id, loc),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Outcome of the first half of a slot: events applied, ready tasks
/// executed and their fetches charged, outputs born but not yet placed.
#[derive(Debug, Clone)]
pub struct SlotPrep {
    pub slot: u32,
    pub executed: Vec<TaskId>,
    /// Public datasets awaiting a placement decision.
    pub pending_public: Vec<PendingDataset>,
    /// Private datasets headed home, with their birth site.
    pub pending_private: Vec<PendingDataset>,
    pub fetch_report: SlotReport,
    pub had_events: bool,
}

/// Run the first half of slot `st.slot + 1`: apply departures and
/// arrivals, promote and execute ready tasks (charging their fetches),
/// and emit this wave's outputs.
pub fn begin_slot(st: &mut SimulationState, s: &Scenario) -> Result<SlotPrep, SimError> {
    st.slot += 1;
    let slot = st.slot;
    let mut had_events = false;
    let mut pending_public: Vec<PendingDataset> = Vec::new();
    let mut pending_private: Vec<PendingDataset> = Vec::new();

    // Departures release tasks and datasets nothing still needs.
    for e in s.events.iter().filter(|e| e.slot == slot) {
        had_events |= !e.depart.is_empty() || !e.arrive.is_empty();
        for &w in &e.depart {
            st.present.remove(&w);
            let Some(wf) = s.workflows.iter().find(|x| x.id == w) else {
                continue;
            };
            for t in &wf.tasks {
                if !st.finished.contains(&t.id) {
                    st.removed.insert(t.id);
                }
            }
            let drop: Vec<DatasetId> = st
                .live
                .iter()
                .copied()
                .filter(|&d| !retained_after_departure(st, s, d))
                .collect();
            for d in drop {
                st.drop_live(s, d);
            }
        }
    }

    // Arrivals inject the workflow's initial datasets: privates go home,
    // publics await the placer. Neither incurs a transfer.
    for e in s.events.iter().filter(|e| e.slot == slot) {
        for &w in &e.arrive {
            if !s.workflows.iter().any(|x| x.id == w) {
                continue;
            }
            st.present.insert(w);
            let mut inject: Vec<DatasetId> = s
                .datasets
                .iter()
                .filter(|d| d.is_initial() && !st.live.contains(&d.id))
                .filter(|d| {
                    d.consumers
                        .iter()
                        .any(|t| s.task_workflow(*t) == Some(w))
                })
                .map(|d| d.id)
                .collect();
            inject.sort();
            for d in inject {
                let entry = PendingDataset { id: d, birth: None };
                if s.dataset(d).is_some_and(|ds| ds.is_private()) {
                    pending_private.push(entry);
                } else {
                    pending_public.push(entry);
                }
            }
        }
    }

    // Promote ready tasks: predecessors finished, inputs live.
    let mut wave: Vec<TaskId> = Vec::new();
    for wf in &s.workflows {
        if !st.present.contains(&wf.id) {
            continue;
        }
        let preds: BTreeMap<TaskId, Vec<TaskId>> = {
            let mut m: BTreeMap<TaskId, Vec<TaskId>> = BTreeMap::new();
            for &(a, b) in &wf.edges {
                m.entry(b).or_default().push(a);
            }
            m
        };
        for t in &wf.tasks {
            if st.finished.contains(&t.id) || st.removed.contains(&t.id) {
                continue;
            }
            let preds_done = preds
                .get(&t.id)
                .map(|v| v.iter().all(|p| st.finished.contains(p)))
                .unwrap_or(true);
            let inputs_live = t.inputs.iter().all(|d| st.live.contains(d));
            if preds_done && inputs_live {
                wave.push(t.id);
            }
        }
    }
    wave.sort();
    st.ready = wave.clone();

    // Execute the wave: assign datacenters under the current placement and
    // charge the fetches the build figure does not already cover.
    let mut demands: Vec<(DatasetId, DcId)> = Vec::new();
    let mut seen: BTreeSet<(DatasetId, DcId)> = BTreeSet::new();
    for &t in &wave {
        let pos = crate::model::assign_task(s, &st.placement, t);
        let dc = s.datacenters[pos].id;
        st.assigned.insert(t, dc);
        let wf = s.task_workflow(t).expect("task has a workflow");
        for &d in s.task_inputs(t) {
            if !st.live.contains(&d) || st.is_prepaid(d, wf) {
                continue;
            }
            match st.charge_policy {
                ChargePolicy::PerTransfer => {
                    if seen.insert((d, dc)) {
                        demands.push((d, dc));
                    }
                }
                ChargePolicy::PerConsumer => demands.push((d, dc)),
            }
        }
    }
    let fetch_report = slot_transfer_time(s, &st.placement, &demands, slot)?;

    // Topological soundness: executing implies every predecessor finished.
    for &t in &wave {
        let wf = s
            .workflows
            .iter()
            .find(|w| w.tasks.iter().any(|x| x.id == t))
            .expect("task belongs to a workflow");
        for &(a, b) in &wf.edges {
            if b == t {
                st.checks += 1;
                if !st.finished.contains(&a) {
                    st.violations += 1;
                    return Err(SimError::Invariant {
                        slot,
                        what: format!("{t} executed before predecessor {a}"),
                    });
                }
            }
        }
    }

    // Outputs are born at the producing task's datacenter.
    for &t in &wave {
        let birth = st.assigned.get(&t).copied();
        for &d in s.task_outputs(t) {
            let Some(ds) = s.dataset(d) else { continue };
            let entry = PendingDataset { id: d, birth };
            if ds.is_private() {
                pending_private.push(entry);
            } else {
                pending_public.push(entry);
            }
        }
    }
    pending_public.sort_by_key(|p| p.id);
    pending_private.sort_by_key(|p| p.id);

    Ok(SlotPrep {
        slot,
        executed: wave,
        pending_public,
        pending_private,
        fetch_report,
        had_events,
    })
}

/// A live dataset survives a departure when some still-present unfinished
/// consumer needs it, or it is a final output of a still-present workflow.
fn retained_after_departure(st: &SimulationState, s: &Scenario, d: DatasetId) -> bool {
    let Some(ds) = s.dataset(d) else { return true };
    if ds.consumers.is_empty() {
        let producer_wf = ds
            .producers
            .first()
            .and_then(|&t| s.task_workflow(t));
        return match producer_wf {
            Some(w) => st.present.contains(&w),
            None => true,
        };
    }
    ds.consumers.iter().any(|&t| {
        !st.finished.contains(&t)
            && !st.removed.contains(&t)
            && s.task_workflow(t).is_some_and(|w| st.present.contains(&w))
    })
}

/// Commit the slot: charge distribution moves, place the new datasets,
/// retire the executed wave, evict spent datasets, and check invariants.
pub fn finish_slot(
    st: &mut SimulationState,
    s: &Scenario,
    prep: &SlotPrep,
    decisions: &BTreeMap<DatasetId, DcId>,
) -> Result<SlotReport, SimError> {
    let mut report = prep.fetch_report.clone();

    for p in prep.pending_private.iter().chain(prep.pending_public.iter()) {
        let dest = match s.dataset(p.id).and_then(|d| d.home) {
            Some(home) => home,
            None => decisions.get(&p.id).copied().ok_or_else(|| SimError::Invariant {
                slot: prep.slot,
                what: format!("no placement decision for pending dataset {}", p.id),
            })?,
        };
        if let Some(birth) = p.birth {
            if birth != dest {
                let size = st.load_of(s, p.id);
                let from = s.dc_index(birth).expect("birth datacenter exists");
                let to = s.dc_index(dest).expect("destination exists");
                report.time += s.bandwidth.transfer_time(from, to, size);
                report.bytes_mb += size;
                report.moves += 1;
            }
        }
        st.place_live(s, p.id, dest);
    }

    // Capacity repair may displace resident public datasets to make room
    // for immovable private arrivals; those relocations are charged like
    // any other move.
    let pending_ids: BTreeSet<DatasetId> = prep
        .pending_public
        .iter()
        .chain(prep.pending_private.iter())
        .map(|p| p.id)
        .collect();
    for (&d, &dest) in decisions.iter() {
        if pending_ids.contains(&d) {
            continue;
        }
        let Some(current) = st.placement.get(d) else {
            continue;
        };
        if current != dest {
            let size = st.load_of(s, d);
            let from = s.dc_index(current).expect("current location exists");
            let to = s.dc_index(dest).expect("destination exists");
            report.time += s.bandwidth.transfer_time(from, to, size);
            report.bytes_mb += size;
            report.moves += 1;
            st.place_live(s, d, dest);
        }
    }

    for &t in &prep.executed {
        st.finished.insert(t);
    }
    st.ready.clear();

    evict_consumed(st, s);
    st.check_invariants(s)?;
    Ok(report)
}

/// Remove live datasets whose consumers have all finished (or departed).
/// Final outputs, which have no consumers, are exempt.
pub fn evict_consumed(st: &mut SimulationState, s: &Scenario) {
    let spent: Vec<DatasetId> = st
        .live
        .iter()
        .copied()
        .filter(|&d| {
            let Some(ds) = s.dataset(d) else { return false };
            !ds.consumers.is_empty()
                && ds
                    .consumers
                    .iter()
                    .all(|t| st.finished.contains(t) || st.removed.contains(t))
        })
        .collect();
    for d in spent {
        st.drop_live(s, d);
    }
}

/// One full slot under a runtime placer.
pub fn advance_slot(
    st: &mut SimulationState,
    s: &Scenario,
    placer: &mut dyn RuntimePlacer,
) -> Result<SlotReport, SimError> {
    let prep = begin_slot(st, s)?;
    let decisions = placer.place(s, st, &prep.pending_public)?;
    finish_slot(st, s, &prep, &decisions)
}
