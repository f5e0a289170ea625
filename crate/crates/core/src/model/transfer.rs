//! Transfer-time accounting shared by the optimizers and the simulator.

use std::collections::BTreeSet;

use super::{
    DatasetId, DcId, DcKind, ModelError, PlacementMap, Scenario, SlotReport, TaskId, TransferTime,
};

/// How repeated demands for one dataset are charged.
///
/// `PerTransfer` charges each distinct (dataset, destination) once: the
/// dataset is brought to a datacenter once and co-located demands in the
/// same wave are free. `PerConsumer` charges every consuming task
/// independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChargePolicy {
    #[default]
    PerTransfer,
    PerConsumer,
}

/// Which dataset generation a stage covers: build time sees only initial
/// datasets, runtime only generated ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Build,
    Runtime,
}

/// Stage transfer time decomposed by dataset class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageTimes {
    pub private: TransferTime,
    pub public_shared: TransferTime,
    pub public_unshared: TransferTime,
    pub total: TransferTime,
}

/// Datacenter (position) a task runs at: the one minimizing the cost of
/// fetching its currently placed inputs, ties broken by lowest id.
pub fn assign_task(s: &Scenario, p: &PlacementMap, task: TaskId) -> usize {
    let mut best: Option<(TransferTime, DcId, usize)> = None;
    // Candidate order by ascending datacenter id makes the tie rule local.
    let mut order: Vec<usize> = (0..s.datacenters.len()).collect();
    order.sort_by_key(|&i| s.datacenters[i].id);
    for cand in order {
        let mut cost = TransferTime::zero();
        for &d in s.task_inputs(task) {
            let Some(loc) = p.get(d) else { continue };
            let Some(loc_pos) = s.dc_index(loc) else { continue };
            if loc_pos != cand {
                let size = s.dataset(d).map(|ds| ds.size_mb).unwrap_or(0);
                cost += s.bandwidth.transfer_time(loc_pos, cand, size);
            }
        }
        let id = s.datacenters[cand].id;
        match &best {
            Some((c, _, _)) if *c <= cost => {}
            _ => best = Some((cost, id, cand)),
        }
    }
    best.map(|(_, _, pos)| pos).unwrap_or(0)
}

/// Demands of one stage: which datasets must reach which datacenters for
/// the consuming tasks to run, under the task-assignment rule and the
/// charge policy. Tasks are visited in ascending id order.
pub fn build_stage_demands(
    s: &Scenario,
    p: &PlacementMap,
    stage: Stage,
    policy: ChargePolicy,
) -> Vec<(DatasetId, DcId)> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<(DatasetId, DcId)> = BTreeSet::new();
    for (task, wf) in s.tasks_by_id() {
        if stage == Stage::Build && !s.workflow_initially_present(wf) {
            // Tasks of later-arriving workflows fetch at runtime.
            continue;
        }
        let mut dest: Option<DcId> = None;
        for &d in s.task_inputs(task) {
            let Some(ds) = s.dataset(d) else { continue };
            let in_stage = match stage {
                Stage::Build => s.dataset_build_present(d),
                Stage::Runtime => !ds.is_initial(),
            };
            if !in_stage || !p.contains(d) {
                continue;
            }
            let dc = match dest {
                Some(dc) => dc,
                None => {
                    let dc = s.datacenters[assign_task(s, p, task)].id;
                    dest = Some(dc);
                    dc
                }
            };
            match policy {
                ChargePolicy::PerTransfer => {
                    if seen.insert((d, dc)) {
                        out.push((d, dc));
                    }
                }
                ChargePolicy::PerConsumer => out.push((d, dc)),
            }
        }
    }
    out
}

/// Sum the demands of one slot: each demand whose dataset is not already
/// at the destination adds size/bandwidth seconds. Demands are summed
/// independently (no contention model).
pub fn slot_transfer_time(
    s: &Scenario,
    p: &PlacementMap,
    demands: &[(DatasetId, DcId)],
    slot: u32,
) -> Result<SlotReport, ModelError> {
    let mut report = SlotReport::empty(slot);
    for &(d, dest) in demands {
        let ds = s.dataset(d).ok_or(ModelError::UnknownDataset(d))?;
        let loc = p.get(d).ok_or(ModelError::UnknownDataset(d))?;
        if loc == dest {
            continue;
        }
        let from = s.dc_index(loc).ok_or(ModelError::UnknownDatacenter(loc))?;
        let to = s.dc_index(dest).ok_or(ModelError::UnknownDatacenter(dest))?;
        report.time += s.bandwidth.transfer_time(from, to, ds.size_mb);
        report.bytes_mb += ds.size_mb;
        report.moves += 1;
    }
    Ok(report)
}

/// Transfer time of one stage under a placement, decomposed into private,
/// public shared, and public unshared components.
pub fn stage_transfer_time(
    s: &Scenario,
    p: &PlacementMap,
    stage: Stage,
    policy: ChargePolicy,
) -> Result<StageTimes, ModelError> {
    let demands = build_stage_demands(s, p, stage, policy);
    let mut times = StageTimes::default();
    for &(d, dest) in &demands {
        let ds = s.dataset(d).ok_or(ModelError::UnknownDataset(d))?;
        let loc = p.get(d).ok_or(ModelError::UnknownDataset(d))?;
        if loc == dest {
            continue;
        }
        let from = s.dc_index(loc).ok_or(ModelError::UnknownDatacenter(loc))?;
        let to = s.dc_index(dest).ok_or(ModelError::UnknownDatacenter(dest))?;
        let t = s.bandwidth.transfer_time(from, to, ds.size_mb);
        if ds.is_private() {
            times.private += &t;
        } else if ds.shared {
            times.public_shared += &t;
        } else {
            times.public_unshared += &t;
        }
        times.total += t;
    }
    Ok(times)
}

/// Whole-process transfer time: build plus runtime.
pub fn total_transfer_time(build: &TransferTime, run: &TransferTime) -> TransferTime {
    build.clone() + run
}

/// True when every edge datacenter's placed load fits its capacity.
/// Cloud datacenters always pass.
pub fn capacity_feasible(s: &Scenario, p: &PlacementMap) -> bool {
    let mut used = vec![0u64; s.datacenters.len()];
    for (d, dc) in p.iter() {
        let (Some(ds), Some(pos)) = (s.dataset(d), s.dc_index(dc)) else {
            continue;
        };
        used[pos] += ds.size_mb;
    }
    s.datacenters
        .iter()
        .enumerate()
        .all(|(i, dc)| dc.kind == DcKind::Cloud || dc.capacity.allows(used[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BandwidthTable, Capacity, Datacenter, Dataset, Privacy, Task, Workflow};

    fn dc(id: u32, kind: DcKind, cap: Capacity, region: u32) -> Datacenter {
        Datacenter {
            id: DcId(id),
            kind,
            capacity: cap,
            region,
        }
    }

    fn scenario_4dc() -> Scenario {
        // dc0 cloud, dc1..dc3 edges; one workflow, one consumer task per
        // dataset so demands are easy to steer from tests.
        let datacenters = vec![
            dc(0, DcKind::Cloud, Capacity::Unbounded, 0),
            dc(1, DcKind::Edge, Capacity::Mb(150_000), 0),
            dc(2, DcKind::Edge, Capacity::Mb(150_000), 0),
            dc(3, DcKind::Edge, Capacity::Mb(150_000), 0),
        ];
        let bandwidth = BandwidthTable::new(vec![
            vec![0.0, 20.0, 20.0, 20.0],
            vec![20.0, 0.0, 100.0, 150.0],
            vec![20.0, 100.0, 0.0, 20.0],
            vec![20.0, 150.0, 20.0, 0.0],
        ])
        .unwrap();
        let tasks = vec![
            Task {
                id: TaskId(0),
                workflow: WorkflowId(0),
                inputs: vec![DatasetId(0)],
                outputs: vec![],
            },
            Task {
                id: TaskId(1),
                workflow: WorkflowId(0),
                inputs: vec![DatasetId(1), DatasetId(2)],
                outputs: vec![],
            },
        ];
        let datasets = vec![
            Dataset {
                id: DatasetId(0),
                size_mb: 2048,
                privacy: Privacy::Public,
                home: None,
                producers: vec![],
                consumers: vec![TaskId(0)],
                shared: false,
            },
            Dataset {
                id: DatasetId(1),
                size_mb: 100,
                privacy: Privacy::Public,
                home: None,
                producers: vec![],
                consumers: vec![TaskId(1)],
                shared: false,
            },
            Dataset {
                id: DatasetId(2),
                size_mb: 300,
                privacy: Privacy::Public,
                home: None,
                producers: vec![],
                consumers: vec![TaskId(1)],
                shared: false,
            },
        ];
        Scenario::assemble(
            1,
            datacenters,
            bandwidth,
            vec![Workflow {
                id: WorkflowId(0),
                tasks,
                edges: vec![],
            }],
            datasets,
            vec![],
        )
        .unwrap()
    }

    use crate::model::WorkflowId;

    #[test]
    fn single_demand_charges_size_over_band() {
        // 2048 MB at dc2, demanded at dc3, 20 MB/s -> 102.4 s.
        let s = scenario_4dc();
        let p: PlacementMap = [(DatasetId(0), DcId(2))].into_iter().collect();
        let r = slot_transfer_time(&s, &p, &[(DatasetId(0), DcId(3))], 1).unwrap();
        assert_eq!(r.time, TransferTime::from_ratio(2048, 20));
        assert_eq!(r.moves, 1);
        assert_eq!(r.bytes_mb, 2048);
    }

    #[test]
    fn colocated_demands_are_free() {
        let s = scenario_4dc();
        let p: PlacementMap = [(DatasetId(0), DcId(2)), (DatasetId(1), DcId(1))]
            .into_iter()
            .collect();
        let r = slot_transfer_time(
            &s,
            &p,
            &[(DatasetId(0), DcId(2)), (DatasetId(1), DcId(1))],
            0,
        )
        .unwrap();
        assert!(r.time.is_zero());
        assert_eq!(r.moves, 0);
        assert_eq!(r.bytes_mb, 0);
    }

    #[test]
    fn two_demands_sum_independently() {
        // 100 MB over 100 MB/s + 300 MB over 150 MB/s = 1 + 2 = 3 s.
        let s = scenario_4dc();
        let p: PlacementMap = [(DatasetId(1), DcId(2)), (DatasetId(2), DcId(1))]
            .into_iter()
            .collect();
        let r = slot_transfer_time(
            &s,
            &p,
            &[(DatasetId(1), DcId(1)), (DatasetId(2), DcId(3))],
            0,
        )
        .unwrap();
        assert_eq!(r.time, TransferTime::from_secs(3));
        assert_eq!(r.moves, 2);
        assert_eq!(r.bytes_mb, 400);
    }

    #[test]
    fn unknown_dataset_demand_errors() {
        let s = scenario_4dc();
        let p = PlacementMap::new();
        let err = slot_transfer_time(&s, &p, &[(DatasetId(99), DcId(1))], 0).unwrap_err();
        assert!(matches!(err, ModelError::UnknownDataset(DatasetId(99))));
    }

    #[test]
    fn total_transfer_time_adds() {
        let a = TransferTime::from_ratio(512, 5); // 102.4
        let b = TransferTime::from_secs(3);
        assert_eq!(
            total_transfer_time(&a, &b),
            TransferTime::from_ratio(527, 5) // 105.4
        );
        assert_eq!(
            total_transfer_time(&TransferTime::zero(), &TransferTime::zero()),
            TransferTime::zero()
        );
        assert_eq!(
            total_transfer_time(&TransferTime::from_secs(280), &TransferTime::zero()),
            TransferTime::from_secs(280)
        );
    }

    #[test]
    fn capacity_empty_and_cloud_pass() {
        let s = scenario_4dc();
        assert!(capacity_feasible(&s, &PlacementMap::new()));
        let all_cloud: PlacementMap = s.datasets.iter().map(|d| (d.id, DcId(0))).collect();
        assert!(capacity_feasible(&s, &all_cloud));
    }

    #[test]
    fn capacity_overflow_detected() {
        let mut s = scenario_4dc();
        s.datasets[0].size_mb = 100_000;
        s.datasets[1].size_mb = 60_000;
        let s = Scenario::assemble(
            s.regions,
            s.datacenters,
            s.bandwidth,
            s.workflows,
            s.datasets,
            s.events,
        )
        .unwrap();
        let p: PlacementMap = [(DatasetId(0), DcId(1)), (DatasetId(1), DcId(1))]
            .into_iter()
            .collect();
        assert!(!capacity_feasible(&s, &p)); // 160_000 > 150_000
    }

    #[test]
    fn assignment_minimizes_fetch_cost() {
        let s = scenario_4dc();
        // Task 1 inputs: d1 (100 MB) at dc1, d2 (300 MB) at dc3.
        // dc1: fetch d2 over 150 -> 2 s; dc3: fetch d1 over 150 -> 2/3 s.
        let p: PlacementMap = [(DatasetId(1), DcId(1)), (DatasetId(2), DcId(3))]
            .into_iter()
            .collect();
        assert_eq!(assign_task(&s, &p, TaskId(1)), 3);
    }

    #[test]
    fn stage_decomposition_adds_up() {
        let s = scenario_4dc();
        let p: PlacementMap = [
            (DatasetId(0), DcId(2)),
            (DatasetId(1), DcId(1)),
            (DatasetId(2), DcId(3)),
        ]
        .into_iter()
        .collect();
        let st = stage_transfer_time(&s, &p, Stage::Build, ChargePolicy::PerTransfer).unwrap();
        let sum = st.private.clone() + &st.public_shared + &st.public_unshared;
        assert_eq!(sum, st.total);
        assert!(!st.total.is_zero());
    }
}
