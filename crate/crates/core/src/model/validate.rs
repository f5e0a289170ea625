//! Structural validation: every model invariant becomes a reported
//! violation rather than a panic, so callers can show them all at once.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use super::{DatasetId, DcId, DcKind, Privacy, Scenario, TaskId, WorkflowId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("cloud datacenter {dc} must have unbounded capacity")]
    CloudCapacityFinite { dc: DcId },
    #[error("edge datacenter {dc} must have a finite positive capacity")]
    EdgeCapacityInvalid { dc: DcId },
    #[error("region {region} has {count} cloud datacenters, expected exactly 1")]
    RegionCloudCount { region: u32, count: usize },
    #[error("datacenter {dc} names region {region} outside 0..{regions}")]
    RegionOutOfRange { dc: DcId, region: u32, regions: u32 },
    #[error("bandwidth[{i}][{j}] must be positive and finite")]
    BandwidthNonPositive { i: usize, j: usize },
    #[error("bandwidth[{i}][{j}] != bandwidth[{j}][{i}]")]
    BandwidthAsymmetric { i: usize, j: usize },
    #[error("private dataset {dataset} has no home datacenter")]
    PrivateHomeMissing { dataset: DatasetId },
    #[error("private dataset {dataset} is homed on {dc}, which is not an edge datacenter")]
    PrivateHomeNotEdge { dataset: DatasetId, dc: DcId },
    #[error("dataset {dataset} names unknown home datacenter {dc}")]
    HomeUnknown { dataset: DatasetId, dc: DcId },
    #[error("public dataset {dataset} must not declare a home")]
    HomeOnPublic { dataset: DatasetId },
    #[error("dataset {dataset} references unknown task {task}")]
    UnknownTaskRef { dataset: DatasetId, task: TaskId },
    #[error("task {task} references unknown dataset {dataset}")]
    UnknownDatasetRef { task: TaskId, dataset: DatasetId },
    #[error("dataset {dataset} lists producer {task} that does not output it")]
    ProducerMismatch { dataset: DatasetId, task: TaskId },
    #[error("dataset {dataset} lists consumer {task} that does not input it")]
    ConsumerMismatch { dataset: DatasetId, task: TaskId },
    #[error("task {task} outputs {dataset} but is not among its producers")]
    MissingProducer { task: TaskId, dataset: DatasetId },
    #[error("task {task} inputs {dataset} but is not among its consumers")]
    MissingConsumer { task: TaskId, dataset: DatasetId },
    #[error("workflow {workflow} precedence relation has a cycle")]
    WorkflowCycle { workflow: WorkflowId },
    #[error("workflow {workflow} edge references unknown task {task}")]
    EdgeUnknownTask { workflow: WorkflowId, task: TaskId },
    #[error("workflow {workflow}: task {consumer} consumes {dataset} produced by {producer} without a precedence edge")]
    MissingDataFlowEdge {
        workflow: WorkflowId,
        producer: TaskId,
        consumer: TaskId,
        dataset: DatasetId,
    },
    #[error("event at slot {slot} references unknown workflow {workflow}")]
    EventUnknownWorkflow { slot: u32, workflow: WorkflowId },
    #[error("workflow {workflow} arrives more than once")]
    DuplicateArrival { workflow: WorkflowId },
    #[error("workflow {workflow} departs at slot {slot} before it is present")]
    DepartBeforeArrival { workflow: WorkflowId, slot: u32 },
}

/// Check every model invariant; an empty list means the scenario is
/// well-formed.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();

    // Datacenters: capacity sentinel matches the kind, one cloud per region.
    let mut clouds_per_region: HashMap<u32, usize> = HashMap::new();
    for dc in &s.datacenters {
        match (dc.kind, dc.capacity.mb()) {
            (DcKind::Cloud, Some(_)) => out.push(Violation::CloudCapacityFinite { dc: dc.id }),
            (DcKind::Edge, None) | (DcKind::Edge, Some(0)) => {
                out.push(Violation::EdgeCapacityInvalid { dc: dc.id })
            }
            _ => {}
        }
        if dc.region >= s.regions {
            out.push(Violation::RegionOutOfRange {
                dc: dc.id,
                region: dc.region,
                regions: s.regions,
            });
        }
        if dc.kind == DcKind::Cloud {
            *clouds_per_region.entry(dc.region).or_insert(0) += 1;
        }
    }
    for region in 0..s.regions {
        let count = clouds_per_region.get(&region).copied().unwrap_or(0);
        if count != 1 {
            out.push(Violation::RegionCloudCount { region, count });
        }
    }

    // Bandwidth: positive, finite, symmetric off the diagonal.
    let n = s.bandwidth.len();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = s.bandwidth.mbps(i, j);
            if !(v > 0.0 && v.is_finite()) {
                out.push(Violation::BandwidthNonPositive { i, j });
            }
            if i < j && s.bandwidth.mbps(i, j) != s.bandwidth.mbps(j, i) {
                out.push(Violation::BandwidthAsymmetric { i, j });
            }
        }
    }

    // Datasets: privacy/home pairing and reference closure.
    for d in &s.datasets {
        match (d.privacy, d.home) {
            (Privacy::Private, None) => out.push(Violation::PrivateHomeMissing { dataset: d.id }),
            (Privacy::Private, Some(h)) => match s.dc(h) {
                None => out.push(Violation::HomeUnknown { dataset: d.id, dc: h }),
                Some(dc) if dc.kind != DcKind::Edge => {
                    out.push(Violation::PrivateHomeNotEdge { dataset: d.id, dc: h })
                }
                Some(_) => {}
            },
            (Privacy::Public, Some(_)) => out.push(Violation::HomeOnPublic { dataset: d.id }),
            (Privacy::Public, None) => {}
        }
        for &t in &d.producers {
            if !s.task_exists(t) {
                out.push(Violation::UnknownTaskRef { dataset: d.id, task: t });
            } else if !s.task_outputs(t).contains(&d.id) {
                out.push(Violation::ProducerMismatch { dataset: d.id, task: t });
            }
        }
        for &t in &d.consumers {
            if !s.task_exists(t) {
                out.push(Violation::UnknownTaskRef { dataset: d.id, task: t });
            } else if !s.task_inputs(t).contains(&d.id) {
                out.push(Violation::ConsumerMismatch { dataset: d.id, task: t });
            }
        }
    }

    // Tasks: dataset references resolve and mirror producer/consumer sets.
    for wf in &s.workflows {
        for t in &wf.tasks {
            for &d in &t.inputs {
                match s.dataset(d) {
                    None => out.push(Violation::UnknownDatasetRef { task: t.id, dataset: d }),
                    Some(ds) if !ds.consumers.contains(&t.id) => {
                        out.push(Violation::MissingConsumer { task: t.id, dataset: d })
                    }
                    Some(_) => {}
                }
            }
            for &d in &t.outputs {
                match s.dataset(d) {
                    None => out.push(Violation::UnknownDatasetRef { task: t.id, dataset: d }),
                    Some(ds) if !ds.producers.contains(&t.id) => {
                        out.push(Violation::MissingProducer { task: t.id, dataset: d })
                    }
                    Some(_) => {}
                }
            }
        }
    }

    // Workflows: edges resolve, the relation is a DAG, and data flow is
    // covered by precedence edges within the workflow.
    for wf in &s.workflows {
        let ids: HashSet<TaskId> = wf.tasks.iter().map(|t| t.id).collect();
        let mut edge_ok = true;
        for &(a, b) in &wf.edges {
            for t in [a, b] {
                if !ids.contains(&t) {
                    out.push(Violation::EdgeUnknownTask {
                        workflow: wf.id,
                        task: t,
                    });
                    edge_ok = false;
                }
            }
        }
        if edge_ok && has_cycle(wf.tasks.iter().map(|t| t.id), &wf.edges) {
            out.push(Violation::WorkflowCycle { workflow: wf.id });
        }
        let edge_set: HashSet<(TaskId, TaskId)> = wf.edges.iter().copied().collect();
        for t in &wf.tasks {
            for &d in &t.inputs {
                let Some(ds) = s.dataset(d) else { continue };
                for &producer in &ds.producers {
                    if ids.contains(&producer) && !edge_set.contains(&(producer, t.id)) {
                        out.push(Violation::MissingDataFlowEdge {
                            workflow: wf.id,
                            producer,
                            consumer: t.id,
                            dataset: d,
                        });
                    }
                }
            }
        }
    }

    // Events: workflows resolve, arrive once, depart only when present.
    let known: HashSet<WorkflowId> = s.workflows.iter().map(|w| w.id).collect();
    let mut arrived: HashSet<WorkflowId> = s.initial_workflows().into_iter().collect();
    let mut seen_arrivals: HashSet<WorkflowId> = HashSet::new();
    let mut events = s.events.clone();
    events.sort_by_key(|e| e.slot);
    for e in &events {
        for &w in e.arrive.iter().chain(e.depart.iter()) {
            if !known.contains(&w) {
                out.push(Violation::EventUnknownWorkflow {
                    slot: e.slot,
                    workflow: w,
                });
            }
        }
        for &w in &e.arrive {
            if !seen_arrivals.insert(w) {
                out.push(Violation::DuplicateArrival { workflow: w });
            }
            arrived.insert(w);
        }
        for &w in &e.depart {
            if known.contains(&w) && !arrived.contains(&w) {
                out.push(Violation::DepartBeforeArrival {
                    workflow: w,
                    slot: e.slot,
                });
            }
        }
    }

    out
}

fn has_cycle(tasks: impl Iterator<Item = TaskId>, edges: &[(TaskId, TaskId)]) -> bool {
    let ids: Vec<TaskId> = tasks.collect();
    let mut indegree: HashMap<TaskId, usize> = ids.iter().map(|&t| (t, 0)).collect();
    let mut adj: HashMap<TaskId, Vec<TaskId>> = HashMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        *indegree.entry(b).or_default() += 1;
    }
    let mut queue: VecDeque<TaskId> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&t, _)| t)
        .collect();
    let mut visited = 0usize;
    while let Some(t) = queue.pop_front() {
        visited += 1;
        for &next in adj.get(&t).map(|v| v.as_slice()).unwrap_or(&[]) {
            let e = indegree.get_mut(&next).unwrap();
            *e -= 1;
            if *e == 0 {
                queue.push_back(next);
            }
        }
    }
    visited != ids.len()
}
