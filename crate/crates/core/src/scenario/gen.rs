use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use super::GeneratorConfig;
use crate::model::{
    BandwidthTable, Capacity, Datacenter, Dataset, DatasetId, DcId, DcKind, ModelError, Privacy,
    Scenario, SlotEvent, Task, TaskId, Workflow, WorkflowId,
};

const CLOUD_CLOUD_MBPS: f64 = 5.0;
const EDGE_CLOUD_MBPS: f64 = 20.0;
const EDGE_EDGE_MBPS: [u64; 3] = [100, 150, 200];

#[derive(Debug, Error)]
pub enum GenError {
    #[error("generator config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check(cfg: &GeneratorConfig) -> Result<(), GenError> {
    if cfg.regions == 0 {
        return Err(GenError::Config("regions must be positive"));
    }
    if cfg.workflows == 0 {
        return Err(GenError::Config("workflows must be positive"));
    }
    if cfg.tasks_per_workflow.0 == 0 || cfg.tasks_per_workflow.0 > cfg.tasks_per_workflow.1 {
        return Err(GenError::Config("tasks_per_workflow range is empty"));
    }
    if cfg.dataset_size_range_mb.0 == 0
        || cfg.dataset_size_range_mb.0 > cfg.dataset_size_range_mb.1
    {
        return Err(GenError::Config("dataset_size_range_mb range is empty"));
    }
    if !(0.0..=1.0).contains(&cfg.private_fraction) || !(0.0..=1.0).contains(&cfg.shared_fraction)
    {
        return Err(GenError::Config("fractions must lie in [0, 1]"));
    }
    if !(cfg.bandwidth_multiplier > 0.0) {
        return Err(GenError::Config("bandwidth_multiplier must be positive"));
    }
    Ok(())
}

/// Snap a multiplier like 0.8 to the exact rational 4/5 so scaled
/// bandwidths stay exact in the file (150 * 4 / 5 = 120, not 120.0000...1).
fn snap_ratio(m: f64) -> Option<(u64, u64)> {
    for den in 1..=1000u64 {
        let num = (m * den as f64).round();
        if num >= 1.0 && (m - num / den as f64).abs() < 1e-9 {
            return Some((num as u64, den));
        }
    }
    None
}

/// One cloud per region plus `edges_per_region` edges each. Clouds come
/// first (ids 0..regions), then edges grouped by region. Cloud-cloud
/// links run at 5 MB/s, edge-cloud at 20 MB/s, and edge-edge links cycle
/// through {100, 150, 200} MB/s times the multiplier.
pub fn build_topology(cfg: &GeneratorConfig) -> (Vec<Datacenter>, BandwidthTable) {
    let mut dcs = Vec::new();
    for r in 0..cfg.regions {
        dcs.push(Datacenter {
            id: DcId(r),
            kind: DcKind::Cloud,
            capacity: Capacity::Unbounded,
            region: r,
        });
    }
    for r in 0..cfg.regions {
        for k in 0..cfg.edges_per_region {
            dcs.push(Datacenter {
                id: DcId(cfg.regions + r * cfg.edges_per_region + k),
                kind: DcKind::Edge,
                capacity: Capacity::Mb(cfg.edge_capacity_mb),
                region: r,
            });
        }
    }
    let n = dcs.len();
    let ratio = snap_ratio(cfg.bandwidth_multiplier);
    let mut matrix = vec![vec![0.0f64; n]; n];
    let mut edge_pair = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = match (dcs[i].kind, dcs[j].kind) {
                (DcKind::Cloud, DcKind::Cloud) => CLOUD_CLOUD_MBPS,
                (DcKind::Edge, DcKind::Edge) => {
                    let base = EDGE_EDGE_MBPS[edge_pair % EDGE_EDGE_MBPS.len()];
                    edge_pair += 1;
                    match ratio {
                        Some((num, den)) => (base * num) as f64 / den as f64,
                        None => base as f64 * cfg.bandwidth_multiplier,
                    }
                }
                _ => EDGE_CLOUD_MBPS,
            };
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    let table = BandwidthTable::new(matrix).expect("square by construction");
    (dcs, table)
}

struct WorkflowDraft {
    id: WorkflowId,
    tasks: Vec<Task>,
    projection_tasks: Vec<TaskId>,
}

/// Build a full scenario: topology, layered Montage-shaped workflows, and
/// datasets with privacy and cross-workflow sharing. Pure in the config,
/// seed included.
pub fn generate_scenario(cfg: &GeneratorConfig) -> Result<Scenario, GenError> {
    check(cfg)?;
    let (datacenters, bandwidth) = build_topology(cfg);
    let edge_ids: Vec<DcId> = datacenters
        .iter()
        .filter(|d| d.kind == DcKind::Edge)
        .map(|d| d.id)
        .collect();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let mut datasets: Vec<Dataset> = Vec::new();
    let mut drafts: Vec<WorkflowDraft> = Vec::new();
    let mut next_task = 0u32;
    let mut next_dataset = 0u32;
    // Private datasets are immovable, so their homes must never overfill
    // an edge on their own.
    let mut private_load: std::collections::BTreeMap<DcId, u64> = Default::default();

    let draw_size = |rng: &mut ChaCha12Rng| {
        rng.random_range(cfg.dataset_size_range_mb.0..=cfg.dataset_size_range_mb.1)
    };

    for w in 0..cfg.workflows {
        let wid = WorkflowId(w);
        let target = rng.random_range(cfg.tasks_per_workflow.0..=cfg.tasks_per_workflow.1);
        // Four-layer Montage shape: projection, overlap, background, mosaic.
        let proj = (target as usize * 2 / 5).max(2);
        let overlap = proj.saturating_sub(1).max(1);
        let background = (proj / 2).max(1);

        let mut alloc_task = |inputs: Vec<DatasetId>| {
            let t = Task {
                id: TaskId(next_task),
                workflow: wid,
                inputs,
                outputs: vec![],
            };
            next_task += 1;
            t
        };
        let private_load = &mut private_load;
        let mut alloc_dataset =
            |rng: &mut ChaCha12Rng, edge_ids: &[DcId], producers: Vec<TaskId>| {
                let size = draw_size(rng);
                let private = rng.random::<f64>() < cfg.private_fraction;
                let eligible: Vec<DcId> = edge_ids
                    .iter()
                    .copied()
                    .filter(|e| {
                        private_load.get(e).copied().unwrap_or(0) + size <= cfg.edge_capacity_mb
                    })
                    .collect();
                let home = if private && !eligible.is_empty() {
                    let h = eligible[rng.random_range(0..eligible.len())];
                    *private_load.entry(h).or_insert(0) += size;
                    Some(h)
                } else {
                    None
                };
                let d = Dataset {
                    id: DatasetId(next_dataset),
                    size_mb: size,
                    privacy: if home.is_some() {
                        Privacy::Private
                    } else {
                        Privacy::Public
                    },
                    home,
                    producers,
                    consumers: vec![],
                    shared: false,
                };
                next_dataset += 1;
                d
            };

        // Calibration dataset feeding every projection task.
        let mut calibration = alloc_dataset(&mut rng, &edge_ids, vec![]);
        let mut proj_tasks = Vec::new();
        let mut proj_outputs = Vec::new();
        for _ in 0..proj {
            let image = alloc_dataset(&mut rng, &edge_ids, vec![]);
            let mut t = alloc_task(vec![image.id, calibration.id]);
            let mut out = alloc_dataset(&mut rng, &edge_ids, vec![t.id]);
            t.outputs.push(out.id);
            calibration.consumers.push(t.id);
            let mut image = image;
            image.consumers.push(t.id);
            datasets.push(image);
            proj_outputs.push(out.id);
            // Fill consumers for the output below, once overlap tasks exist.
            out.consumers = vec![];
            datasets.push(out);
            proj_tasks.push(t);
        }
        datasets.push(calibration);

        // Overlap task j consumes projection outputs j and j+1.
        let mut overlap_tasks = Vec::new();
        let mut overlap_outputs = Vec::new();
        for j in 0..overlap {
            let lo = j.min(proj - 1);
            let hi = (j + 1).min(proj - 1);
            let mut inputs = vec![proj_outputs[lo]];
            if hi != lo {
                inputs.push(proj_outputs[hi]);
            }
            let mut t = alloc_task(inputs.clone());
            let out = alloc_dataset(&mut rng, &edge_ids, vec![t.id]);
            t.outputs.push(out.id);
            for d in inputs {
                dataset_mut(&mut datasets, d).consumers.push(t.id);
            }
            overlap_outputs.push(out.id);
            datasets.push(out);
            overlap_tasks.push(t);
        }

        // Background task i aggregates a slice of overlap outputs.
        let mut background_tasks = Vec::new();
        let mut background_outputs = Vec::new();
        for i in 0..background {
            let inputs: Vec<DatasetId> = overlap_outputs
                .iter()
                .enumerate()
                .filter(|(j, _)| j * background / overlap == i)
                .map(|(_, &d)| d)
                .collect();
            let mut t = alloc_task(inputs.clone());
            let out = alloc_dataset(&mut rng, &edge_ids, vec![t.id]);
            t.outputs.push(out.id);
            for d in inputs {
                dataset_mut(&mut datasets, d).consumers.push(t.id);
            }
            background_outputs.push(out.id);
            datasets.push(out);
            background_tasks.push(t);
        }

        // Final mosaic task consumes every background output.
        let mut mosaic = alloc_task(background_outputs.clone());
        let final_out = alloc_dataset(&mut rng, &edge_ids, vec![mosaic.id]);
        mosaic.outputs.push(final_out.id);
        for d in background_outputs {
            dataset_mut(&mut datasets, d).consumers.push(mosaic.id);
        }
        datasets.push(final_out);

        let projection_tasks = proj_tasks.iter().map(|t| t.id).collect();
        let mut tasks = proj_tasks;
        tasks.extend(overlap_tasks);
        tasks.extend(background_tasks);
        tasks.push(mosaic);
        drafts.push(WorkflowDraft {
            id: wid,
            tasks,
            projection_tasks,
        });
    }

    // Sharing pass: initial public datasets may gain a consumer in the
    // next workflow. With sharing disabled the same demand is materialized
    // as a duplicate dataset instead, so the two modes stay comparable.
    if cfg.workflows >= 2 {
        let initial_public: Vec<DatasetId> = datasets
            .iter()
            .filter(|d| d.is_initial() && !d.is_private())
            .map(|d| d.id)
            .collect();
        let mut duplicates = Vec::new();
        for d in initial_public {
            let roll = rng.random::<f64>();
            let owner = datasets
                .iter()
                .find(|ds| ds.id == d)
                .and_then(|ds| ds.consumers.first())
                .map(|&t| drafts.iter().position(|w| w.tasks.iter().any(|x| x.id == t)))
                .flatten()
                .unwrap_or(0);
            let next_wf = (owner + 1) % drafts.len();
            let pick = rng.random_range(0..drafts[next_wf].projection_tasks.len());
            if roll >= cfg.shared_fraction {
                continue;
            }
            let target = drafts[next_wf].projection_tasks[pick];
            if cfg.sharing_enabled {
                dataset_mut(&mut datasets, d).consumers.push(target);
                task_mut(&mut drafts, target).inputs.push(d);
            } else {
                let size = datasets.iter().find(|ds| ds.id == d).unwrap().size_mb;
                let dup = Dataset {
                    id: DatasetId(next_dataset),
                    size_mb: size,
                    privacy: Privacy::Public,
                    home: None,
                    producers: vec![],
                    consumers: vec![target],
                    shared: false,
                };
                next_dataset += 1;
                task_mut(&mut drafts, target).inputs.push(dup.id);
                duplicates.push(dup);
            }
        }
        datasets.extend(duplicates);
    }

    datasets.sort_by_key(|d| d.id);

    let workflows: Vec<Workflow> = drafts
        .into_iter()
        .map(|draft| {
            let ids: Vec<TaskId> = draft.tasks.iter().map(|t| t.id).collect();
            let mut edges = Vec::new();
            for t in &draft.tasks {
                for &d in &t.inputs {
                    let ds = datasets.iter().find(|x| x.id == d).unwrap();
                    for &p in &ds.producers {
                        if ids.contains(&p) {
                            edges.push((p, t.id));
                        }
                    }
                }
            }
            edges.sort();
            edges.dedup();
            Workflow {
                id: draft.id,
                tasks: draft.tasks,
                edges,
            }
        })
        .collect();

    let s = Scenario::assemble(
        cfg.regions,
        datacenters,
        bandwidth,
        workflows,
        datasets,
        vec![],
    )?;
    Ok(s)
}

fn dataset_mut(datasets: &mut [Dataset], id: DatasetId) -> &mut Dataset {
    datasets.iter_mut().find(|d| d.id == id).unwrap()
}

fn task_mut(drafts: &mut [WorkflowDraft], id: TaskId) -> &mut Task {
    drafts
        .iter_mut()
        .flat_map(|w| w.tasks.iter_mut())
        .find(|t| t.id == id)
        .unwrap()
}

/// Turn a static scenario into a dynamic one: the first workflow is
/// present from the start, each later workflow arrives `gap` slots after
/// the previous one, beginning at `start_slot`.
pub fn with_staggered_arrivals(s: Scenario, start_slot: u32, gap: u32) -> Scenario {
    let events: Vec<SlotEvent> = s
        .workflows
        .iter()
        .skip(1)
        .enumerate()
        .map(|(k, w)| SlotEvent {
            slot: start_slot + gap * k as u32,
            arrive: vec![w.id],
            depart: vec![],
        })
        .collect();
    s.with_events(events).expect("reassembly preserves validity")
}
