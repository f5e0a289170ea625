//! Test-side oracles, kept independent of the library's accounting path:
//! straight-line loops over (task, dataset) pairs with their own rational
//! arithmetic and their own reading of the assignment/charging rules.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use wfplace::model::{
    BandwidthTable, Capacity, ChargePolicy, Datacenter, Dataset, DatasetId, DcId, DcKind,
    PlacementMap, Privacy, Scenario, Stage, Task, TaskId, Workflow, WorkflowId,
};

/// Exact rational seconds for one transfer, computed directly.
pub fn oracle_cost(s: &Scenario, from: DcId, to: DcId, size_mb: u64) -> BigRational {
    let i = s.dc_index(from).unwrap();
    let j = s.dc_index(to).unwrap();
    let band = BigRational::from_float(s.bandwidth.mbps(i, j)).unwrap();
    BigRational::from_integer(BigInt::from(size_mb)) / band
}

/// The assignment rule, re-derived: cheapest total fetch of the placed
/// inputs, ties to the lowest datacenter id.
pub fn oracle_assign(s: &Scenario, p: &PlacementMap, task: TaskId) -> DcId {
    let mut ids: Vec<DcId> = s.datacenters.iter().map(|d| d.id).collect();
    ids.sort();
    let mut best: Option<(BigRational, DcId)> = None;
    for dc in ids {
        let mut cost = BigRational::zero();
        for &d in s.task_inputs(task) {
            let Some(loc) = p.get(d) else { continue };
            if loc != dc {
                cost += oracle_cost(s, loc, dc, s.dataset(d).unwrap().size_mb);
            }
        }
        match &best {
            Some((c, _)) if *c <= cost => {}
            _ => best = Some((cost, dc)),
        }
    }
    best.unwrap().1
}

/// Per-class totals of one stage: (private, public shared, public
/// unshared, total), accumulated dataset by dataset.
pub fn oracle_stage_times(
    s: &Scenario,
    p: &PlacementMap,
    stage: Stage,
    policy: ChargePolicy,
) -> (BigRational, BigRational, BigRational, BigRational) {
    let mut pri = BigRational::zero();
    let mut sh = BigRational::zero();
    let mut ush = BigRational::zero();
    let mut seen: BTreeSet<(DatasetId, DcId)> = BTreeSet::new();
    let mut tasks: Vec<(TaskId, WorkflowId)> = s.tasks_by_id().collect();
    tasks.sort();
    for (t, wf) in tasks {
        if stage == Stage::Build && !s.workflow_initially_present(wf) {
            continue;
        }
        let dest = oracle_assign(s, p, t);
        for &d in s.task_inputs(t) {
            let ds = s.dataset(d).unwrap();
            let in_stage = match stage {
                Stage::Build => s.dataset_build_present(d),
                Stage::Runtime => !ds.is_initial(),
            };
            if !in_stage {
                continue;
            }
            let Some(loc) = p.get(d) else { continue };
            if loc == dest {
                continue;
            }
            if policy == ChargePolicy::PerTransfer && !seen.insert((d, dest)) {
                continue;
            }
            let cost = oracle_cost(s, loc, dest, ds.size_mb);
            if ds.is_private() {
                pri += cost;
            } else if ds.shared {
                sh += cost;
            } else {
                ush += cost;
            }
        }
    }
    let total = pri.clone() + sh.clone() + ush.clone();
    (pri, sh, ush, total)
}

/// Small random scenario: at most 3 datacenters and 8 datasets, with
/// consistent task references and data-flow precedence edges.
pub fn random_tiny_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_edges = rng.random_range(0..=2);
    let mut datacenters = vec![Datacenter {
        id: DcId(0),
        kind: DcKind::Cloud,
        capacity: Capacity::Unbounded,
        region: 0,
    }];
    for k in 0..n_edges {
        datacenters.push(Datacenter {
            id: DcId(1 + k),
            kind: DcKind::Edge,
            capacity: Capacity::Mb(rng.random_range(50_000..200_000)),
            region: 0,
        });
    }
    let n = datacenters.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = *[5.0, 20.0, 100.0, 150.0, 200.0, 12.5]
                .iter()
                .nth(rng.random_range(0..6))
                .unwrap();
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    let bandwidth = BandwidthTable::new(matrix).unwrap();

    let total_datasets = rng.random_range(1..=8usize);
    let n_initial = rng.random_range(1..=total_datasets);
    let mut datasets: Vec<Dataset> = (0..n_initial)
        .map(|i| {
            let private = n_edges > 0 && rng.random_range(0..4) == 0;
            let home = private.then(|| DcId(1 + rng.random_range(0..n_edges)));
            Dataset {
                id: DatasetId(i as u32),
                size_mb: rng.random_range(1..=5000),
                privacy: if private {
                    Privacy::Private
                } else {
                    Privacy::Public
                },
                home,
                producers: vec![],
                consumers: vec![],
                shared: false,
            }
        })
        .collect();

    // Two workflows worth of tasks; outputs create the remaining datasets.
    let n_tasks = rng.random_range(1..=6usize);
    let mut tasks: Vec<Task> = Vec::new();
    let mut next_dataset = n_initial as u32;
    for t in 0..n_tasks {
        let wf = WorkflowId(rng.random_range(0..2));
        let mut inputs = BTreeSet::new();
        for _ in 0..rng.random_range(0..=3) {
            if !datasets.is_empty() {
                inputs.insert(datasets[rng.random_range(0..datasets.len())].id);
            }
        }
        let mut outputs = Vec::new();
        if (next_dataset as usize) < total_datasets && rng.random_range(0..2) == 0 {
            outputs.push(DatasetId(next_dataset));
            datasets.push(Dataset {
                id: DatasetId(next_dataset),
                size_mb: rng.random_range(1..=5000),
                privacy: Privacy::Public,
                home: None,
                producers: vec![],
                consumers: vec![],
                shared: false,
            });
            next_dataset += 1;
        }
        let task = Task {
            id: TaskId(t as u32),
            workflow: wf,
            inputs: inputs.into_iter().collect(),
            outputs,
        };
        for &d in &task.inputs {
            let ds = datasets.iter_mut().find(|x| x.id == d).unwrap();
            ds.consumers.push(task.id);
        }
        for &d in &task.outputs {
            let ds = datasets.iter_mut().find(|x| x.id == d).unwrap();
            ds.producers.push(task.id);
        }
        tasks.push(task);
    }
    let mut wf0 = Vec::new();
    let mut wf1 = Vec::new();
    for t in tasks {
        if t.workflow == WorkflowId(0) {
            wf0.push(t);
        } else {
            wf1.push(t);
        }
    }
    let flow_edges = |tasks: &[Task]| -> Vec<(TaskId, TaskId)> {
        let ids: BTreeSet<TaskId> = tasks.iter().map(|t| t.id).collect();
        let mut edges = Vec::new();
        for t in tasks {
            for &d in &t.inputs {
                let ds = datasets.iter().find(|x| x.id == d).unwrap();
                for &p in &ds.producers {
                    if ids.contains(&p) && p != t.id {
                        edges.push((p, t.id));
                    }
                }
            }
        }
        edges.sort();
        edges.dedup();
        edges
    };
    let workflows = vec![
        Workflow {
            id: WorkflowId(0),
            edges: flow_edges(&wf0),
            tasks: wf0,
        },
        Workflow {
            id: WorkflowId(1),
            edges: flow_edges(&wf1),
            tasks: wf1,
        },
    ];
    Scenario::assemble(1, datacenters, bandwidth, workflows, datasets, vec![]).unwrap()
}

/// A random total placement over the scenario's datasets (privates home).
pub fn random_placement_over(s: &Scenario, rng: &mut ChaCha12Rng) -> PlacementMap {
    s.datasets
        .iter()
        .map(|d| {
            let dc = match d.home {
                Some(h) => h,
                None => s.datacenters[rng.random_range(0..s.datacenters.len())].id,
            };
            (d.id, dc)
        })
        .collect()
}

/// Fixture for the enumeration criterion: 3 datacenters, 6 public initial
/// datasets (729 placements), roomy capacities so repair never fires.
pub fn enumeration_fixture(seed: u64) -> Scenario {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let datacenters = vec![
        Datacenter {
            id: DcId(0),
            kind: DcKind::Cloud,
            capacity: Capacity::Unbounded,
            region: 0,
        },
        Datacenter {
            id: DcId(1),
            kind: DcKind::Edge,
            capacity: Capacity::Mb(1_000_000),
            region: 0,
        },
        Datacenter {
            id: DcId(2),
            kind: DcKind::Edge,
            capacity: Capacity::Mb(1_000_000),
            region: 0,
        },
    ];
    let pick = |rng: &mut ChaCha12Rng| {
        *[5.0, 20.0, 100.0, 150.0, 200.0]
            .iter()
            .nth(rng.random_range(0..5))
            .unwrap()
    };
    let b01 = pick(&mut rng);
    let b02 = pick(&mut rng);
    let b12 = pick(&mut rng);
    let bandwidth = BandwidthTable::new(vec![
        vec![0.0, b01, b02],
        vec![b01, 0.0, b12],
        vec![b02, b12, 0.0],
    ])
    .unwrap();

    let mut datasets: Vec<Dataset> = (0..6)
        .map(|i| Dataset {
            id: DatasetId(i),
            size_mb: rng.random_range(100..=4000),
            privacy: Privacy::Public,
            home: None,
            producers: vec![],
            consumers: vec![],
            shared: false,
        })
        .collect();
    // A private anchor per edge keeps task assignments interesting.
    for (i, home) in [(6u32, 1u32), (7, 2)] {
        datasets.push(Dataset {
            id: DatasetId(i),
            size_mb: rng.random_range(10_000..40_000),
            privacy: Privacy::Private,
            home: Some(DcId(home)),
            producers: vec![],
            consumers: vec![],
            shared: false,
        });
    }
    let n_tasks = rng.random_range(3..=5usize);
    let mut tasks = Vec::new();
    for t in 0..n_tasks {
        let mut inputs: BTreeSet<DatasetId> = BTreeSet::new();
        for _ in 0..rng.random_range(1..=3) {
            inputs.insert(DatasetId(rng.random_range(0..6)));
        }
        if rng.random_range(0..2) == 0 {
            inputs.insert(DatasetId(6 + rng.random_range(0..2)));
        }
        let task = Task {
            id: TaskId(t as u32),
            workflow: WorkflowId(0),
            inputs: inputs.into_iter().collect(),
            outputs: vec![],
        };
        tasks.push(task);
    }
    for task in &tasks {
        for &d in &task.inputs {
            datasets
                .iter_mut()
                .find(|x| x.id == d)
                .unwrap()
                .consumers
                .push(task.id);
        }
    }
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

/// Enumerate all |DC|^(public) placements and return the minimum oracle
/// build time.
pub fn enumeration_optimum(s: &Scenario) -> BigRational {
    let publics = s.public_order().to_vec();
    let n_dc = s.datacenters.len();
    let mut best: Option<BigRational> = None;
    let mut positions = vec![0usize; publics.len()];
    loop {
        let mut p: PlacementMap = s.private_homes().collect();
        for (k, &d) in publics.iter().enumerate() {
            p.set(d, s.datacenters[positions[k]].id);
        }
        let (_, _, _, total) = oracle_stage_times(s, &p, Stage::Build, ChargePolicy::PerTransfer);
        match &best {
            Some(b) if *b <= total => {}
            _ => best = Some(total),
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == positions.len() {
                return best.unwrap();
            }
            positions[k] += 1;
            if positions[k] < n_dc {
                break;
            }
            positions[k] = 0;
            k += 1;
        }
    }
}
