//! Domain model: datacenters, datasets, workflows, placements, and the
//! exact transfer-time accounting they share.

mod time;
mod transfer;
mod validate;

pub use time::TransferTime;
pub use transfer::{
    assign_task, build_stage_demands, capacity_feasible, slot_transfer_time, stage_transfer_time,
    total_transfer_time, ChargePolicy, Stage, StageTimes,
};
pub use validate::{validate_scenario, Violation};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkflowId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DcId(pub u32);

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for WorkflowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

impl fmt::Display for DcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dc{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DcKind {
    Cloud,
    Edge,
}

/// Edge storage is finite; cloud storage is an explicit unbounded sentinel
/// so the capacity constraint stays an exact integer comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Unbounded,
    Mb(u64),
}

impl Capacity {
    pub fn allows(&self, used_mb: u64) -> bool {
        match self {
            Capacity::Unbounded => true,
            Capacity::Mb(cap) => used_mb <= *cap,
        }
    }

    pub fn mb(&self) -> Option<u64> {
        match self {
            Capacity::Unbounded => None,
            Capacity::Mb(cap) => Some(*cap),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Datacenter {
    pub id: DcId,
    pub kind: DcKind,
    pub capacity: Capacity,
    pub region: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Privacy {
    Public,
    Private,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: DatasetId,
    pub size_mb: u64,
    pub privacy: Privacy,
    /// Required for private datasets: the edge datacenter they are pinned to.
    pub home: Option<DcId>,
    pub producers: Vec<TaskId>,
    pub consumers: Vec<TaskId>,
    /// Derived at assembly: consumers span at least two workflows.
    pub shared: bool,
}

impl Dataset {
    pub fn is_private(&self) -> bool {
        self.privacy == Privacy::Private
    }

    /// Initial datasets exist before any task runs (no producers).
    pub fn is_initial(&self) -> bool {
        self.producers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub workflow: WorkflowId,
    pub inputs: Vec<DatasetId>,
    pub outputs: Vec<DatasetId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workflow {
    pub id: WorkflowId,
    pub tasks: Vec<Task>,
    /// Precedence pairs (from, to); must be acyclic.
    pub edges: Vec<(TaskId, TaskId)>,
}

/// Workflow arrivals and departures for one runtime slot.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotEvent {
    pub slot: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arrive: Vec<WorkflowId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depart: Vec<WorkflowId>,
}

/// Symmetric inter-datacenter bandwidth in MB/s, indexed by datacenter
/// position in the scenario's datacenter list. The diagonal is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthTable {
    n: usize,
    mbps: Vec<f64>,
    seconds_per_mb: Vec<Option<BigRational>>,
}

impl BandwidthTable {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let n = matrix.len();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::BandwidthShape {
                    row: i,
                    len: row.len(),
                    expected: n,
                });
            }
        }
        let mut mbps = Vec::with_capacity(n * n);
        let mut seconds_per_mb = Vec::with_capacity(n * n);
        for (i, row) in matrix.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                mbps.push(v);
                if i != j && v > 0.0 && v.is_finite() {
                    // Every finite f64 is an exact rational, so 1/band is exact.
                    seconds_per_mb.push(BigRational::from_float(v).map(|r| r.recip()));
                } else {
                    seconds_per_mb.push(None);
                }
            }
        }
        Ok(BandwidthTable {
            n,
            mbps,
            seconds_per_mb,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mbps(&self, i: usize, j: usize) -> f64 {
        self.mbps[i * self.n + j]
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.mbps(i, j)).collect())
            .collect()
    }

    /// Exact time to move `size_mb` between two distinct datacenters.
    pub fn transfer_time(&self, from: usize, to: usize, size_mb: u64) -> TransferTime {
        assert!(from != to, "no self-transfer: {from} -> {to}");
        let per_mb = self.seconds_per_mb[from * self.n + to]
            .as_ref()
            .expect("bandwidth entry must be positive and finite (validate the scenario first)");
        TransferTime::from_mb_at(size_mb, per_mb)
    }
}

/// The dataset -> datacenter assignment both optimizers produce. Keys are
/// the currently existing datasets; values are datacenter ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlacementMap {
    loc: BTreeMap<DatasetId, DcId>,
}

impl PlacementMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, d: DatasetId) -> Option<DcId> {
        self.loc.get(&d).copied()
    }

    pub fn set(&mut self, d: DatasetId, dc: DcId) {
        self.loc.insert(d, dc);
    }

    pub fn remove(&mut self, d: DatasetId) -> Option<DcId> {
        self.loc.remove(&d)
    }

    pub fn contains(&self, d: DatasetId) -> bool {
        self.loc.contains_key(&d)
    }

    pub fn len(&self) -> usize {
        self.loc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loc.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DatasetId, DcId)> + '_ {
        self.loc.iter().map(|(d, dc)| (*d, *dc))
    }
}

impl FromIterator<(DatasetId, DcId)> for PlacementMap {
    fn from_iter<I: IntoIterator<Item = (DatasetId, DcId)>>(iter: I) -> Self {
        PlacementMap {
            loc: iter.into_iter().collect(),
        }
    }
}

/// Per-slot accounting: how many transfers ran, how much moved, how long.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotReport {
    pub slot: u32,
    pub moves: u64,
    pub bytes_mb: u64,
    pub time: TransferTime,
}

impl SlotReport {
    pub fn empty(slot: u32) -> Self {
        SlotReport {
            slot,
            ..Default::default()
        }
    }

    pub fn absorb(&mut self, other: SlotReport) {
        self.moves += other.moves;
        self.bytes_mb += other.bytes_mb;
        self.time += other.time;
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown dataset {0}")]
    UnknownDataset(DatasetId),
    #[error("unknown datacenter {0}")]
    UnknownDatacenter(DcId),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("bandwidth row {row} has {len} entries, expected {expected}")]
    BandwidthShape {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("bandwidth matrix is {len}x{len} but there are {expected} datacenters")]
    BandwidthSize { len: usize, expected: usize },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },
}

/// The full world description: topology, workflows, datasets, and the
/// optional per-slot arrival/departure schedule.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub regions: u32,
    pub datacenters: Vec<Datacenter>,
    pub bandwidth: BandwidthTable,
    pub workflows: Vec<Workflow>,
    pub datasets: Vec<Dataset>,
    pub events: Vec<SlotEvent>,
    /// Optimizer settings carried by the scenario file, if any.
    pub optimizer: Option<crate::optimize::OptimizerConfig>,
    index: ScenarioIndex,
}

#[derive(Debug, Clone, Default)]
struct ScenarioIndex {
    dataset_pos: HashMap<DatasetId, usize>,
    task_pos: HashMap<TaskId, usize>,
    dc_pos: HashMap<DcId, usize>,
    /// All tasks flattened across workflows, sorted by task id.
    tasks_by_id: Vec<(TaskId, WorkflowId)>,
    task_inputs: HashMap<TaskId, Vec<DatasetId>>,
    task_outputs: HashMap<TaskId, Vec<DatasetId>>,
    task_workflow: HashMap<TaskId, WorkflowId>,
    /// Region -> datacenter position of its cloud (when exactly one exists).
    region_cloud: HashMap<u32, usize>,
    /// Public datasets in canonical particle order: shared first, then
    /// unshared, each by ascending id.
    public_order: Vec<DatasetId>,
    /// Workflows present before the first runtime slot.
    initial_wfs: HashSet<WorkflowId>,
    /// Datasets that exist at build time: initial datasets with at least
    /// one consumer in an initially present workflow (or none at all).
    build_present: HashSet<DatasetId>,
}

impl Scenario {
    /// Build a scenario from raw parts, deriving shared flags and lookup
    /// tables. Structural impossibilities (duplicate ids, bandwidth size)
    /// error out; semantic problems are left for `validate_scenario`.
    pub fn assemble(
        regions: u32,
        datacenters: Vec<Datacenter>,
        bandwidth: BandwidthTable,
        workflows: Vec<Workflow>,
        mut datasets: Vec<Dataset>,
        events: Vec<SlotEvent>,
    ) -> Result<Self, ModelError> {
        if bandwidth.len() != datacenters.len() {
            return Err(ModelError::BandwidthSize {
                len: bandwidth.len(),
                expected: datacenters.len(),
            });
        }
        let mut dc_pos = HashMap::new();
        for (i, dc) in datacenters.iter().enumerate() {
            if dc_pos.insert(dc.id, i).is_some() {
                return Err(ModelError::DuplicateId {
                    kind: "datacenter",
                    id: dc.id.0,
                });
            }
        }
        let mut dataset_pos = HashMap::new();
        for (i, d) in datasets.iter().enumerate() {
            if dataset_pos.insert(d.id, i).is_some() {
                return Err(ModelError::DuplicateId {
                    kind: "dataset",
                    id: d.id.0,
                });
            }
        }
        let mut task_pos = HashMap::new();
        let mut task_inputs = HashMap::new();
        let mut task_outputs = HashMap::new();
        let mut task_workflow = HashMap::new();
        let mut tasks_by_id = Vec::new();
        {
            let mut next = 0usize;
            for wf in &workflows {
                for t in &wf.tasks {
                    if task_pos.insert(t.id, next).is_some() {
                        return Err(ModelError::DuplicateId {
                            kind: "task",
                            id: t.id.0,
                        });
                    }
                    next += 1;
                    task_inputs.insert(t.id, t.inputs.clone());
                    task_outputs.insert(t.id, t.outputs.clone());
                    task_workflow.insert(t.id, wf.id);
                    tasks_by_id.push((t.id, wf.id));
                }
            }
        }
        tasks_by_id.sort();

        // Derive shared flags: consumers span at least two workflows.
        for d in datasets.iter_mut() {
            let mut wfs: Vec<WorkflowId> = d
                .consumers
                .iter()
                .filter_map(|t| task_workflow.get(t).copied())
                .collect();
            wfs.sort();
            wfs.dedup();
            d.shared = wfs.len() >= 2;
        }

        let mut region_cloud = HashMap::new();
        for (i, dc) in datacenters.iter().enumerate() {
            if dc.kind == DcKind::Cloud {
                // Keep the first; validate_scenario flags extra clouds.
                region_cloud.entry(dc.region).or_insert(i);
            }
        }

        let arriving: HashSet<WorkflowId> = events
            .iter()
            .flat_map(|e| e.arrive.iter().copied())
            .collect();
        let initial_wfs: HashSet<WorkflowId> = workflows
            .iter()
            .map(|w| w.id)
            .filter(|id| !arriving.contains(id))
            .collect();
        let build_present: HashSet<DatasetId> = datasets
            .iter()
            .filter(|d| d.is_initial())
            .filter(|d| {
                d.consumers.is_empty()
                    || d.consumers.iter().any(|t| {
                        task_workflow
                            .get(t)
                            .is_some_and(|w| initial_wfs.contains(w))
                    })
            })
            .map(|d| d.id)
            .collect();

        // Particle encodings cover the datasets the build-time stage can
        // actually place: public, initial, and present at build.
        let mut shared_ids: Vec<DatasetId> = datasets
            .iter()
            .filter(|d| !d.is_private() && d.shared && build_present.contains(&d.id))
            .map(|d| d.id)
            .collect();
        shared_ids.sort();
        let mut unshared_ids: Vec<DatasetId> = datasets
            .iter()
            .filter(|d| !d.is_private() && !d.shared && build_present.contains(&d.id))
            .map(|d| d.id)
            .collect();
        unshared_ids.sort();
        let mut public_order = shared_ids;
        public_order.extend(unshared_ids);

        Ok(Scenario {
            regions,
            datacenters,
            bandwidth,
            workflows,
            datasets,
            events,
            optimizer: None,
            index: ScenarioIndex {
                dataset_pos,
                task_pos,
                dc_pos,
                tasks_by_id,
                task_inputs,
                task_outputs,
                task_workflow,
                region_cloud,
                public_order,
                initial_wfs,
                build_present,
            },
        })
    }

    /// Replace the event schedule; rebuilds the derived tables, since
    /// arrivals change which datasets exist at build time.
    pub fn with_events(self, events: Vec<SlotEvent>) -> Result<Self, ModelError> {
        let optimizer = self.optimizer;
        let mut s = Scenario::assemble(
            self.regions,
            self.datacenters,
            self.bandwidth,
            self.workflows,
            self.datasets,
            events,
        )?;
        s.optimizer = optimizer;
        Ok(s)
    }

    pub fn dataset(&self, id: DatasetId) -> Option<&Dataset> {
        self.index.dataset_pos.get(&id).map(|&i| &self.datasets[i])
    }

    pub fn dc(&self, id: DcId) -> Option<&Datacenter> {
        self.index.dc_pos.get(&id).map(|&i| &self.datacenters[i])
    }

    pub fn dc_index(&self, id: DcId) -> Option<usize> {
        self.index.dc_pos.get(&id).copied()
    }

    pub fn task_exists(&self, id: TaskId) -> bool {
        self.index.task_pos.contains_key(&id)
    }

    pub fn task_workflow(&self, id: TaskId) -> Option<WorkflowId> {
        self.index.task_workflow.get(&id).copied()
    }

    pub fn task_inputs(&self, id: TaskId) -> &[DatasetId] {
        self.index
            .task_inputs
            .get(&id)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn task_outputs(&self, id: TaskId) -> &[DatasetId] {
        self.index
            .task_outputs
            .get(&id)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// All task ids across workflows, ascending.
    pub fn tasks_by_id(&self) -> impl Iterator<Item = (TaskId, WorkflowId)> + '_ {
        self.index.tasks_by_id.iter().copied()
    }

    pub fn num_tasks(&self) -> usize {
        self.index.tasks_by_id.len()
    }

    /// Position of the (single) cloud datacenter of a region.
    pub fn region_cloud(&self, region: u32) -> Option<usize> {
        self.index.region_cloud.get(&region).copied()
    }

    /// Canonical ordering of public datasets for particle encodings:
    /// shared datasets first, then unshared, each by ascending id.
    pub fn public_order(&self) -> &[DatasetId] {
        &self.index.public_order
    }

    /// Workflows present before the first runtime slot (not in any arrival).
    pub fn initial_workflows(&self) -> Vec<WorkflowId> {
        self.workflows
            .iter()
            .map(|w| w.id)
            .filter(|id| self.index.initial_wfs.contains(id))
            .collect()
    }

    pub fn workflow_initially_present(&self, w: WorkflowId) -> bool {
        self.index.initial_wfs.contains(&w)
    }

    /// Initial dataset existing before the first runtime slot.
    pub fn dataset_build_present(&self, d: DatasetId) -> bool {
        self.index.build_present.contains(&d)
    }

    /// Placement of every private dataset at its home.
    pub fn private_homes(&self) -> impl Iterator<Item = (DatasetId, DcId)> + '_ {
        self.datasets
            .iter()
            .filter(|d| d.is_private())
            .filter_map(|d| d.home.map(|h| (d.id, h)))
    }
}
