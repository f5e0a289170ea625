use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BandwidthTable, Capacity, Datacenter, Dataset, DatasetId, DcId, DcKind, ModelError, Privacy,
    Scenario, SlotEvent, Task, TaskId, Workflow, WorkflowId,
};
use crate::optimize::OptimizerConfig;

#[derive(Debug, Error)]
pub enum ScenarioIoError {
    #[error("read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error: {source}")]
    Schema { source: serde_json::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct DatacenterFile {
    id: u32,
    kind: DcKind,
    capacity_mb: Option<u64>,
    region: u32,
}

#[derive(Serialize, Deserialize)]
struct TaskFile {
    id: u32,
    inputs: Vec<u32>,
    outputs: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct WorkflowFile {
    id: u32,
    tasks: Vec<TaskFile>,
    edges: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    id: u32,
    size_mb: u64,
    privacy: Privacy,
    home: Option<u32>,
    producers: Vec<u32>,
    consumers: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    regions: u32,
    datacenters: Vec<DatacenterFile>,
    bandwidth: Vec<Vec<f64>>,
    workflows: Vec<WorkflowFile>,
    datasets: Vec<DatasetFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    events: Vec<SlotEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerConfig>,
}

fn to_file(s: &Scenario) -> ScenarioFile {
    ScenarioFile {
        regions: s.regions,
        datacenters: s
            .datacenters
            .iter()
            .map(|d| DatacenterFile {
                id: d.id.0,
                kind: d.kind,
                capacity_mb: d.capacity.mb(),
                region: d.region,
            })
            .collect(),
        bandwidth: s.bandwidth.to_matrix(),
        workflows: s
            .workflows
            .iter()
            .map(|w| WorkflowFile {
                id: w.id.0,
                tasks: w
                    .tasks
                    .iter()
                    .map(|t| TaskFile {
                        id: t.id.0,
                        inputs: t.inputs.iter().map(|d| d.0).collect(),
                        outputs: t.outputs.iter().map(|d| d.0).collect(),
                    })
                    .collect(),
                edges: w.edges.iter().map(|&(a, b)| (a.0, b.0)).collect(),
            })
            .collect(),
        datasets: s
            .datasets
            .iter()
            .map(|d| DatasetFile {
                id: d.id.0,
                size_mb: d.size_mb,
                privacy: d.privacy,
                home: d.home.map(|h| h.0),
                producers: d.producers.iter().map(|t| t.0).collect(),
                consumers: d.consumers.iter().map(|t| t.0).collect(),
            })
            .collect(),
        events: s.events.clone(),
        optimizer: s.optimizer,
    }
}

fn from_file(f: ScenarioFile) -> Result<Scenario, ScenarioIoError> {
    let datacenters = f
        .datacenters
        .into_iter()
        .map(|d| Datacenter {
            id: DcId(d.id),
            kind: d.kind,
            capacity: match d.capacity_mb {
                Some(mb) => Capacity::Mb(mb),
                None => Capacity::Unbounded,
            },
            region: d.region,
        })
        .collect();
    let bandwidth = BandwidthTable::new(f.bandwidth)?;
    let workflows = f
        .workflows
        .into_iter()
        .map(|w| Workflow {
            id: WorkflowId(w.id),
            tasks: w
                .tasks
                .into_iter()
                .map(|t| Task {
                    id: TaskId(t.id),
                    workflow: WorkflowId(w.id),
                    inputs: t.inputs.into_iter().map(DatasetId).collect(),
                    outputs: t.outputs.into_iter().map(DatasetId).collect(),
                })
                .collect(),
            edges: w
                .edges
                .into_iter()
                .map(|(a, b)| (TaskId(a), TaskId(b)))
                .collect(),
        })
        .collect();
    let datasets = f
        .datasets
        .into_iter()
        .map(|d| Dataset {
            id: DatasetId(d.id),
            size_mb: d.size_mb,
            privacy: d.privacy,
            home: d.home.map(DcId),
            producers: d.producers.into_iter().map(TaskId).collect(),
            consumers: d.consumers.into_iter().map(TaskId).collect(),
            shared: false,
        })
        .collect();
    let mut s = Scenario::assemble(f.regions, datacenters, bandwidth, workflows, datasets, f.events)?;
    s.optimizer = f.optimizer;
    Ok(s)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(&to_file(s)).expect("scenario serializes");
    out.push('\n');
    out
}

pub fn scenario_from_json(json: &str) -> Result<Scenario, ScenarioIoError> {
    let file: ScenarioFile =
        serde_json::from_str(json).map_err(|source| ScenarioIoError::Schema { source })?;
    from_file(file)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioIoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    scenario_from_json(&text)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioIoError> {
    let path = path.as_ref();
    fs::write(path, scenario_to_json(s)).map_err(|source| ScenarioIoError::Write {
        path: path.display().to_string(),
        source,
    })
}
