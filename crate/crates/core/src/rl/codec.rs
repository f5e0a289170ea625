use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::RlError;
use crate::model::{Capacity, DatasetId, DcId, PlacementMap, Scenario};
use crate::optimize::repair_pending;

pub type StateVector = Vec<f64>;

/// Actor output: one row of datacenter scores per dataset slot; the
/// row-wise argmax is the placement choice.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMatrix {
    scores: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl ActionMatrix {
    pub fn from_flat(scores: Vec<f64>, cols: usize) -> Self {
        assert!(cols > 0 && scores.len() % cols == 0);
        let rows = scores.len() / cols;
        ActionMatrix { scores, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.scores[r * self.cols..(r + 1) * self.cols]
    }

    /// Column of the row maximum; ties go to the lowest index.
    pub fn argmax_row(&self, r: usize) -> usize {
        let row = self.row(r);
        let mut best = 0usize;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        best
    }

    pub fn flat(&self) -> &[f64] {
        &self.scores
    }
}

/// A consistent snapshot of the running system, enough to encode a state.
pub struct SystemSnapshot<'a> {
    /// Occupied MB per datacenter position.
    pub used_mb: &'a [u64],
    /// Locations of all live datasets (pending ones may carry a
    /// candidate location).
    pub placement: &'a PlacementMap,
    /// Datasets awaiting a placement decision this slot.
    pub pending: &'a BTreeSet<DatasetId>,
}

/// Fixed layout of states and actions for one scenario shape: per-
/// datacenter remaining-capacity fractions, a one-hot location row per
/// dataset slot, and a pending flag per slot.
#[derive(Debug, Clone)]
pub struct StateCodec {
    dc_ids: Vec<DcId>,
    capacities: Vec<Capacity>,
    dataset_ids: Vec<DatasetId>,
    dataset_row: HashMap<DatasetId, usize>,
    slots: usize,
}

impl StateCodec {
    pub fn for_scenario(s: &Scenario) -> Self {
        Self::with_padding(s, s.datasets.len()).expect("padding covers the scenario")
    }

    /// Pad the dataset dimension to `slots` so one codec can serve grown
    /// scenarios; errors when the scenario already exceeds the padding.
    pub fn with_padding(s: &Scenario, slots: usize) -> Result<Self, RlError> {
        let mut dataset_ids: Vec<DatasetId> = s.datasets.iter().map(|d| d.id).collect();
        dataset_ids.sort();
        if dataset_ids.len() > slots {
            return Err(RlError::TooManyDatasets {
                have: dataset_ids.len(),
                slots,
            });
        }
        let dataset_row = dataset_ids
            .iter()
            .enumerate()
            .map(|(i, &d)| (d, i))
            .collect();
        Ok(StateCodec {
            dc_ids: s.datacenters.iter().map(|d| d.id).collect(),
            capacities: s.datacenters.iter().map(|d| d.capacity).collect(),
            dataset_ids,
            dataset_row,
            slots,
        })
    }

    pub fn num_dc(&self) -> usize {
        self.dc_ids.len()
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn state_dim(&self) -> usize {
        self.num_dc() + self.slots * self.num_dc() + self.slots
    }

    pub fn action_dim(&self) -> usize {
        self.slots * self.num_dc()
    }

    pub fn dataset_row(&self, d: DatasetId) -> Option<usize> {
        self.dataset_row.get(&d).copied()
    }

    pub fn action_from_flat(&self, flat: Vec<f64>) -> ActionMatrix {
        ActionMatrix::from_flat(flat, self.num_dc())
    }

    /// Where the per-row pending flags live inside a state vector.
    pub fn action_layout(&self) -> super::train::ActionLayout {
        super::train::ActionLayout {
            cols: self.num_dc(),
            rows: self.slots,
            pending_offset: self.num_dc() + self.slots * self.num_dc(),
            temperature: 1.0,
        }
    }

    /// Deterministic encoding of a snapshot.
    pub fn encode_state(&self, snap: &SystemSnapshot<'_>) -> StateVector {
        let num_dc = self.num_dc();
        let mut v = Vec::with_capacity(self.state_dim());
        for (i, cap) in self.capacities.iter().enumerate() {
            let frac = match cap.mb() {
                None => 1.0,
                Some(0) => 0.0,
                Some(c) => {
                    let used = snap.used_mb.get(i).copied().unwrap_or(0);
                    (c.saturating_sub(used)) as f64 / c as f64
                }
            };
            v.push(frac);
        }
        for slot in 0..self.slots {
            let placed = self
                .dataset_ids
                .get(slot)
                .and_then(|&d| snap.placement.get(d));
            for (j, &dc) in self.dc_ids.iter().enumerate() {
                let _ = j;
                v.push(if placed == Some(dc) { 1.0 } else { 0.0 });
            }
            if placed.is_none() {
                // Row is all zeros for datasets that do not exist yet.
            }
        }
        for slot in 0..self.slots {
            let pending = self
                .dataset_ids
                .get(slot)
                .map(|d| snap.pending.contains(d))
                .unwrap_or(false);
            v.push(if pending { 1.0 } else { 0.0 });
        }
        debug_assert_eq!(num_dc + self.slots * num_dc + self.slots, v.len());
        v
    }

    /// Flatten realized decisions into a one-hot action matrix.
    pub fn placement_one_hot(&self, decisions: &BTreeMap<DatasetId, DcId>) -> Vec<f64> {
        let mut flat = vec![0.0; self.action_dim()];
        for (&d, &dc) in decisions {
            let (Some(row), Some(col)) = (
                self.dataset_row(d),
                self.dc_ids.iter().position(|&x| x == dc),
            ) else {
                continue;
            };
            flat[row * self.num_dc() + col] = 1.0;
        }
        flat
    }

    /// Pick placements for the pending datasets: public ones follow their
    /// row's argmax, private ones go home regardless, and the result is
    /// capacity-repaired against the rest of the placement.
    pub fn decode_action(
        &self,
        action: &ActionMatrix,
        pending: &BTreeSet<DatasetId>,
        s: &Scenario,
        base: &PlacementMap,
    ) -> Result<BTreeMap<DatasetId, DcId>, RlError> {
        if action.flat().len() != self.action_dim() {
            return Err(RlError::ShapeMismatch {
                what: "action matrix",
                expected: self.action_dim(),
                got: action.flat().len(),
            });
        }
        let mut decisions = BTreeMap::new();
        for &d in pending {
            let Some(ds) = s.dataset(d) else { continue };
            if let Some(home) = ds.home {
                decisions.insert(d, home);
                continue;
            }
            let row = self
                .dataset_row(d)
                .ok_or(RlError::TooManyDatasets {
                    have: self.dataset_ids.len() + 1,
                    slots: self.slots,
                })?;
            let choice = action.argmax_row(row).min(self.dc_ids.len() - 1);
            decisions.insert(d, self.dc_ids[choice]);
        }
        repair_pending(s, base, &mut decisions)?;
        Ok(decisions)
    }
}
