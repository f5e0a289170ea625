use rand::Rng;

use super::OptimError;
use crate::model::{DcKind, PlacementMap, Scenario};

/// A candidate placement: one datacenter position per public dataset, in
/// the scenario's canonical public order. Private datasets are excluded
/// from the encoding; they always sit at their homes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Particle {
    pub positions: Vec<u16>,
}

impl Particle {
    pub fn new(positions: Vec<u16>) -> Self {
        Particle { positions }
    }

    pub fn dim(&self) -> usize {
        self.positions.len()
    }

    pub fn random<R: Rng>(dim: usize, num_dc: usize, rng: &mut R) -> Self {
        Particle {
            positions: (0..dim)
                .map(|_| rng.random_range(0..num_dc) as u16)
                .collect(),
        }
    }
}

/// Map a particle onto a placement: public dataset k goes to the
/// datacenter at positions[k], private datasets go home. Callers pass the
/// result through `repair` before use.
pub fn decode(p: &Particle, s: &Scenario) -> Result<PlacementMap, OptimError> {
    let order = s.public_order();
    if p.dim() != order.len() {
        return Err(OptimError::DimensionMismatch {
            expected: order.len(),
            got: p.dim(),
        });
    }
    let mut map = PlacementMap::new();
    for (k, &d) in order.iter().enumerate() {
        let pos = p.positions[k] as usize;
        let dc = s
            .datacenters
            .get(pos)
            .ok_or(OptimError::PositionOutOfRange {
                position: pos,
                num_dc: s.datacenters.len(),
            })?;
        map.set(d, dc.id);
    }
    for (d, home) in s.private_homes() {
        map.set(d, home);
    }
    Ok(map)
}

/// Make a placement capacity-feasible: while any edge datacenter is over
/// capacity, move its largest public dataset to that region's cloud.
/// Private datasets never move; if they alone overflow an edge, the
/// scenario is rejected.
pub fn repair(mut map: PlacementMap, s: &Scenario) -> Result<PlacementMap, OptimError> {
    let mut used = vec![0u64; s.datacenters.len()];
    for (d, dc) in map.iter() {
        if let (Some(ds), Some(pos)) = (s.dataset(d), s.dc_index(dc)) {
            used[pos] += ds.size_mb;
        }
    }
    let mut edge_order: Vec<usize> = (0..s.datacenters.len())
        .filter(|&i| s.datacenters[i].kind == DcKind::Edge)
        .collect();
    edge_order.sort_by_key(|&i| s.datacenters[i].id);

    for &pos in &edge_order {
        let dc = &s.datacenters[pos];
        let cap = match dc.capacity.mb() {
            Some(c) => c,
            None => continue,
        };
        while used[pos] > cap {
            // Largest public dataset here; ties go to the lowest id.
            let victim = map
                .iter()
                .filter(|&(d, loc)| {
                    loc == dc.id && s.dataset(d).is_some_and(|ds| !ds.is_private())
                })
                .map(|(d, _)| d)
                .max_by_key(|&d| (s.dataset(d).unwrap().size_mb, std::cmp::Reverse(d)));
            let Some(victim) = victim else {
                return Err(OptimError::InfeasiblePrivateLoad { dc: dc.id });
            };
            let cloud_pos = s
                .region_cloud(dc.region)
                .ok_or(OptimError::NoCloudInRegion { region: dc.region })?;
            let size = s.dataset(victim).unwrap().size_mb;
            map.set(victim, s.datacenters[cloud_pos].id);
            used[pos] -= size;
            used[cloud_pos] += size;
        }
    }
    Ok(map)
}

/// Capacity repair scoped to a batch of pending placements: pending
/// public datasets move first (largest to the overloaded edge's region
/// cloud). When an edge overflows with no pending public left on it (an
/// immovable private arrived at a full home), resident public datasets
/// yield instead; their relocations join the decision map so the caller
/// charges the moves.
pub fn repair_pending(
    s: &Scenario,
    base: &PlacementMap,
    decisions: &mut std::collections::BTreeMap<crate::model::DatasetId, crate::model::DcId>,
) -> Result<(), OptimError> {
    let mut used = vec![0u64; s.datacenters.len()];
    let location = |decisions: &std::collections::BTreeMap<_, _>, d| {
        decisions.get(&d).copied().or_else(|| base.get(d))
    };
    for (d, dc) in base.iter() {
        if decisions.contains_key(&d) {
            continue;
        }
        if let (Some(ds), Some(pos)) = (s.dataset(d), s.dc_index(dc)) {
            used[pos] += ds.size_mb;
        }
    }
    for (&d, &dc) in decisions.iter() {
        if let (Some(ds), Some(pos)) = (s.dataset(d), s.dc_index(dc)) {
            used[pos] += ds.size_mb;
        }
    }
    let mut edge_order: Vec<usize> = (0..s.datacenters.len())
        .filter(|&i| s.datacenters[i].kind == DcKind::Edge)
        .collect();
    edge_order.sort_by_key(|&i| s.datacenters[i].id);

    for &pos in &edge_order {
        let dc = &s.datacenters[pos];
        let cap = match dc.capacity.mb() {
            Some(c) => c,
            None => continue,
        };
        while used[pos] > cap {
            let pending_victim = decisions
                .iter()
                .filter(|&(&d, &loc)| {
                    loc == dc.id && s.dataset(d).is_some_and(|ds| !ds.is_private())
                })
                .map(|(&d, _)| d)
                .max_by_key(|&d| (s.dataset(d).unwrap().size_mb, std::cmp::Reverse(d)));
            let victim = pending_victim.or_else(|| {
                base.iter()
                    .filter(|&(d, _)| location(decisions, d) == Some(dc.id))
                    .filter(|&(d, _)| s.dataset(d).is_some_and(|ds| !ds.is_private()))
                    .map(|(d, _)| d)
                    .max_by_key(|&d| (s.dataset(d).unwrap().size_mb, std::cmp::Reverse(d)))
            });
            let Some(victim) = victim else {
                return Err(OptimError::InfeasiblePrivateLoad { dc: dc.id });
            };
            let cloud_pos = s
                .region_cloud(dc.region)
                .ok_or(OptimError::NoCloudInRegion { region: dc.region })?;
            let size = s.dataset(victim).unwrap().size_mb;
            decisions.insert(victim, s.datacenters[cloud_pos].id);
            used[pos] -= size;
            used[cloud_pos] += size;
        }
    }
    Ok(())
}
