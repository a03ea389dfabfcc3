//! Per-depth discovery instants extracted from a pull-mode timeline, the
//! input of the masking-aware SPR bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EventKind, SimEvent, SimResult};
use crate::page::{DependencyTree, ResourceId};

/// One discovery of a depth-`d` resource and how much shallower data was
/// still owed to the client at that instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryPoint {
    pub time_s: f64,
    pub resource_id: ResourceId,
    /// Bytes of depth `< d` resources requested strictly before `time_s`
    /// and not yet received, rounded down.
    pub rsize_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthDiscovery {
    pub depth: usize,
    /// Earliest discovery at this depth.
    pub first: DiscoveryPoint,
    /// Discovery at this depth with the least data left to mask it.
    pub least_masked: DiscoveryPoint,
}

/// Which discovery represents a depth in the tight bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscoveryRule {
    /// Only the first discovery at each depth counts. Later discoveries at
    /// the same depth can open bubbles this rule does not charge for.
    First,
    /// The least-masked discovery at each depth counts; this keeps the sum
    /// an upper bound on SPR when scripts do not block parsing.
    #[default]
    LeastMasked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySchedule {
    pub rule: DiscoveryRule,
    pub depths: Vec<DepthDiscovery>,
}

impl DiscoverySchedule {
    pub fn with_rule(mut self, rule: DiscoveryRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn depth(&self, d: usize) -> Option<&DepthDiscovery> {
        self.depths.iter().find(|e| e.depth == d)
    }

    /// The point the configured rule selects for depth `d`.
    pub fn point(&self, d: usize) -> Option<&DiscoveryPoint> {
        self.depth(d).map(|e| match self.rule {
            DiscoveryRule::First => &e.first,
            DiscoveryRule::LeastMasked => &e.least_masked,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Progress {
    requested: Option<f64>,
    first: Option<f64>,
    last: Option<f64>,
}

/// Extracts the per-depth discovery schedule from a pull-mode result.
///
/// Reception progress between a resource's first and last byte is
/// interpolated linearly, which is exact when slow start is off because
/// each response is then sent contiguously at link rate.
pub fn trace_discovery_schedule(pull_result: &SimResult, page: &DependencyTree) -> DiscoverySchedule {
    schedule_from_events(&pull_result.events, page)
}

pub(crate) fn schedule_from_events(events: &[SimEvent], page: &DependencyTree) -> DiscoverySchedule {
    let mut progress = vec![Progress::default(); page.len()];
    let mut discoveries: Vec<(f64, usize)> = Vec::new();
    for e in events {
        let Some(i) = e.resource_id.as_ref().and_then(|id| page.index_of(id)) else { continue };
        let p = &mut progress[i];
        match e.kind {
            EventKind::RequestSent | EventKind::PushPromised => {
                p.requested.get_or_insert(e.time_s);
            }
            EventKind::FirstByte => p.first = Some(e.time_s),
            EventKind::LastByte => p.last = Some(e.time_s),
            EventKind::DependencyDiscovered => discoveries.push((e.time_s, i)),
            _ => {}
        }
    }

    let pending_at = |t: f64, below: usize| -> f64 {
        let mut sum = 0.0;
        for (i, p) in progress.iter().enumerate() {
            if page.depth(i) >= below || !p.requested.is_some_and(|r| r < t) {
                continue;
            }
            let size = page.resource(i).size_bytes as f64;
            sum += match (p.first, p.last) {
                (_, Some(l)) if t >= l => 0.0,
                (Some(f), Some(l)) if t > f && l > f => size * (l - t) / (l - f),
                _ => size,
            };
        }
        sum
    };

    let mut by_depth: BTreeMap<usize, DepthDiscovery> = BTreeMap::new();
    for (t, i) in discoveries {
        let d = page.depth(i);
        let point = DiscoveryPoint {
            time_s: t,
            resource_id: page.resource(i).id.clone(),
            rsize_bytes: pending_at(t, d).floor() as u64,
        };
        match by_depth.get_mut(&d) {
            None => {
                by_depth.insert(d, DepthDiscovery { depth: d, first: point.clone(), least_masked: point });
            }
            Some(entry) => {
                if t < entry.first.time_s {
                    entry.first = point.clone();
                }
                if point.rsize_bytes < entry.least_masked.rsize_bytes {
                    entry.least_masked = point;
                }
            }
        }
    }

    DiscoverySchedule { rule: DiscoveryRule::default(), depths: by_depth.into_values().collect() }
}
