//! Closed-form limits on page load time and on what push can save.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{handshake_time, transfer_time, LinkParams};
use crate::page::DependencyTree;
use crate::sim::DiscoverySchedule;

/// No load can finish before the handshake plus the page's serialization time.
pub fn plt_lower_bound(tree: &DependencyTree, link: &LinkParams) -> f64 {
    handshake_time(link) + transfer_time(tree.total_bytes(), link)
}

/// Push saves at most one round trip per level of the dependency tree.
pub fn spr_upper_bound_loose(tree: &DependencyTree, link: &LinkParams) -> f64 {
    link.rtt_s() * tree.height() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthTerm {
    pub depth: usize,
    pub residual_bytes: u64,
    pub term_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightBoundBreakdown {
    pub per_depth_terms: Vec<DepthTerm>,
    pub total_s: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundsError {
    #[error("discovery schedule has no entry for depth {0}")]
    MissingDepth(usize),
}

/// Round trip not hidden behind shallower data still in flight.
pub fn depth_term(residual_bytes: u64, link: &LinkParams) -> f64 {
    (link.rtt_s() - transfer_time(residual_bytes, link)).max(0.0)
}

/// Sums, over depths `1..=h`, the part of one RTT that the data still owed
/// for shallower levels fails to cover when that depth is discovered.
pub fn spr_upper_bound_tight(
    tree: &DependencyTree,
    link: &LinkParams,
    schedule: &DiscoverySchedule,
) -> Result<TightBoundBreakdown, BoundsError> {
    let mut terms = Vec::with_capacity(tree.height());
    for d in 1..=tree.height() {
        let point = schedule.point(d).ok_or(BoundsError::MissingDepth(d))?;
        terms.push(DepthTerm {
            depth: d,
            residual_bytes: point.rsize_bytes,
            term_s: depth_term(point.rsize_bytes, link),
        });
    }
    let total_s = terms.iter().map(|t| t.term_s).sum();
    Ok(TightBoundBreakdown { per_depth_terms: terms, total_s })
}
