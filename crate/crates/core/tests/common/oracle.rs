//! Reference timelines computed without the event engine.
//!
//! Pull, slow start off, scripts never blocking: the server is a FIFO that
//! sends whole responses back to back. A request reaching the server at
//! `a` starts at `max(a, free)`; its byte `o` reaches the client at
//! `start + rtt/2 + o*8/bw`, and a child referenced at `o` reaches the
//! server half an RTT after that.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use pushsim::net::LinkParams;
use pushsim::page::DependencyTree;

#[derive(PartialEq)]
struct Pending {
    arrival: f64,
    id: String,
    idx: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.arrival.total_cmp(&self.arrival).then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct PullTimeline {
    pub plt: f64,
    /// Client-side first and last byte per resource.
    pub first: Vec<f64>,
    pub last: Vec<f64>,
    pub discovered: Vec<Option<f64>>,
}

pub fn pull(page: &DependencyTree, link: &LinkParams) -> PullTimeline {
    let rtt = link.rtt_s();
    // Same rounding as the engine so near-simultaneous requests tie-break alike.
    let byte_time = 8.0 / link.bandwidth_bps();
    let secs = |b: u64| b as f64 * byte_time;
    let n = page.len();
    let mut first = vec![f64::NAN; n];
    let mut last = vec![f64::NAN; n];
    let mut discovered = vec![None; n];
    let mut heap = BinaryHeap::new();
    let root = page.root();
    heap.push(Pending { arrival: 4.5 * rtt, id: page.resource(root).id.to_string(), idx: root });
    let mut free = 0.0f64;
    while let Some(p) = heap.pop() {
        let start = p.arrival.max(free);
        let size = page.resource(p.idx).size_bytes;
        free = start + secs(size);
        first[p.idx] = start + rtt / 2.0;
        last[p.idx] = free + rtt / 2.0;
        for &c in page.children(p.idx) {
            let t = start + rtt / 2.0 + secs(page.resource(c).discovery_offset_bytes);
            discovered[c] = Some(t);
            heap.push(Pending { arrival: t + rtt / 2.0, id: page.resource(c).id.to_string(), idx: c });
        }
    }
    let plt = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    PullTimeline { plt, first, last, discovered }
}

/// Push and optimal with slow start off: every byte leaves the server
/// back to back once the root request lands.
pub fn contiguous_plt(page: &DependencyTree, link: &LinkParams) -> f64 {
    5.0 * link.rtt_s() + page.total_bytes() as f64 * 8.0 / link.bandwidth_bps()
}
