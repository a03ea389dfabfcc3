use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet, VecDeque};

use super::{EventKind, Mode, ScriptExecution, SimConfig, SimError, SimEvent, SimResult};
use crate::net::{handshake_time, CongestionState, LinkParams};
use crate::page::{DependencyTree, Resource, ResourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Ack(u64),
    RequestArrive(usize),
    LinkFree,
    FirstByte(usize),
    LastByte(usize),
    OffsetReached(usize),
}

impl Action {
    fn rank(self) -> u8 {
        match self {
            Action::Ack(_) => 0,
            Action::RequestArrive(_) => 1,
            Action::LinkFree => 2,
            Action::FirstByte(_) => 3,
            Action::LastByte(_) => 4,
            Action::OffsetReached(_) => 5,
        }
    }

    fn resource(self) -> Option<usize> {
        match self {
            Action::Ack(_) | Action::LinkFree => None,
            Action::RequestArrive(r) | Action::FirstByte(r) | Action::LastByte(r) | Action::OffsetReached(r) => Some(r),
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    rank: u8,
    id_rank: Option<usize>,
    seq: u64,
    action: Action,
}

impl Scheduled {
    fn key(&self) -> (u8, Option<usize>, u64) {
        (self.rank, self.id_rank, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then_with(|| self.key().cmp(&other.key()))
    }
}

struct Engine<'a> {
    page: &'a DependencyTree,
    link: LinkParams,
    half_rtt: f64,
    rtt: f64,
    byte_time: f64,
    scripts: ScriptExecution,
    cong: CongestionState,
    id_rank: Vec<usize>,

    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    events: Vec<SimEvent>,

    // server side
    push_list: Vec<usize>,
    queue: VecDeque<(usize, u64)>,
    link_free_at: f64,
    inflight: u64,
    /// Resources whose last byte has not left the server yet.
    unsent_resources: usize,
    idle_since: Option<f64>,
    bubble_total: f64,
    sent: u64,

    // client side
    pushed: Vec<bool>,
    requested: Vec<bool>,
    reached: Vec<bool>,
    received: Vec<bool>,
    cursor: Vec<usize>,
    blocked_parent: Vec<Option<usize>>,
    parse_blocked: Vec<bool>,
    outstanding: usize,
    plt: f64,
}

pub(super) fn run(page: &DependencyTree, config: &SimConfig) -> Result<SimResult, SimError> {
    match &config.mode {
        Mode::Pull => Engine::new(page, config, &[]).run(),
        Mode::Push { manifest, pull_fallback } => {
            let list = manifest_indices(page, manifest.ids(), *pull_fallback)?;
            Engine::new(page, config, &list).run()
        }
        Mode::Optimal => {
            let root = page.root_resource();
            let single =
                Resource::new(root.id.clone(), ResourceKind::Html, page.total_bytes()).with_url(root.url.clone());
            let flat = DependencyTree::new(page.name(), vec![single]).expect("single document is a valid page");
            Engine::new(&flat, config, &[]).run()
        }
    }
}

fn manifest_indices(
    page: &DependencyTree,
    ids: &[crate::page::ResourceId],
    pull_fallback: bool,
) -> Result<Vec<usize>, SimError> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let idx = page.index_of(id).ok_or_else(|| SimError::ManifestUnknown(id.clone()))?;
        if idx == page.root() {
            return Err(SimError::ManifestRoot(id.clone()));
        }
        if !seen.insert(idx) {
            return Err(SimError::ManifestDuplicate(id.clone()));
        }
        out.push(idx);
    }
    if !pull_fallback {
        if let Some(missing) = (0..page.len()).find(|&i| i != page.root() && !seen.contains(&i)) {
            return Err(SimError::ManifestMissing(page.resource(missing).id.clone()));
        }
    }
    Ok(out)
}

impl<'a> Engine<'a> {
    fn new(page: &'a DependencyTree, config: &SimConfig, push_list: &[usize]) -> Self {
        let n = page.len();
        let mut by_id: Vec<usize> = (0..n).collect();
        by_id.sort_by(|&a, &b| page.resource(a).id.cmp(&page.resource(b).id));
        let mut id_rank = vec![0; n];
        for (rank, &i) in by_id.iter().enumerate() {
            id_rank[i] = rank;
        }
        let mut cong = config.congestion;
        cong.reset();
        let mut pushed = vec![false; n];
        for &i in push_list {
            pushed[i] = true;
        }
        Self {
            page,
            link: config.link,
            half_rtt: config.link.one_way_s(),
            rtt: config.link.rtt_s(),
            byte_time: 8.0 / config.link.bandwidth_bps(),
            scripts: config.scripts,
            cong,
            id_rank,
            heap: BinaryHeap::new(),
            seq: 0,
            events: Vec::new(),
            push_list: push_list.to_vec(),
            queue: VecDeque::new(),
            link_free_at: 0.0,
            inflight: 0,
            unsent_resources: n,
            idle_since: None,
            bubble_total: 0.0,
            sent: 0,
            pushed,
            requested: vec![false; n],
            reached: vec![false; n],
            received: vec![false; n],
            cursor: vec![0; n],
            blocked_parent: vec![None; n],
            parse_blocked: vec![false; n],
            outstanding: n,
            plt: 0.0,
        }
    }

    fn schedule(&mut self, time: f64, action: Action) {
        self.seq += 1;
        self.heap.push(Reverse(Scheduled {
            time,
            rank: action.rank(),
            id_rank: action.resource().map(|r| self.id_rank[r]),
            seq: self.seq,
            action,
        }));
    }

    fn emit(&mut self, time_s: f64, kind: EventKind, resource: Option<usize>) {
        let resource_id = resource.map(|r| self.page.resource(r).id.clone());
        self.events.push(SimEvent { time_s, kind, resource_id });
    }

    fn run(mut self) -> Result<SimResult, SimError> {
        let root = self.page.root();
        let handshake = handshake_time(&self.link);
        self.emit(handshake, EventKind::HandshakeDone, None);
        self.request(handshake, root);

        while let Some(Reverse(ev)) = self.heap.pop() {
            let now = ev.time;
            match ev.action {
                Action::Ack(bytes) => {
                    self.inflight -= bytes;
                    self.cong.on_ack(bytes);
                    self.pump(now);
                }
                Action::RequestArrive(r) => {
                    self.queue.push_back((r, 0));
                    if r == root {
                        let list = std::mem::take(&mut self.push_list);
                        for &p in &list {
                            self.queue.push_back((p, 0));
                            self.emit(now + self.half_rtt, EventKind::PushPromised, Some(p));
                        }
                    }
                    self.pump(now);
                }
                Action::LinkFree => self.pump(now),
                Action::FirstByte(r) => self.emit(now, EventKind::FirstByte, Some(r)),
                Action::LastByte(r) => {
                    self.emit(now, EventKind::LastByte, Some(r));
                    self.received[r] = true;
                    self.outstanding -= 1;
                    if self.outstanding == 0 {
                        self.plt = now;
                    }
                    if let Some(p) = self.blocked_parent[r].take() {
                        self.parse_blocked[p] = false;
                        self.emit(now, EventKind::ParseResumed, Some(p));
                        self.advance_parse(now, p);
                    }
                }
                Action::OffsetReached(c) => {
                    self.reached[c] = true;
                    let p = self.page.parent_of(c).expect("only children have offsets");
                    self.advance_parse(now, p);
                }
            }
        }

        if let Some(missing) = self.received.iter().position(|&r| !r) {
            return Err(SimError::Unreachable(self.page.resource(missing).id.clone()));
        }

        let mut events = self.events;
        let ids: Vec<_> = (0..self.page.len()).map(|i| self.id_rank[i]).collect();
        let rank_of = |e: &SimEvent| e.resource_id.as_ref().and_then(|id| self.page.index_of(id)).map(|i| ids[i]);
        events.sort_by(|a, b| {
            a.time_s.total_cmp(&b.time_s).then(a.kind.cmp(&b.kind)).then_with(|| rank_of(a).cmp(&rank_of(b)))
        });

        Ok(SimResult { plt_s: self.plt, events, bubble_total_s: self.bubble_total, bytes_transferred: self.sent })
    }

    fn request(&mut self, now: f64, r: usize) {
        self.requested[r] = true;
        self.emit(now, EventKind::RequestSent, Some(r));
        self.schedule(now + self.half_rtt, Action::RequestArrive(r));
    }

    fn advance_parse(&mut self, now: f64, parent: usize) {
        let page = self.page;
        if self.parse_blocked[parent] {
            return;
        }
        let kids = page.children(parent);
        while self.cursor[parent] < kids.len() {
            let c = kids[self.cursor[parent]];
            if !self.reached[c] {
                break;
            }
            self.cursor[parent] += 1;
            self.emit(now, EventKind::DependencyDiscovered, Some(c));
            if !self.pushed[c] && !self.requested[c] {
                self.request(now, c);
            }
            if self.scripts == ScriptExecution::Blocking && page.resource(c).is_blocking_script() && !self.received[c] {
                self.blocked_parent[c] = Some(parent);
                self.parse_blocked[parent] = true;
                self.emit(now, EventKind::ParseBlocked, Some(parent));
                break;
            }
        }
    }

    /// Starts the next transmission if the link is free and something is sendable.
    fn pump(&mut self, now: f64) {
        loop {
            if self.link_free_at > now {
                return;
            }
            let Some(&(head, next)) = self.queue.front() else {
                if self.unsent_resources > 0 && self.idle_since.is_none() {
                    self.idle_since = Some(now);
                }
                return;
            };
            let window_room = self.cong.window().room(self.inflight);
            let cap = if self.cong.enabled { self.cong.mss_bytes.min(window_room) } else { u64::MAX };
            if cap == 0 && self.page.resource(head).size_bytes > next {
                // Window-limited stall, not a bubble.
                return;
            }

            if let Some(idle) = self.idle_since.take() {
                if now > idle {
                    self.emit(idle + self.half_rtt, EventKind::BubbleStart, None);
                    self.emit(now + self.half_rtt, EventKind::BubbleEnd, None);
                    self.bubble_total += now - idle;
                }
            }

            let mut t = now;
            let mut seg = 0u64;
            while let Some(front) = self.queue.front_mut() {
                let (r, from) = *front;
                let size = self.page.resource(r).size_bytes;
                let take = (size - from).min(cap - seg);
                if take == 0 && size > from {
                    break;
                }
                front.1 = from + take;
                if front.1 == size {
                    self.queue.pop_front();
                    self.unsent_resources -= 1;
                }
                self.deliver(r, from, from + take, t);
                t += take as f64 * self.byte_time;
                seg += take;
                if !self.cong.enabled && take > 0 {
                    break;
                }
            }

            self.sent += seg;
            if seg > 0 {
                self.link_free_at = t;
                self.schedule(t, Action::LinkFree);
                if self.cong.enabled {
                    self.inflight += seg;
                    self.schedule(t + self.rtt, Action::Ack(seg));
                }
                return;
            }
        }
    }

    /// Schedules the client-side consequences of sending bytes `[from, to)` of
    /// `r`, starting at server time `start`.
    fn deliver(&mut self, r: usize, from: u64, to: u64, start: f64) {
        let arrive = start + self.half_rtt;
        let size = self.page.resource(r).size_bytes;
        if from == 0 {
            self.schedule(arrive, Action::FirstByte(r));
        }
        let page = self.page;
        for &c in page.children(r) {
            let o = page.resource(c).discovery_offset_bytes;
            if (o == 0 && from == 0) || (from < o && o <= to) {
                self.schedule(arrive + (o - from) as f64 * self.byte_time, Action::OffsetReached(c));
            }
        }
        if to == size {
            self.schedule(arrive + (to - from) as f64 * self.byte_time, Action::LastByte(r));
        }
    }
}
