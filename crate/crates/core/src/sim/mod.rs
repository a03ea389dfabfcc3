//! Deterministic discrete-event simulation of a single page load.
//!
//! The model has one HTTP/2 connection and one server send queue draining
//! at link rate. Bytes reach the client half an RTT after they leave the
//! server; requests take the same half RTT the other way. Parsing is
//! instantaneous, so a child is discovered the moment the byte at its
//! discovery offset arrives (subject to script blocking, see
//! [`ScriptExecution`]).
//!
//! Three modes are supported:
//!
//! * **pull**: every resource is requested when discovered.
//! * **push**: the server queues the manifest right behind the root document.
//! * **optimal**: the page is replaced by one document of the page's total size.

mod engine;
mod schedule;
mod timeline;

pub use schedule::{trace_discovery_schedule, DepthDiscovery, DiscoveryPoint, DiscoveryRule, DiscoverySchedule};
pub use timeline::{read_timeline_jsonl, write_timeline_jsonl};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{CongestionState, LinkParams};
use crate::page::{DependencyTree, ResourceId};
use crate::push::PushManifest;

/// How non-async scripts affect discovery in their parent document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptExecution {
    /// The browser keeps scanning past pending scripts, so scripts never
    /// delay the discovery of later references.
    #[default]
    Speculative,
    /// A non-async script halts parsing of its parent at the script's offset
    /// until the script has been fully received.
    Blocking,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Pull,
    /// Resources listed in the manifest are pushed behind the root. With
    /// `pull_fallback` unset the manifest must cover every non-root
    /// resource; with it set, unlisted resources are requested on discovery.
    Push {
        manifest: PushManifest,
        pull_fallback: bool,
    },
    Optimal,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Pull => "pull",
            Mode::Push { .. } => "push",
            Mode::Optimal => "optimal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: Mode,
    pub link: LinkParams,
    pub congestion: CongestionState,
    pub scripts: ScriptExecution,
}

impl SimConfig {
    pub fn pull(link: LinkParams) -> Self {
        Self { mode: Mode::Pull, link, congestion: CongestionState::disabled(), scripts: ScriptExecution::default() }
    }

    pub fn push(link: LinkParams, manifest: PushManifest) -> Self {
        Self { mode: Mode::Push { manifest, pull_fallback: false }, ..Self::pull(link) }
    }

    /// Push what the manifest lists and fetch everything else on discovery.
    pub fn push_with_fallback(link: LinkParams, manifest: PushManifest) -> Self {
        Self { mode: Mode::Push { manifest, pull_fallback: true }, ..Self::pull(link) }
    }

    pub fn optimal(link: LinkParams) -> Self {
        Self { mode: Mode::Optimal, ..Self::pull(link) }
    }

    pub fn with_congestion(mut self, congestion: CongestionState) -> Self {
        self.congestion = congestion;
        self
    }

    pub fn with_scripts(mut self, scripts: ScriptExecution) -> Self {
        self.scripts = scripts;
        self
    }
}

/// Declaration order doubles as the tie-break rank for simultaneous events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    HandshakeDone,
    RequestSent,
    FirstByte,
    LastByte,
    DependencyDiscovered,
    ParseBlocked,
    ParseResumed,
    PushPromised,
    BubbleStart,
    BubbleEnd,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Something that happened at the client at `time_s` seconds after navigation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time_s: f64,
    pub kind: EventKind,
    pub resource_id: Option<ResourceId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Arrival of the last byte of the last resource.
    pub plt_s: f64,
    /// Ordered by time, then kind, then resource id.
    pub events: Vec<SimEvent>,
    /// Total time the link sat idle while the page was still incomplete.
    pub bubble_total_s: f64,
    pub bytes_transferred: u64,
}

impl SimResult {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &SimEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Resource ids in the order they were discovered.
    pub fn discovery_order(&self) -> Vec<ResourceId> {
        self.events_of(EventKind::DependencyDiscovered).filter_map(|e| e.resource_id.clone()).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("push manifest does not cover resource `{0}`")]
    ManifestMissing(ResourceId),
    #[error("push manifest names unknown resource `{0}`")]
    ManifestUnknown(ResourceId),
    #[error("push manifest lists `{0}` more than once")]
    ManifestDuplicate(ResourceId),
    #[error("push manifest includes the root document `{0}`")]
    ManifestRoot(ResourceId),
    #[error("resource `{0}` is never delivered")]
    Unreachable(ResourceId),
}

/// Runs one page load to completion.
pub fn simulate(page: &DependencyTree, config: &SimConfig) -> Result<SimResult, SimError> {
    engine::run(page, config)
}

/// Pull and push loads of the same page and their difference.
#[derive(Debug, Clone)]
pub struct PushComparison {
    pub pull: SimResult,
    pub push: SimResult,
    pub spr_s: f64,
}

/// Runs the page with and without push under otherwise identical settings.
pub fn compare(
    page: &DependencyTree,
    link: LinkParams,
    congestion: CongestionState,
    scripts: ScriptExecution,
    manifest: PushManifest,
    pull_fallback: bool,
) -> Result<PushComparison, SimError> {
    let base = SimConfig::pull(link).with_congestion(congestion).with_scripts(scripts);
    let pull = simulate(page, &base)?;
    let push_cfg = SimConfig { mode: Mode::Push { manifest, pull_fallback }, ..base };
    let push = simulate(page, &push_cfg)?;
    let spr_s = pull.plt_s - push.plt_s;
    Ok(PushComparison { pull, push, spr_s })
}

/// Server push reduction: pull PLT minus push PLT.
pub fn spr(
    page: &DependencyTree,
    link: LinkParams,
    congestion: CongestionState,
    manifest: &PushManifest,
) -> Result<f64, SimError> {
    compare(page, link, congestion, ScriptExecution::default(), manifest.clone(), false).map(|c| c.spr_s)
}
