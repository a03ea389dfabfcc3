//! Link and connection model: RTT, bandwidth, handshake cost and an optional
//! slow-start congestion window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("rtt must be positive and finite, got {0} s")]
    Rtt(f64),
    #[error("bandwidth must be positive and finite, got {0} bit/s")]
    Bandwidth(f64),
    #[error("slow start: {0}")]
    Congestion(&'static str),
}

/// Round-trip time and bottleneck bandwidth of the single client-server path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    rtt_s: f64,
    bandwidth_bps: f64,
}

impl LinkParams {
    pub fn new(rtt_s: f64, bandwidth_bps: f64) -> Result<Self, LinkError> {
        if !(rtt_s.is_finite() && rtt_s > 0.0) {
            return Err(LinkError::Rtt(rtt_s));
        }
        if !(bandwidth_bps.is_finite() && bandwidth_bps > 0.0) {
            return Err(LinkError::Bandwidth(bandwidth_bps));
        }
        Ok(Self { rtt_s, bandwidth_bps })
    }

    pub fn from_ms_mbps(rtt_ms: f64, bandwidth_mbps: f64) -> Result<Self, LinkError> {
        Self::new(rtt_ms / 1e3, bandwidth_mbps * 1e6)
    }

    pub fn rtt_s(&self) -> f64 {
        self.rtt_s
    }

    pub fn bandwidth_bps(&self) -> f64 {
        self.bandwidth_bps
    }

    /// Propagation delay in either direction.
    pub fn one_way_s(&self) -> f64 {
        self.rtt_s / 2.0
    }
}

/// TCP and TLS setup on a cold connection: four round trips.
pub fn handshake_time(link: &LinkParams) -> f64 {
    4.0 * link.rtt_s
}

/// Serialization time of `bytes` at the link rate.
pub fn transfer_time(bytes: u64, link: &LinkParams) -> f64 {
    bytes as f64 * 8.0 / link.bandwidth_bps
}

pub const DEFAULT_MSS_BYTES: u64 = 1460;
pub const DEFAULT_INIT_CWND_SEGMENTS: u64 = 10;
pub const DEFAULT_MAX_CWND_BYTES: u64 = 16 * 1024 * 1024;

/// How many bytes the sender may have unacknowledged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InflightLimit {
    Bytes(u64),
    Unbounded,
}

impl InflightLimit {
    /// Remaining room given `inflight` unacknowledged bytes.
    pub fn room(self, inflight: u64) -> u64 {
        match self {
            InflightLimit::Bytes(b) => b.saturating_sub(inflight),
            InflightLimit::Unbounded => u64::MAX,
        }
    }
}

/// Slow-start window state. No loss is modeled, so the window only grows:
/// every acknowledged byte adds one byte of window, doubling it per round
/// trip while the sender is backlogged, up to `max_cwnd_bytes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongestionState {
    pub enabled: bool,
    pub mss_bytes: u64,
    pub init_cwnd_segments: u64,
    pub max_cwnd_bytes: u64,
    pub cwnd_bytes: u64,
}

impl Default for CongestionState {
    fn default() -> Self {
        Self::disabled()
    }
}

impl CongestionState {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::slow_start() }
    }

    /// Cold connection with a 10-segment initial window of 1460-byte segments.
    pub fn slow_start() -> Self {
        let init = DEFAULT_MSS_BYTES * DEFAULT_INIT_CWND_SEGMENTS;
        Self {
            enabled: true,
            mss_bytes: DEFAULT_MSS_BYTES,
            init_cwnd_segments: DEFAULT_INIT_CWND_SEGMENTS,
            max_cwnd_bytes: DEFAULT_MAX_CWND_BYTES,
            cwnd_bytes: init,
        }
    }

    pub fn new(enabled: bool, mss_bytes: u64, init_cwnd_segments: u64, max_cwnd_bytes: u64) -> Result<Self, LinkError> {
        if mss_bytes == 0 {
            return Err(LinkError::Congestion("mss_bytes must be positive"));
        }
        if init_cwnd_segments == 0 {
            return Err(LinkError::Congestion("init_cwnd_segments must be positive"));
        }
        let init =
            mss_bytes.checked_mul(init_cwnd_segments).ok_or(LinkError::Congestion("initial window overflows"))?;
        if max_cwnd_bytes < init {
            return Err(LinkError::Congestion("max_cwnd_bytes is below the initial window"));
        }
        Ok(Self { enabled, mss_bytes, init_cwnd_segments, max_cwnd_bytes, cwnd_bytes: init })
    }

    pub fn initial_window(&self) -> u64 {
        self.mss_bytes * self.init_cwnd_segments
    }

    /// Window after `elapsed_rtts` fully backlogged round trips.
    pub fn allowed_inflight(&self, elapsed_rtts: u32) -> InflightLimit {
        if !self.enabled {
            return InflightLimit::Unbounded;
        }
        let grown = match 1u64.checked_shl(elapsed_rtts) {
            Some(factor) => self.initial_window().saturating_mul(factor),
            None => u64::MAX,
        };
        InflightLimit::Bytes(grown.min(self.max_cwnd_bytes))
    }

    pub fn window(&self) -> InflightLimit {
        if self.enabled {
            InflightLimit::Bytes(self.cwnd_bytes)
        } else {
            InflightLimit::Unbounded
        }
    }

    /// Slow-start growth on acknowledgement of `bytes`.
    pub fn on_ack(&mut self, bytes: u64) {
        self.cwnd_bytes = self.cwnd_bytes.saturating_add(bytes).min(self.max_cwnd_bytes);
    }

    /// Back to the initial window, as on a fresh connection.
    pub fn reset(&mut self) {
        self.cwnd_bytes = self.initial_window();
    }
}
