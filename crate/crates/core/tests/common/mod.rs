#![allow(dead_code)]

pub mod oracle;

use pushsim::net::LinkParams;

pub fn link(rtt_ms: f64, mbps: f64) -> LinkParams {
    LinkParams::from_ms_mbps(rtt_ms, mbps).unwrap()
}
