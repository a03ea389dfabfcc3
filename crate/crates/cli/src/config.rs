//! Declarative sweep configuration (TOML, `version = 1`).
//!
//! ```toml
//! version = 1
//! rtts_ms = [25, 50, 100, 200]
//! bandwidths_mbps = [20, 100, 500]
//! pages = ["fixture:p0", "fixture:p1", "fixture:p2"]
//! modes = ["pull", "push", "optimal"]
//! scripts = "speculative"
//! repetitions = 1
//! cached_urls = "cached.txt"
//!
//! [slow_start]
//! enabled = true
//! mss_bytes = 1460
//! init_cwnd_segments = 10
//! max_cwnd_bytes = 16777216
//! ```
//!
//! Every key is optional except `version`; missing keys take the grid
//! defaults. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use pushsim::experiment::{ExperimentGrid, ModeName, PageSource};
use pushsim::net::{CongestionState, DEFAULT_INIT_CWND_SEGMENTS, DEFAULT_MAX_CWND_BYTES, DEFAULT_MSS_BYTES};
use pushsim::sim::ScriptExecution;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SlowStartConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_mss")]
    pub mss_bytes: u64,
    #[serde(default = "default_init")]
    pub init_cwnd_segments: u64,
    #[serde(default = "default_max")]
    pub max_cwnd_bytes: u64,
}

fn default_mss() -> u64 {
    DEFAULT_MSS_BYTES
}
fn default_init() -> u64 {
    DEFAULT_INIT_CWND_SEGMENTS
}
fn default_max() -> u64 {
    DEFAULT_MAX_CWND_BYTES
}

impl Default for SlowStartConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            mss_bytes: default_mss(),
            init_cwnd_segments: default_init(),
            max_cwnd_bytes: default_max(),
        }
    }
}

impl SlowStartConfig {
    pub fn state(&self) -> Result<CongestionState> {
        Ok(CongestionState::new(self.enabled, self.mss_bytes, self.init_cwnd_segments, self.max_cwnd_bytes)?)
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    pub rtts_ms: Option<Vec<f64>>,
    pub bandwidths_mbps: Option<Vec<f64>>,
    pub pages: Option<Vec<String>>,
    pub modes: Option<Vec<ModeName>>,
    pub scripts: Option<ScriptExecution>,
    pub repetitions: Option<u32>,
    pub cached_urls: Option<PathBuf>,
    pub slow_start: Option<SlowStartConfig>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: SweepConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if cfg.version != CONFIG_VERSION {
            bail!("{}: unsupported config version {} (expected {CONFIG_VERSION})", path.display(), cfg.version);
        }
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = cfg.cached_urls.as_mut() {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(pages) = cfg.pages.as_mut() {
            for s in pages.iter_mut() {
                if !s.contains(':') && Path::new(s.as_str()).is_relative() {
                    *s = base.join(&s).to_string_lossy().into_owned();
                }
            }
        }
        Ok(cfg)
    }

    /// Starts from the defaults and applies every key present.
    pub fn to_grid(&self) -> Result<ExperimentGrid> {
        let mut grid = ExperimentGrid::default();
        if let Some(v) = &self.rtts_ms {
            grid.rtts_ms = v.clone();
        }
        if let Some(v) = &self.bandwidths_mbps {
            grid.bandwidths_mbps = v.clone();
        }
        if let Some(v) = &self.pages {
            grid.pages = v.iter().map(|s| s.parse::<PageSource>()).collect::<Result<_, _>>()?;
        }
        if let Some(v) = &self.modes {
            grid.modes = v.clone();
        }
        if let Some(s) = self.scripts {
            grid.scripts = s;
        }
        if let Some(ss) = &self.slow_start {
            grid.slow_start = ss.state()?;
        }
        if let Some(p) = &self.cached_urls {
            grid.cached_urls = read_url_list(p)?;
        }
        Ok(grid)
    }
}

/// One URL per line; blank lines and `#` comments are skipped.
pub fn read_url_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_owned).collect())
}
