//! Grid sweeps over pages, links and load modes, their CSV form, and the
//! statistics derived from them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{spr_upper_bound_loose, spr_upper_bound_tight};
use crate::net::{CongestionState, LinkParams};
use crate::page::{fixtures, from_page_json, ingest_har, DependencyTree};
use crate::push::{build_manifest, filter_manifest, CacheDigest};
use crate::sim::{simulate, trace_discovery_schedule, Mode, ScriptExecution, SimConfig};
use crate::stats::{ecdf, mean, ols_fit, quantiles, Ecdf, Quartiles, RegressionFit, Sample, Unit};
use crate::synth::{random_page, RandomPageParams};

pub const CSV_COLUMNS: [&str; 12] = [
    "page",
    "name",
    "rtt_ms",
    "bandwidth_mbps",
    "mode",
    "plt_s",
    "spr_s",
    "bound_loose_s",
    "bound_tight_s",
    "height",
    "psize_bytes",
    "error",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("grid has no {0}")]
    EmptyGrid(&'static str),
    #[error("unknown mode `{0}` (expected pull, push or optimal)")]
    UnknownMode(String),
    #[error("bad page source `{0}`: {1}")]
    BadSource(String, String),
    #[error("invalid link {rtt_ms} ms / {bandwidth_mbps} Mbit/s")]
    BadLink { rtt_ms: f64, bandwidth_mbps: f64 },
    #[error("result table is empty")]
    EmptyTable,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Optimal,
    Pull,
    Push,
}

impl ModeName {
    pub const ALL: [ModeName; 3] = [ModeName::Pull, ModeName::Push, ModeName::Optimal];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeName::Pull => "pull",
            ModeName::Push => "push",
            ModeName::Optimal => "optimal",
        }
    }
}

impl fmt::Display for ModeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeName {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pull" => Ok(ModeName::Pull),
            "push" => Ok(ModeName::Push),
            "optimal" => Ok(ModeName::Optimal),
            other => Err(ExperimentError::UnknownMode(other.to_string())),
        }
    }
}

/// Where a page comes from. The textual forms are `fixture:NAME`,
/// `synthetic:chain:HEIGHT`, `synthetic:random:SEED`, or a path to a
/// page JSON file or a `.har` capture.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PageSource {
    Fixture(String),
    Chain(usize),
    Random(u64),
    Json(PathBuf),
    Har(PathBuf),
}

impl FromStr for PageSource {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| ExperimentError::BadSource(s.to_string(), why.to_string());
        if let Some(name) = s.strip_prefix("fixture:") {
            if fixtures::by_name(name).is_none() {
                return Err(bad("no such fixture"));
            }
            return Ok(PageSource::Fixture(name.to_string()));
        }
        if let Some(rest) = s.strip_prefix("synthetic:") {
            return match rest.split_once(':') {
                Some(("chain", h)) => h.parse().map(PageSource::Chain).map_err(|_| bad("height is not an integer")),
                Some(("random", seed)) => {
                    seed.parse().map(PageSource::Random).map_err(|_| bad("seed is not an integer"))
                }
                _ => Err(bad("expected synthetic:chain:H or synthetic:random:SEED")),
            };
        }
        if s.is_empty() {
            return Err(bad("empty"));
        }
        let path = PathBuf::from(s);
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("har")) {
            Ok(PageSource::Har(path))
        } else {
            Ok(PageSource::Json(path))
        }
    }
}

impl fmt::Display for PageSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PageSource::Fixture(n) => write!(f, "fixture:{n}"),
            PageSource::Chain(h) => write!(f, "synthetic:chain:{h}"),
            PageSource::Random(s) => write!(f, "synthetic:random:{s}"),
            PageSource::Json(p) | PageSource::Har(p) => write!(f, "{}", p.display()),
        }
    }
}

impl PageSource {
    /// Chain pages use 512-byte resources; random pages use the default
    /// generator parameters.
    pub fn load(&self) -> Result<DependencyTree, String> {
        match self {
            PageSource::Fixture(n) => fixtures::by_name(n).ok_or_else(|| format!("no fixture named `{n}`")),
            PageSource::Chain(h) => Ok(crate::synth::chain_page(&format!("chain-h{h}"), &vec![512; h + 1])),
            PageSource::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(random_page(&mut rng, &format!("random-{seed}"), &RandomPageParams::default()))
            }
            PageSource::Json(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                from_page_json(&text).map_err(|e| e.to_string())
            }
            PageSource::Har(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                let ingest = ingest_har(&text).map_err(|e| e.to_string())?;
                for w in &ingest.warnings {
                    log::warn!("{}: {w}", p.display());
                }
                Ok(ingest.tree)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub rtts_ms: Vec<f64>,
    pub bandwidths_mbps: Vec<f64>,
    pub pages: Vec<PageSource>,
    pub slow_start: CongestionState,
    pub modes: Vec<ModeName>,
    pub scripts: ScriptExecution,
    /// URLs the client already holds; they are left out of push manifests
    /// and fetched on demand if not cached after all.
    pub cached_urls: Vec<String>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            rtts_ms: vec![25.0, 50.0, 100.0, 200.0],
            bandwidths_mbps: vec![20.0, 100.0, 500.0],
            pages: fixtures::NAMES.iter().map(|n| PageSource::Fixture(n.to_string())).collect(),
            slow_start: CongestionState::disabled(),
            modes: ModeName::ALL.to_vec(),
            scripts: ScriptExecution::default(),
            cached_urls: Vec::new(),
        }
    }
}

impl ExperimentGrid {
    pub fn check(&self) -> Result<(), ExperimentError> {
        if self.rtts_ms.is_empty() {
            return Err(ExperimentError::EmptyGrid("rtts"));
        }
        if self.bandwidths_mbps.is_empty() {
            return Err(ExperimentError::EmptyGrid("bandwidths"));
        }
        if self.pages.is_empty() {
            return Err(ExperimentError::EmptyGrid("pages"));
        }
        if self.modes.is_empty() {
            return Err(ExperimentError::EmptyGrid("modes"));
        }
        for &r in &self.rtts_ms {
            for &b in &self.bandwidths_mbps {
                LinkParams::from_ms_mbps(r, b)
                    .map_err(|_| ExperimentError::BadLink { rtt_ms: r, bandwidth_mbps: b })?;
            }
        }
        Ok(())
    }
}

/// One CSV line. Per-cell quantities (SPR, bounds, height, size) repeat
/// on every mode row of the cell.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultRow {
    pub page: String,
    pub name: String,
    pub rtt_ms: Option<f64>,
    pub bandwidth_mbps: Option<f64>,
    pub mode: String,
    pub plt_s: Option<f64>,
    pub spr_s: Option<f64>,
    pub bound_loose_s: Option<f64>,
    pub bound_tight_s: Option<f64>,
    pub height: Option<usize>,
    pub psize_bytes: Option<u64>,
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(page: &str, error: String) -> Self {
        Self { page: page.to_string(), error: Some(error), ..Self::default() }
    }
}

struct Cell<'a> {
    source: String,
    page: &'a DependencyTree,
    rtt_ms: f64,
    bandwidth_mbps: f64,
}

fn evaluate_cell(cell: &Cell<'_>, grid: &ExperimentGrid, digest: Option<&CacheDigest>) -> Vec<ResultRow> {
    let link = LinkParams::from_ms_mbps(cell.rtt_ms, cell.bandwidth_mbps).expect("grid was checked");
    let page = cell.page;
    let base = SimConfig::pull(link).with_congestion(grid.slow_start).with_scripts(grid.scripts);
    let template = ResultRow {
        page: cell.source.clone(),
        name: page.name().to_string(),
        rtt_ms: Some(cell.rtt_ms),
        bandwidth_mbps: Some(cell.bandwidth_mbps),
        height: Some(page.height()),
        psize_bytes: Some(page.total_bytes()),
        bound_loose_s: Some(spr_upper_bound_loose(page, &link)),
        ..ResultRow::default()
    };

    let manifest = build_manifest(page);
    let (manifest, fallback) = match digest {
        Some(d) => (filter_manifest(&manifest, page, d), true),
        None => (manifest, false),
    };
    let pull = simulate(page, &base);
    let push = simulate(page, &SimConfig { mode: Mode::Push { manifest, pull_fallback: fallback }, ..base.clone() });
    let (pull, push) = match (pull, push) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return grid
                .modes
                .iter()
                .map(|m| ResultRow { mode: m.to_string(), error: Some(e.to_string()), ..template.clone() })
                .collect();
        }
    };
    let schedule = trace_discovery_schedule(&pull, page);
    let tight = spr_upper_bound_tight(page, &link, &schedule).map(|b| b.total_s);
    let template = ResultRow {
        spr_s: Some(pull.plt_s - push.plt_s),
        bound_tight_s: tight.as_ref().ok().copied(),
        error: tight.err().map(|e| e.to_string()),
        ..template
    };

    grid.modes
        .iter()
        .map(|m| {
            let plt = match m {
                ModeName::Pull => Ok(pull.plt_s),
                ModeName::Push => Ok(push.plt_s),
                ModeName::Optimal => {
                    simulate(page, &SimConfig { mode: Mode::Optimal, ..base.clone() }).map(|r| r.plt_s)
                }
            };
            match plt {
                Ok(p) => ResultRow { mode: m.to_string(), plt_s: Some(p), ..template.clone() },
                Err(e) => ResultRow { mode: m.to_string(), error: Some(e.to_string()), ..template.clone() },
            }
        })
        .collect()
}

/// Runs every (page, RTT, bandwidth, mode) combination. Cells run in
/// parallel; rows come back sorted by page source, RTT, bandwidth, mode.
pub fn run_experiment(grid: &ExperimentGrid) -> Result<Vec<ResultRow>, ExperimentError> {
    grid.check()?;
    let digest = if grid.cached_urls.is_empty() {
        None
    } else {
        let mut d = CacheDigest::for_capacity(grid.cached_urls.len() as u64, 0.01).expect("positive capacity");
        for u in &grid.cached_urls {
            d.insert(u);
        }
        Some(d)
    };

    let mut rows = Vec::new();
    let mut loaded = Vec::new();
    for src in &grid.pages {
        match src.load() {
            Ok(p) => loaded.push((src.to_string(), p)),
            Err(e) => {
                log::warn!("skipping {src}: {e}");
                rows.push(ResultRow::failed(&src.to_string(), e));
            }
        }
    }
    let cells: Vec<Cell<'_>> = loaded
        .iter()
        .flat_map(|(src, page)| {
            grid.rtts_ms.iter().flat_map(move |&r| {
                grid.bandwidths_mbps.iter().map(move |&b| Cell {
                    source: src.clone(),
                    page,
                    rtt_ms: r,
                    bandwidth_mbps: b,
                })
            })
        })
        .collect();
    let computed: Vec<Vec<ResultRow>> = cells.par_iter().map(|c| evaluate_cell(c, grid, digest.as_ref())).collect();
    rows.extend(computed.into_iter().flatten());
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    let key = |r: &ResultRow| (r.rtt_ms.unwrap_or(f64::NEG_INFINITY), r.bandwidth_mbps.unwrap_or(f64::NEG_INFINITY));
    rows.sort_by(|a, b| {
        a.page
            .cmp(&b.page)
            .then_with(|| key(a).0.total_cmp(&key(b).0))
            .then_with(|| key(a).1.total_cmp(&key(b).1))
            .then_with(|| a.mode.cmp(&b.mode))
    });
}

fn fmt_seconds(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) => {
            let s = format!("{x:.9}");
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_string()
            } else {
                s
            }
        }
    }
}

fn fmt_plain<T: fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Fixed column order, seconds with nine decimals.
pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.page.clone(),
            r.name.clone(),
            fmt_plain(r.rtt_ms),
            fmt_plain(r.bandwidth_mbps),
            r.mode.clone(),
            fmt_seconds(r.plt_s),
            fmt_seconds(r.spr_s),
            fmt_seconds(r.bound_loose_s),
            fmt_seconds(r.bound_tight_s),
            fmt_plain(r.height),
            fmt_plain(r.psize_bytes),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut rdr = csv::Reader::from_reader(input);
    let rows = rdr.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkQuartiles {
    pub bandwidth_mbps: f64,
    pub rtt_ms: f64,
    pub count: usize,
    pub spr_ms: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprRegression {
    /// `None` pools every bandwidth.
    pub bandwidth_mbps: Option<f64>,
    pub count: usize,
    /// SPR in ms against RTT in ms.
    pub fit: RegressionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PltEcdf {
    pub bandwidth_mbps: f64,
    pub rtt_ms: f64,
    pub mode: String,
    pub plt_s: Ecdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightGroup {
    pub height: usize,
    pub count: usize,
    pub mean_spr_ms: f64,
    pub spr_ms: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub spr_quartiles: Vec<LinkQuartiles>,
    pub regressions: Vec<SprRegression>,
    pub plt_ecdfs: Vec<PltEcdf>,
    pub spr_by_height: Vec<HeightGroup>,
}

/// Grouping key ordered by `total_cmp`.
#[derive(Debug, Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct CellSpr {
    bw: f64,
    rtt: f64,
    height: usize,
    spr_ms: f64,
}

/// One SPR per (page, RTT, bandwidth) cell, taken from its first row.
fn cell_sprs(rows: &[ResultRow]) -> Vec<CellSpr> {
    let mut seen = BTreeMap::new();
    for r in rows {
        let (Some(rtt), Some(bw), Some(spr), Some(h)) = (r.rtt_ms, r.bandwidth_mbps, r.spr_s, r.height) else {
            continue;
        };
        seen.entry((r.page.clone(), Key(rtt), Key(bw))).or_insert(CellSpr { bw, rtt, height: h, spr_ms: spr * 1e3 });
    }
    seen.into_values().collect()
}

/// Quartiles, regressions, ECDFs and height groups over the successful rows.
pub fn summarize(rows: &[ResultRow]) -> Result<StatsSummary, ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::EmptyTable);
    }
    let cells = cell_sprs(rows);
    let ms = |v: Vec<f64>| Sample::new(v, Unit::Milliseconds);

    let mut by_link: BTreeMap<(Key, Key), Vec<f64>> = BTreeMap::new();
    let mut by_bw: BTreeMap<Key, Vec<(f64, f64)>> = BTreeMap::new();
    let mut by_height: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for c in &cells {
        by_link.entry((Key(c.bw), Key(c.rtt))).or_default().push(c.spr_ms);
        by_bw.entry(Key(c.bw)).or_default().push((c.rtt, c.spr_ms));
        by_height.entry(c.height).or_default().push(c.spr_ms);
    }

    let spr_quartiles = by_link
        .into_iter()
        .filter_map(|((bw, rtt), v)| {
            let count = v.len();
            quantiles(&ms(v)).ok().map(|q| LinkQuartiles { bandwidth_mbps: bw.0, rtt_ms: rtt.0, count, spr_ms: q })
        })
        .collect();

    let mut regressions = Vec::new();
    let pooled: Vec<(f64, f64)> = cells.iter().map(|c| (c.rtt, c.spr_ms)).collect();
    if let Ok(fit) = ols_fit(&pooled) {
        regressions.push(SprRegression { bandwidth_mbps: None, count: pooled.len(), fit });
    }
    for (bw, pts) in by_bw {
        if let Ok(fit) = ols_fit(&pts) {
            regressions.push(SprRegression { bandwidth_mbps: Some(bw.0), count: pts.len(), fit });
        }
    }

    let mut plt: BTreeMap<(Key, Key, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let (Some(rtt), Some(bw), Some(p)) = (r.rtt_ms, r.bandwidth_mbps, r.plt_s) {
            plt.entry((Key(bw), Key(rtt), r.mode.clone())).or_default().push(p);
        }
    }
    let plt_ecdfs = plt
        .into_iter()
        .filter_map(|((bw, rtt, mode), v)| {
            ecdf(&Sample::seconds(v)).ok().map(|e| PltEcdf { bandwidth_mbps: bw.0, rtt_ms: rtt.0, mode, plt_s: e })
        })
        .collect();

    let spr_by_height = by_height
        .into_iter()
        .filter_map(|(height, v)| {
            let count = v.len();
            let m = mean(&v).ok()?;
            quantiles(&ms(v)).ok().map(|q| HeightGroup { height, count, mean_spr_ms: m, spr_ms: q })
        })
        .collect();

    Ok(StatsSummary { spr_quartiles, regressions, plt_ecdfs, spr_by_height })
}
