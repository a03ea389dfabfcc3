//! `pushsim` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors.
//! Log verbosity comes from `PUSHSIM_LOG` (e.g. `PUSHSIM_LOG=debug`).

mod config;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pushsim::bounds::{plt_lower_bound, spr_upper_bound_loose, spr_upper_bound_tight};
use pushsim::experiment::{
    read_csv, run_experiment, summarize, write_csv, ExperimentError, ModeName, PageSource, StatsSummary,
};
use pushsim::net::{
    CongestionState, LinkParams, DEFAULT_INIT_CWND_SEGMENTS, DEFAULT_MAX_CWND_BYTES, DEFAULT_MSS_BYTES,
};
use pushsim::page::DependencyTree;
use pushsim::push::{build_manifest, filter_manifest, recommended_digest_size, CacheDigest};
use pushsim::sim::{
    simulate, trace_discovery_schedule, write_timeline_jsonl, DiscoveryRule, Mode, ScriptExecution, SimConfig,
};

use config::{read_url_list, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "pushsim", version, about = "Simulate page loads with and without HTTP/2 server push")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load one page over one link and print the event timeline as JSON lines.
    Simulate(SimulateArgs),
    /// Print the load-time and push-saving bounds for one page and link.
    Bounds(BoundsArgs),
    /// Run a page x RTT x bandwidth x mode grid and write CSV.
    Sweep(SweepArgs),
    /// Reduce a sweep CSV to statistics JSON.
    Summarize(SummarizeArgs),
    /// Build or query a cache digest.
    #[command(subcommand)]
    Digest(DigestCommand),
    /// Emit whitespace-separated columns from a sweep CSV for gnuplot.
    PlotData(PlotDataArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Pull,
    Push,
    Optimal,
}

impl From<ModeArg> for ModeName {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pull => ModeName::Pull,
            ModeArg::Push => ModeName::Push,
            ModeArg::Optimal => ModeName::Optimal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScriptsArg {
    Speculative,
    Blocking,
}

impl From<ScriptsArg> for ScriptExecution {
    fn from(s: ScriptsArg) -> Self {
        match s {
            ScriptsArg::Speculative => ScriptExecution::Speculative,
            ScriptsArg::Blocking => ScriptExecution::Blocking,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    LeastMasked,
    First,
}

#[derive(Debug, Args)]
struct LinkArgs {
    #[arg(long, default_value_t = 100.0)]
    rtt_ms: f64,
    #[arg(long, default_value_t = 100.0)]
    bandwidth_mbps: f64,
}

impl LinkArgs {
    fn link(&self) -> Result<LinkParams, Failure> {
        LinkParams::from_ms_mbps(self.rtt_ms, self.bandwidth_mbps).map_err(|e| Failure::Usage(e.into()))
    }
}

#[derive(Debug, Args)]
struct SlowStartArgs {
    /// Model a cold congestion window.
    #[arg(long)]
    slow_start: bool,
    #[arg(long, default_value_t = DEFAULT_MSS_BYTES)]
    mss_bytes: u64,
    #[arg(long, default_value_t = DEFAULT_INIT_CWND_SEGMENTS)]
    init_cwnd: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_CWND_BYTES)]
    max_cwnd_bytes: u64,
}

impl SlowStartArgs {
    fn state(&self) -> Result<CongestionState, Failure> {
        CongestionState::new(self.slow_start, self.mss_bytes, self.init_cwnd, self.max_cwnd_bytes)
            .map_err(|e| Failure::Usage(e.into()))
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// fixture:NAME, synthetic:chain:H, synthetic:random:SEED, page.json or capture.har
    #[arg(long)]
    page: String,
    #[command(flatten)]
    link: LinkArgs,
    #[arg(long, value_enum, default_value = "pull")]
    mode: ModeArg,
    #[command(flatten)]
    slow_start: SlowStartArgs,
    #[arg(long, value_enum, default_value = "speculative")]
    scripts: ScriptsArg,
    /// File of URLs the client has cached; they are not pushed.
    #[arg(long)]
    cached_urls: Option<PathBuf>,
    /// Accepted for protocol compatibility; the simulation is deterministic
    /// so one run stands for all.
    #[arg(long, default_value_t = 1)]
    repetitions: u32,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    page: String,
    #[command(flatten)]
    link: LinkArgs,
    /// Which same-depth discovery stands for its level.
    #[arg(long, value_enum, default_value = "least-masked")]
    rule: RuleArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// TOML grid description; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    rtt_ms: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    bandwidth_mbps: Option<Vec<f64>>,
    /// Repeatable.
    #[arg(long)]
    page: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    mode: Option<Vec<ModeArg>>,
    #[arg(long)]
    slow_start: bool,
    #[arg(long, value_enum)]
    scripts: Option<ScriptsArg>,
    #[arg(long)]
    cached_urls: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<u32>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    /// Sweep CSV, or `-` for stdin.
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum DigestCommand {
    /// Insert every URL of a list into a new digest.
    Build {
        #[arg(long)]
        urls: PathBuf,
        /// Target false-positive rate used to size the digest.
        #[arg(long, default_value_t = 0.01)]
        fpr: f64,
        /// Explicit bit count, overriding the sizing from --fpr.
        #[arg(long, requires = "hashes")]
        bits: Option<u64>,
        #[arg(long, requires = "bits")]
        hashes: Option<u32>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Report whether each URL is (probably) in the digest.
    Query {
        #[arg(long)]
        digest: PathBuf,
        #[arg(required = true)]
        urls: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlotKind {
    /// PLT ECDF per bandwidth, RTT and mode.
    Ecdf,
    /// SPR quartiles against RTT per bandwidth.
    SprRtt,
    /// SPR against tree height.
    Height,
}

#[derive(Debug, Args)]
struct PlotDataArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    what: PlotKind,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

trait DataContext<T> {
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> DataContext<T> for Result<T, E> {
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}

fn experiment_failure(e: ExperimentError) -> Failure {
    match e {
        ExperimentError::EmptyGrid(_)
        | ExperimentError::UnknownMode(_)
        | ExperimentError::BadSource(..)
        | ExperimentError::BadLink { .. } => Failure::Usage(e.into()),
        other => Failure::Data(other.into()),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display())).data()?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_input(path: &Path) -> Result<Box<dyn Read>, Failure> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin().lock()));
    }
    Ok(Box::new(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display())).data()?)))
}

fn load_page(source: &str) -> Result<DependencyTree, Failure> {
    let src: PageSource = source.parse().map_err(|e: ExperimentError| Failure::Usage(e.into()))?;
    src.load().map_err(|e| Failure::Data(anyhow!("{source}: {e}")))
}

fn note_repetitions(n: u32) {
    if n > 1 {
        log::info!("{n} repetitions requested; the simulation is deterministic, so a single run is reported");
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    note_repetitions(a.repetitions);
    let page = load_page(&a.page)?;
    let link = a.link.link()?;
    let mode = match a.mode {
        ModeArg::Pull => Mode::Pull,
        ModeArg::Optimal => Mode::Optimal,
        ModeArg::Push => {
            let manifest = build_manifest(&page);
            match &a.cached_urls {
                None => Mode::Push { manifest, pull_fallback: false },
                Some(p) => {
                    let digest = digest_from_urls(&read_url_list(p).data()?, 0.01)?;
                    Mode::Push { manifest: filter_manifest(&manifest, &page, &digest), pull_fallback: true }
                }
            }
        }
    };
    let cfg = SimConfig { mode, link, congestion: a.slow_start.state()?, scripts: a.scripts.into() };
    let result = simulate(&page, &cfg).data()?;
    let mut out = open_output(a.output.as_deref())?;
    write_timeline_jsonl(&mut out, &result.events).data()?;
    out.flush().data()?;
    eprintln!(
        "page={} mode={} plt_s={:.9} bubble_total_s={:.9} bytes={}",
        page.name(),
        cfg.mode.name(),
        result.plt_s,
        result.bubble_total_s,
        result.bytes_transferred
    );
    Ok(())
}

fn cmd_bounds(a: BoundsArgs) -> Result<(), Failure> {
    let page = load_page(&a.page)?;
    let link = a.link.link()?;
    let pull = simulate(&page, &SimConfig::pull(link)).data()?;
    let push = simulate(&page, &SimConfig::push(link, build_manifest(&page))).data()?;
    let rule = match a.rule {
        RuleArg::LeastMasked => DiscoveryRule::LeastMasked,
        RuleArg::First => DiscoveryRule::First,
    };
    let schedule = trace_discovery_schedule(&pull, &page).with_rule(rule);
    let tight = spr_upper_bound_tight(&page, &link, &schedule).data()?;

    let mut out = open_output(None)?;
    let w = &mut out;
    let mut line = |k: &str, v: String| writeln!(w, "{k:<22}{v}");
    line("page", format!("{} ({})", page.name(), a.page)).data()?;
    line("rtt_ms", a.link.rtt_ms.to_string()).data()?;
    line("bandwidth_mbps", a.link.bandwidth_mbps.to_string()).data()?;
    line("height", page.height().to_string()).data()?;
    line("psize_bytes", page.total_bytes().to_string()).data()?;
    line("plt_lower_bound_s", format!("{:.9}", plt_lower_bound(&page, &link))).data()?;
    line("pull_plt_s", format!("{:.9}", pull.plt_s)).data()?;
    line("push_plt_s", format!("{:.9}", push.plt_s)).data()?;
    line("spr_s", format!("{:.9}", pull.plt_s - push.plt_s)).data()?;
    line("spr_bound_loose_s", format!("{:.9}", spr_upper_bound_loose(&page, &link))).data()?;
    line("spr_bound_tight_s", format!("{:.9}", tight.total_s)).data()?;
    writeln!(out).data()?;
    writeln!(out, "{:>5}  {:>12}  {:>12}", "depth", "rsize_bytes", "term_s").data()?;
    for t in &tight.per_depth_terms {
        writeln!(out, "{:>5}  {:>12}  {:>12.9}", t.depth, t.residual_bytes, t.term_s).data()?;
    }
    out.flush().data()
}

fn sweep_grid(a: &SweepArgs) -> Result<pushsim::experiment::ExperimentGrid, Failure> {
    let cfg = match &a.config {
        Some(p) => SweepConfig::load(p).map_err(Failure::Usage)?,
        None => SweepConfig { version: config::CONFIG_VERSION, ..SweepConfig::default() },
    };
    let mut grid = cfg.to_grid().map_err(Failure::Usage)?;
    note_repetitions(a.repetitions.or(cfg.repetitions).unwrap_or(1));
    if let Some(v) = &a.rtt_ms {
        grid.rtts_ms = v.clone();
    }
    if let Some(v) = &a.bandwidth_mbps {
        grid.bandwidths_mbps = v.clone();
    }
    if !a.page.is_empty() {
        grid.pages = a
            .page
            .iter()
            .map(|s| s.parse::<PageSource>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Usage(e.into()))?;
    }
    if let Some(m) = &a.mode {
        grid.modes = m.iter().map(|&m| m.into()).collect();
    }
    if a.slow_start {
        grid.slow_start = CongestionState::slow_start();
    }
    if let Some(s) = a.scripts {
        grid.scripts = s.into();
    }
    if let Some(p) = &a.cached_urls {
        grid.cached_urls = read_url_list(p).data()?;
    }
    Ok(grid)
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let grid = sweep_grid(&a)?;
    let rows = run_experiment(&grid).map_err(experiment_failure)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} rows carry an error", rows.len());
    }
    let mut out = open_output(a.output.as_deref())?;
    write_csv(&mut out, &rows).map_err(experiment_failure)?;
    out.flush().data()
}

fn read_summary(input: &Path) -> Result<StatsSummary, Failure> {
    let rows = read_csv(open_input(input)?).map_err(experiment_failure)?;
    summarize(&rows).map_err(|e| Failure::Data(e.into()))
}

fn cmd_summarize(a: SummarizeArgs) -> Result<(), Failure> {
    let summary = read_summary(&a.input)?;
    let mut out = open_output(a.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &summary).data()?;
    writeln!(out).data()?;
    out.flush().data()
}

fn digest_from_urls(urls: &[String], fpr: f64) -> Result<CacheDigest, Failure> {
    if !(fpr > 0.0 && fpr < 1.0) {
        return Err(Failure::Usage(anyhow!("--fpr must lie in (0, 1), got {fpr}")));
    }
    let mut d = CacheDigest::for_capacity(urls.len().max(1) as u64, fpr).data()?;
    for u in urls {
        d.insert(u);
    }
    Ok(d)
}

fn cmd_digest(c: DigestCommand) -> Result<(), Failure> {
    match c {
        DigestCommand::Build { urls, fpr, bits, hashes, output } => {
            let list = read_url_list(&urls).data()?;
            let d = match (bits, hashes) {
                (Some(m), Some(k)) => {
                    let mut d = CacheDigest::new(m, k).map_err(|e| Failure::Usage(e.into()))?;
                    for u in &list {
                        d.insert(u);
                    }
                    d
                }
                _ => digest_from_urls(&list, fpr)?,
            };
            std::fs::write(&output, d.to_bytes()).with_context(|| format!("writing {}", output.display())).data()?;
            if bits.is_none() {
                let (m, k) = recommended_digest_size(list.len().max(1) as u64, fpr);
                log::debug!("sized for {} urls at fpr {fpr}: m={m} k={k}", list.len());
            }
            eprintln!("m={} k={} n={}", d.m(), d.k(), d.inserted_count());
            Ok(())
        }
        DigestCommand::Query { digest, urls } => {
            let bytes = std::fs::read(&digest).with_context(|| format!("reading {}", digest.display())).data()?;
            let d = CacheDigest::from_bytes(&bytes).with_context(|| digest.display().to_string()).data()?;
            let mut out = open_output(None)?;
            for u in urls {
                writeln!(out, "{}\t{u}", if d.contains(&u) { "present" } else { "absent" }).data()?;
            }
            out.flush().data()
        }
    }
}

fn cmd_plot_data(a: PlotDataArgs) -> Result<(), Failure> {
    let s = read_summary(&a.input)?;
    let mut out = open_output(None)?;
    match a.what {
        PlotKind::Ecdf => {
            for e in &s.plt_ecdfs {
                writeln!(out, "# bandwidth_mbps={} rtt_ms={} mode={}", e.bandwidth_mbps, e.rtt_ms, e.mode).data()?;
                writeln!(out, "# plt_s fraction").data()?;
                for (x, f) in &e.plt_s.steps {
                    writeln!(out, "{x:.9} {f:.6}").data()?;
                }
                writeln!(out, "\n").data()?;
            }
        }
        PlotKind::SprRtt => {
            let mut last_bw = None;
            for q in &s.spr_quartiles {
                if last_bw != Some(q.bandwidth_mbps) {
                    if last_bw.is_some() {
                        writeln!(out, "\n").data()?;
                    }
                    writeln!(out, "# bandwidth_mbps={}", q.bandwidth_mbps).data()?;
                    writeln!(out, "# rtt_ms q25_ms median_ms q75_ms count").data()?;
                    last_bw = Some(q.bandwidth_mbps);
                }
                writeln!(
                    out,
                    "{} {:.6} {:.6} {:.6} {}",
                    q.rtt_ms, q.spr_ms.q25, q.spr_ms.median, q.spr_ms.q75, q.count
                )
                .data()?;
            }
        }
        PlotKind::Height => {
            writeln!(out, "# height mean_ms q25_ms median_ms q75_ms count").data()?;
            for h in &s.spr_by_height {
                writeln!(
                    out,
                    "{} {:.6} {:.6} {:.6} {:.6} {}",
                    h.height, h.mean_spr_ms, h.spr_ms.q25, h.spr_ms.median, h.spr_ms.q75, h.count
                )
                .data()?;
            }
        }
    }
    out.flush().data()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PUSHSIM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Digest(c) => cmd_digest(c),
        Command::PlotData(a) => cmd_plot_data(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
