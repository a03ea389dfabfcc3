//! Acceptance gate: one line per criterion, non-zero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::link;
use pushsim::bounds::{plt_lower_bound, spr_upper_bound_loose, spr_upper_bound_tight};
use pushsim::experiment::{run_experiment, write_csv, ExperimentGrid};
use pushsim::net::{CongestionState, LinkParams};
use pushsim::page::{fixtures, DependencyTree};
use pushsim::push::{build_manifest, CacheDigest};
use pushsim::sim::{simulate, trace_discovery_schedule, DiscoveryRule, ScriptExecution, SimConfig};
use pushsim::stats::{mean, median, ols_fit};
use pushsim::synth::{chain_corpus, random_corpus, RandomPageParams};

const SLACK: f64 = 1e-6;

type Criterion = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn spr_of(page: &DependencyTree, l: LinkParams, cc: CongestionState) -> f64 {
    let pull = simulate(page, &SimConfig::pull(l).with_congestion(cc)).unwrap();
    let push = simulate(page, &SimConfig::push(l, build_manifest(page)).with_congestion(cc)).unwrap();
    pull.plt_s - push.plt_s
}

fn c1_fixture_spr() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut cells = Vec::new();
    for (name, page) in [("p0", fixtures::p0()), ("p1", fixtures::p1()), ("p2", fixtures::p2())] {
        for rtt_ms in [25.0, 50.0, 100.0, 250.0] {
            let s = spr_of(&page, link(rtt_ms, 100.0), CongestionState::disabled());
            let target = rtt_ms / 1e3 * page.height() as f64;
            let ok = if page.height() == 0 { s.abs() < 1e-6 } else { (s - target).abs() <= (0.15 * target).max(0.005) };
            pass &= ok;
            cells.push(format!("{name}@{rtt_ms}={:.3}ms", s * 1e3));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(1);
    Outcome { pass, detail: format!("{} in {:.0?}", cells.join(" "), elapsed) }
}

fn random_links(rng: &mut ChaCha8Rng) -> LinkParams {
    link(rng.gen_range(5.0..=250.0), rng.gen_range(8.0..=500.0))
}

fn c2_bounds() -> Outcome {
    let start = Instant::now();
    let pages = random_corpus(1200, 2024, &RandomPageParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut v_loose, mut v_tight, mut v_plt, mut v_first) = (0, 0, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    let mut heights = [0usize; 7];
    for page in &pages {
        heights[page.height()] += 1;
        let l = random_links(&mut rng);
        let pull = simulate(page, &SimConfig::pull(l)).unwrap();
        let push = simulate(page, &SimConfig::push(l, build_manifest(page))).unwrap();
        let optimal = simulate(page, &SimConfig::optimal(l)).unwrap();
        let spr = pull.plt_s - push.plt_s;
        let schedule = trace_discovery_schedule(&pull, page);
        let tight = spr_upper_bound_tight(page, &l, &schedule).unwrap().total_s;
        let first = spr_upper_bound_tight(page, &l, &schedule.clone().with_rule(DiscoveryRule::First)).unwrap().total_s;
        let lower = plt_lower_bound(page, &l);
        v_loose += usize::from(spr > spr_upper_bound_loose(page, &l) + SLACK);
        v_tight += usize::from(spr > tight + SLACK);
        v_first += usize::from(spr > first + SLACK);
        v_plt += [pull.plt_s, push.plt_s, optimal.plt_s].iter().filter(|&&p| p < lower - SLACK).count();
        worst = worst.max(spr - tight);
    }
    let elapsed = start.elapsed();
    let pass = v_loose == 0 && v_tight == 0 && v_plt == 0 && elapsed < Duration::from_secs(60);
    println!(
        "  info C2: heights 0..6 = {heights:?}; first-discovery rule would be violated on {v_first}/{} pages",
        pages.len()
    );
    Outcome {
        pass,
        detail: format!(
            "{} pages: over RTT*h {v_loose}, over tight bound {v_tight}, under PLT floor {v_plt}, max(spr - tight) {:.3e}s, {:.1?}",
            pages.len(),
            worst,
            elapsed
        ),
    }
}

fn blocking_info() {
    let pages = random_corpus(1200, 2024, &RandomPageParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut over = 0;
    for page in &pages {
        let l = random_links(&mut rng);
        let cfg = SimConfig::pull(l).with_scripts(ScriptExecution::Blocking);
        let pull = simulate(page, &cfg).unwrap();
        let push = simulate(page, &SimConfig { mode: SimConfig::push(l, build_manifest(page)).mode, ..cfg }).unwrap();
        over += usize::from(pull.plt_s - push.plt_s > spr_upper_bound_loose(page, &l) + SLACK);
    }
    println!("  info: with blocking scripts, SPR exceeds RTT*h on {over}/{} of the same pages", pages.len());
}

fn c3_linearity() -> Outcome {
    let rtts = [25.0, 50.0, 100.0, 150.0, 200.0, 250.0];
    let mut pass = true;
    let mut parts = Vec::new();
    for h in [1usize, 2, 3, 4] {
        let corpus = chain_corpus(50, h, 7 + h as u64);
        let mut pts = Vec::new();
        for page in &corpus {
            for &r in &rtts {
                pts.push((r, spr_of(page, link(r, 100.0), CongestionState::disabled()) * 1e3));
            }
        }
        let fit = ols_fit(&pts).unwrap();
        let ok = (fit.slope - h as f64).abs() <= 0.02 * h as f64 && fit.intercept.abs() <= 2.0;
        pass &= ok;
        parts.push(format!(
            "h={h}: slope {:.4} intercept {:.4}ms mad {:.2e}",
            fit.slope, fit.intercept, fit.residual_mad
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn median_spr(pages: &[DependencyTree], mbps: f64) -> f64 {
    let v: Vec<f64> = pages.iter().map(|p| spr_of(p, link(200.0, mbps), CongestionState::slow_start())).collect();
    median(&v).unwrap()
}

fn c4_bandwidth() -> Outcome {
    let chains: Vec<DependencyTree> = (1..=4).flat_map(|h| chain_corpus(50, h, 7 + h as u64)).collect();
    let (lo, hi) = (median_spr(&chains, 20.0), median_spr(&chains, 500.0));
    let change = (hi - lo).abs() / lo.abs().max(hi.abs());
    let mixed = random_corpus(300, 4048, &RandomPageParams { max_size_bytes: 300_000, ..RandomPageParams::default() });
    let (mlo, mhi) = (median_spr(&mixed, 20.0), median_spr(&mixed, 500.0));
    let mixed_change = (mhi - mlo).abs() / mlo.abs().max(mhi.abs());
    Outcome {
        pass: change < 0.20 && mixed_change < 0.20,
        detail: format!(
            "median SPR @20 vs @500 Mbps: chains {:.1} vs {:.1} ms ({:.2}%), mixed random {:.1} vs {:.1} ms ({:.2}%)",
            lo * 1e3,
            hi * 1e3,
            change * 100.0,
            mlo * 1e3,
            mhi * 1e3,
            mixed_change * 100.0
        ),
    }
}

fn c5_height() -> Outcome {
    let l = link(200.0, 100.0);
    let mut means = Vec::new();
    let mut pass = true;
    for h in 1..=3usize {
        let v: Vec<f64> =
            chain_corpus(50, h, 100 + h as u64).iter().map(|p| spr_of(p, l, CongestionState::disabled())).collect();
        let m = mean(&v).unwrap();
        pass &= (m - 0.2 * h as f64).abs() <= 0.1 * 0.2 * h as f64;
        means.push(m);
    }
    pass &= means.windows(2).all(|w| w[1] > w[0]);
    Outcome {
        pass,
        detail: format!(
            "mean SPR by height 1..3: {:?} ms",
            means.iter().map(|m| format!("{:.3}", m * 1e3)).collect::<Vec<_>>()
        ),
    }
}

fn c6_digest() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let url = |rng: &mut ChaCha8Rng, tag: &str| {
        format!("https://{tag}.test/{:016x}/{:08x}", rng.gen::<u64>(), rng.gen::<u32>())
    };
    // No false negatives: 10^5 insert/query pairs over digests of 1000.
    let mut fneg = 0;
    let mut d = CacheDigest::new(9586, 7).unwrap();
    for i in 0..100_000 {
        if i % 1000 == 0 {
            d = CacheDigest::new(9586, 7).unwrap();
        }
        let u = url(&mut rng, "in");
        d.insert(&u);
        fneg += usize::from(!d.contains(&u));
    }
    let mut d = CacheDigest::new(9586, 7).unwrap();
    let inserted: Vec<String> = (0..1000).map(|_| url(&mut rng, "in")).collect();
    for u in &inserted {
        d.insert(u);
    }
    fneg += inserted.iter().filter(|u| !d.contains(u)).count();
    let probes = 100_000;
    let fp = (0..probes).filter(|_| d.contains(&url(&mut rng, "out"))).count();
    let fpr = fp as f64 / probes as f64;
    let elapsed = start.elapsed();
    Outcome {
        pass: fneg == 0 && (0.005..=0.02).contains(&fpr) && elapsed < Duration::from_secs(10),
        detail: format!(
            "false negatives {fneg}, FPR {fpr:.4} (Bloom estimate {:.4}), {elapsed:.1?}",
            (1.0 - (-7.0f64 * 1000.0 / 9586.0).exp()).powi(7)
        ),
    }
}

fn c7_determinism() -> Outcome {
    let csv = || {
        let mut buf = Vec::new();
        write_csv(&mut buf, &run_experiment(&ExperimentGrid::default()).unwrap()).unwrap();
        buf
    };
    let (a, b) = (csv(), csv());
    Outcome {
        pass: a == b && !a.is_empty(),
        detail: format!("default grid CSV {} bytes, identical: {}", a.len(), a == b),
    }
}

fn c8_ordering() -> Outcome {
    let mut pages: Vec<DependencyTree> = vec![fixtures::p0(), fixtures::p1(), fixtures::p2()];
    pages.extend((1..=4).flat_map(|h| chain_corpus(5, h, h as u64)));
    pages.extend(random_corpus(300, 808, &RandomPageParams { max_size_bytes: 300_000, ..RandomPageParams::default() }));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut bad, mut runs) = (0, 0);
    for page in &pages {
        let l = random_links(&mut rng);
        for cc in [CongestionState::disabled(), CongestionState::slow_start()] {
            let plt = |c: SimConfig| simulate(page, &c.with_congestion(cc)).unwrap().plt_s;
            let (o, pu, pl) =
                (plt(SimConfig::optimal(l)), plt(SimConfig::push(l, build_manifest(page))), plt(SimConfig::pull(l)));
            bad += usize::from(!(o <= pu + SLACK && pu <= pl + SLACK));
            runs += 1;
        }
    }
    Outcome { pass: bad == 0, detail: format!("{runs} page/link/slow-start combinations, {bad} out of order") }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("C1", "fixture SPR tracks RTT*h", c1_fixture_spr),
        ("C2", "bounds hold on random pages", c2_bounds),
        ("C3", "SPR linear in RTT", c3_linearity),
        ("C4", "SPR insensitive to bandwidth", c4_bandwidth),
        ("C5", "SPR grows with tree height", c5_height),
        ("C6", "cache digest accuracy", c6_digest),
        ("C7", "sweep CSV is deterministic", c7_determinism),
        ("C8", "optimal <= push <= pull", c8_ordering),
    ];
    let mut failed = 0;
    for (id, what, check) in criteria {
        let o = check();
        println!("{id} {} {what}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    blocking_info();
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
