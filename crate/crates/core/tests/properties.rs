mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::link;
use pushsim::bounds::{plt_lower_bound, spr_upper_bound_loose, spr_upper_bound_tight};
use pushsim::net::CongestionState;
use pushsim::page::{DependencyTree, Resource, ResourceKind};
use pushsim::push::{build_manifest, filter_manifest, naive_manifest, CacheDigest, PushManifest};
use pushsim::sim::{
    read_timeline_jsonl, simulate, trace_discovery_schedule, write_timeline_jsonl, EventKind, ScriptExecution,
    SimConfig,
};
use pushsim::stats::{ecdf, ols_fit, quantiles, Sample};
use pushsim::synth::{random_page, RandomPageParams};

const SLACK: f64 = 1e-6;

fn pages_with(params: RandomPageParams) -> impl Strategy<Value = DependencyTree> {
    any::<u64>().prop_map(move |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_page(&mut rng, "p", &params)
    })
}

fn pages() -> impl Strategy<Value = DependencyTree> {
    pages_with(RandomPageParams::default())
}

/// Smaller pages for the slow-start runs, which step per segment.
fn small_pages() -> impl Strategy<Value = DependencyTree> {
    pages_with(RandomPageParams { max_extra: 8, max_size_bytes: 200_000, ..RandomPageParams::default() })
}

fn congestion() -> impl Strategy<Value = CongestionState> {
    prop_oneof![Just(CongestionState::disabled()), Just(CongestionState::slow_start())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn result_invariants(page in small_pages(), rtt in 5.0f64..250.0, mbps in 8.0f64..500.0, cc in congestion()) {
        let l = link(rtt, mbps);
        for cfg in [
            SimConfig::pull(l),
            SimConfig::push(l, build_manifest(&page)),
            SimConfig::optimal(l),
            SimConfig::pull(l).with_scripts(ScriptExecution::Blocking),
        ] {
            let cfg = cfg.with_congestion(cc);
            let r = simulate(&page, &cfg).unwrap();
            prop_assert_eq!(r.bytes_transferred, page.total_bytes());
            let last = r.events_of(EventKind::LastByte).map(|e| e.time_s).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(r.plt_s, last);
            let starts: Vec<f64> = r.events_of(EventKind::BubbleStart).map(|e| e.time_s).collect();
            let ends: Vec<f64> = r.events_of(EventKind::BubbleEnd).map(|e| e.time_s).collect();
            prop_assert_eq!(starts.len(), ends.len());
            let total: f64 = starts.iter().zip(&ends).map(|(s, e)| e - s).sum();
            prop_assert!((total - r.bubble_total_s).abs() < 1e-9);
            prop_assert!(r.plt_s >= plt_lower_bound(&page, &l) - SLACK);
            for w in r.events.windows(2) {
                prop_assert!(w[0].time_s <= w[1].time_s);
            }
            prop_assert_eq!(&simulate(&page, &cfg).unwrap(), &r);
        }
    }

    #[test]
    fn orderings(page in small_pages(), rtt in 5.0f64..250.0, mbps in 8.0f64..500.0, cc in congestion()) {
        let l = link(rtt, mbps);
        let pull = simulate(&page, &SimConfig::pull(l).with_congestion(cc)).unwrap();
        let push = simulate(&page, &SimConfig::push(l, build_manifest(&page)).with_congestion(cc)).unwrap();
        let optimal = simulate(&page, &SimConfig::optimal(l).with_congestion(cc)).unwrap();
        prop_assert!(optimal.plt_s <= push.plt_s + SLACK, "optimal {} push {}", optimal.plt_s, push.plt_s);
        prop_assert!(push.plt_s <= pull.plt_s + SLACK, "push {} pull {}", push.plt_s, pull.plt_s);
    }

    #[test]
    fn bounds_hold_without_slow_start(page in pages(), rtt in 5.0f64..250.0, mbps in 8.0f64..500.0) {
        let l = link(rtt, mbps);
        let pull = simulate(&page, &SimConfig::pull(l)).unwrap();
        let push = simulate(&page, &SimConfig::push(l, build_manifest(&page))).unwrap();
        let spr = pull.plt_s - push.plt_s;
        let loose = spr_upper_bound_loose(&page, &l);
        let tight = spr_upper_bound_tight(&page, &l, &trace_discovery_schedule(&pull, &page)).unwrap();
        prop_assert!(spr >= -SLACK);
        prop_assert!(spr <= loose + SLACK);
        prop_assert!(spr <= tight.total_s + SLACK, "spr {} tight {}", spr, tight.total_s);
        prop_assert!(tight.total_s >= 0.0 && tight.total_s <= loose + 1e-12);
        let sum: f64 = tight.per_depth_terms.iter().map(|t| t.term_s).sum();
        prop_assert!((sum - tight.total_s).abs() < 1e-15);
        for t in &tight.per_depth_terms {
            prop_assert!(t.term_s >= 0.0 && t.term_s <= l.rtt_s());
        }
        prop_assert!(spr <= pull.bubble_total_s + SLACK, "spr {} bubbles {}", spr, pull.bubble_total_s);
    }

    #[test]
    fn bounds_grow_with_rtt(page in pages(), rtt in 5.0f64..200.0, extra in 0.0f64..100.0, mbps in 8.0f64..500.0) {
        let (a, b) = (link(rtt, mbps), link(rtt + extra, mbps));
        prop_assert!(spr_upper_bound_loose(&page, &a) <= spr_upper_bound_loose(&page, &b));
        prop_assert!(plt_lower_bound(&page, &a) <= plt_lower_bound(&page, &b));
        let tight = |l| {
            let pull = simulate(&page, &SimConfig::pull(l)).unwrap();
            spr_upper_bound_tight(&page, &l, &trace_discovery_schedule(&pull, &page)).unwrap().total_s
        };
        prop_assert!(tight(a) <= tight(b) + 1e-12, "tight {} at {} ms vs {} at {} ms", tight(a), rtt, tight(b), rtt + extra);
    }

    #[test]
    fn async_never_hurts_on_a_path(sizes in proptest::collection::vec(0u64..300_000, 2..8), pick in any::<prop::sample::Index>(), rtt in 5.0f64..250.0, mbps in 8.0f64..500.0) {
        // A path page: one child per resource, one script somewhere on it.
        let s = 1 + pick.index(sizes.len() - 1);
        let mut rs = vec![Resource::new("n0", ResourceKind::Html, sizes[0])];
        for d in 1..sizes.len() {
            let kind = if d == s { ResourceKind::Script } else { ResourceKind::Css };
            rs.push(Resource::new(format!("n{d}"), kind, sizes[d]).child_of(format!("n{}", d - 1), sizes[d - 1] / 2));
        }
        let cfg = SimConfig::pull(link(rtt, mbps)).with_scripts(ScriptExecution::Blocking);
        let before = simulate(&DependencyTree::new("p", rs.clone()).unwrap(), &cfg).unwrap().plt_s;
        rs[s].script_async = true;
        let after = simulate(&DependencyTree::new("p", rs).unwrap(), &cfg).unwrap().plt_s;
        prop_assert!(after <= before + SLACK, "async {} blocking {}", after, before);
    }

    #[test]
    fn css_first_costs_nothing(page in pages(), rtt in 5.0f64..250.0, mbps in 8.0f64..500.0) {
        let l = link(rtt, mbps);
        let css = simulate(&page, &SimConfig::push(l, build_manifest(&page))).unwrap().plt_s;
        let naive = simulate(&page, &SimConfig::push(l, naive_manifest(&page))).unwrap().plt_s;
        prop_assert!(css <= naive + SLACK);
    }

    #[test]
    fn manifest_is_complete(page in pages()) {
        let m = build_manifest(&page);
        prop_assert_eq!(m.len(), page.len() - 1);
        let mut ids: Vec<_> = m.iter().cloned().collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), m.len());
        let css: Vec<bool> = m.iter().map(|id| page.get(id).unwrap().kind == ResourceKind::Css).collect();
        prop_assert!(css.windows(2).all(|w| w[0] || !w[1]));
    }

    #[test]
    fn filtering_is_a_subsequence(page in pages(), mask in proptest::collection::vec(any::<bool>(), 30)) {
        let m = build_manifest(&page);
        let mut d = CacheDigest::new(4096, 4).unwrap();
        let mut cached = Vec::new();
        for (i, r) in page.resources().iter().enumerate() {
            if mask[i % mask.len()] {
                d.insert(&r.url);
                cached.push(r.id.clone());
            }
        }
        let f = filter_manifest(&m, &page, &d);
        let mut it = m.iter();
        for id in f.iter() {
            prop_assert!(it.any(|x| x == id));
        }
        for id in &cached {
            prop_assert!(!f.contains(id));
        }
        // Whatever is filtered out gets fetched on discovery instead.
        let l = link(50.0, 100.0);
        let r = simulate(&page, &SimConfig::push_with_fallback(l, f)).unwrap();
        prop_assert_eq!(r.bytes_transferred, page.total_bytes());
    }

    #[test]
    fn digest_has_no_false_negatives(urls in proptest::collection::vec("[a-z0-9/:.]{1,40}", 1..200), m in 8u64..5000, k in 1u32..12) {
        let mut d = CacheDigest::new(m, k).unwrap();
        for u in &urls {
            d.insert(u);
        }
        for u in &urls {
            prop_assert!(d.contains(u));
        }
        let back = CacheDigest::from_bytes(&d.to_bytes()).unwrap();
        for u in &urls {
            prop_assert!(back.contains(u));
        }
    }

    #[test]
    fn ecdf_is_a_cdf(v in proptest::collection::vec(-1e6f64..1e6, 1..100), x in -2e6f64..2e6) {
        let e = ecdf(&Sample::seconds(v.clone())).unwrap();
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(e.steps.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(e.eval(min - 1.0), 0.0);
        prop_assert_eq!(e.eval(max), 1.0);
        let below = v.iter().filter(|&&y| y <= x).count() as f64 / v.len() as f64;
        prop_assert!((e.eval(x) - below).abs() < 1e-12);
    }

    #[test]
    fn quartiles_are_ordered(v in proptest::collection::vec(-1e6f64..1e6, 1..100)) {
        let q = quantiles(&Sample::seconds(v)).unwrap();
        prop_assert!(q.q25 <= q.median && q.median <= q.q75);
    }

    #[test]
    fn ols_matches_least_squares_solver(pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60), seed in any::<u64>()) {
        prop_assume!(pts.iter().any(|p| (p.0 - pts[0].0).abs() > 1e-3));
        let fit = ols_fit(&pts).unwrap();
        let a = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { pts[i].0 } else { 1.0 });
        let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
        let sol = a.svd(true, true).solve(&b, 1e-12).unwrap();
        prop_assert!((fit.slope - sol[0]).abs() < 1e-6 * (1.0 + sol[0].abs()));
        prop_assert!((fit.intercept - sol[1]).abs() < 1e-6 * (1.0 + sol[1].abs()));
        prop_assert!(fit.residual_mad >= 0.0);

        let resid: f64 = pts.iter().map(|p| p.1 - fit.predict(p.0)).sum();
        let scale: f64 = pts.iter().map(|p| p.1.abs()).sum();
        prop_assert!(resid.abs() < 1e-9 * scale.max(1.0));

        let mut shuffled = pts.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let again = ols_fit(&shuffled).unwrap();
        prop_assert!((again.slope - fit.slope).abs() < 1e-9 * (1.0 + fit.slope.abs()));
        prop_assert!((again.residual_mad - fit.residual_mad).abs() < 1e-9 * (1.0 + fit.residual_mad));
    }

    #[test]
    fn timeline_round_trips(page in pages()) {
        let r = simulate(&page, &SimConfig::pull(link(40.0, 50.0))).unwrap();
        let mut buf = Vec::new();
        write_timeline_jsonl(&mut buf, &r.events).unwrap();
        prop_assert_eq!(read_timeline_jsonl(buf.as_slice()).unwrap(), r.events);
    }
}

#[test]
fn noisy_line_fit() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<(f64, f64)> = (0..100)
        .map(|i| {
            let x = i as f64;
            (x, 3.0 * x + rng.gen_range(-1.0..=1.0))
        })
        .collect();
    let fit = ols_fit(&pts).unwrap();
    assert!((2.9..=3.1).contains(&fit.slope));
}

#[test]
fn empty_fallback_manifest_is_pull() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let page = random_page(&mut rng, "p", &RandomPageParams::default());
        let l = link(60.0, 30.0);
        let pull = simulate(&page, &SimConfig::pull(l)).unwrap();
        let fb = simulate(&page, &SimConfig::push_with_fallback(l, PushManifest::default())).unwrap();
        assert_eq!(pull.plt_s, fb.plt_s);
    }
}

#[test]
fn blocking_script_delays_discovery() {
    let page = DependencyTree::new(
        "b",
        vec![
            Resource::new("index.html", ResourceKind::Html, 2000),
            Resource::new("s.js", ResourceKind::Script, 50_000).child_of("index.html", 100),
            Resource::new("i.png", ResourceKind::Image, 100).child_of("index.html", 200),
        ],
    )
    .unwrap();
    let l = link(100.0, 10.0);
    let speculative = simulate(&page, &SimConfig::pull(l)).unwrap();
    let blocking = simulate(&page, &SimConfig::pull(l).with_scripts(ScriptExecution::Blocking)).unwrap();
    assert!(blocking.plt_s > speculative.plt_s);
    assert_eq!(blocking.events_of(EventKind::ParseBlocked).count(), 1);
    assert_eq!(blocking.events_of(EventKind::ParseResumed).count(), 1);
}

#[test]
fn async_can_lose_to_fifo_reordering() {
    // Off a path the claim fails: once the script stops blocking, a.png is
    // requested alongside it, wins the tie in the server queue, and the
    // script's own subtree starts one transfer time later.
    let build = |script_async: bool| {
        DependencyTree::new(
            "tie",
            vec![
                Resource::new("index.html", ResourceKind::Html, 0),
                Resource::new("s.js", ResourceKind::Script, 1000).child_of("index.html", 0).with_async(script_async),
                Resource::new("a.png", ResourceKind::Image, 1000).child_of("index.html", 0),
                Resource::new("c.css", ResourceKind::Css, 0).child_of("s.js", 0),
                Resource::new("d.png", ResourceKind::Image, 0).child_of("c.css", 0),
            ],
        )
        .unwrap()
    };
    let cfg = SimConfig::pull(link(100.0, 8.0)).with_scripts(ScriptExecution::Blocking);
    let blocking = simulate(&build(false), &cfg).unwrap().plt_s;
    let relaxed = simulate(&build(true), &cfg).unwrap().plt_s;
    assert!((blocking - 0.8).abs() < 1e-9);
    assert!((relaxed - 0.801).abs() < 1e-9);
}

#[test]
fn blocking_breaks_the_loose_bound() {
    // The image sits behind a blocking script: pull pays for the script and
    // then a round trip, push pays for neither.
    let page = DependencyTree::new(
        "late",
        vec![
            Resource::new("index.html", ResourceKind::Html, 1000),
            Resource::new("s.js", ResourceKind::Script, 100_000).child_of("index.html", 0),
            Resource::new("i.png", ResourceKind::Image, 1000).child_of("index.html", 1000),
        ],
    )
    .unwrap();
    let l = link(100.0, 100.0);
    let blocking = SimConfig::pull(l).with_scripts(ScriptExecution::Blocking);
    let pull = simulate(&page, &blocking).unwrap().plt_s;
    let push =
        simulate(&page, &SimConfig { mode: SimConfig::push(l, build_manifest(&page)).mode, ..blocking }).unwrap().plt_s;
    assert!(pull - push > spr_upper_bound_loose(&page, &l) + 0.05);
    let speculative = simulate(&page, &SimConfig::pull(l)).unwrap().plt_s;
    assert!(speculative - push <= spr_upper_bound_loose(&page, &l) + SLACK);
}
