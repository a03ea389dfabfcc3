//! Seeded synthetic pages: chains for the linearity experiments and random
//! trees for property and bound checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::page::{DependencyTree, Resource, ResourceKind};

/// Root document plus `sizes.len() - 1` nested stylesheet imports ending in
/// an image, each referenced at the very end of its parent.
///
/// # Panics
/// If `sizes` is empty.
pub fn chain_page(name: &str, sizes: &[u64]) -> DependencyTree {
    assert!(!sizes.is_empty(), "a chain needs at least the root");
    let h = sizes.len() - 1;
    let mut resources = vec![Resource::new("d0", ResourceKind::Html, sizes[0])];
    for d in 1..=h {
        let kind = if d == h { ResourceKind::Image } else { ResourceKind::Css };
        resources.push(Resource::new(format!("d{d}"), kind, sizes[d]).child_of(format!("d{}", d - 1), sizes[d - 1]));
    }
    DependencyTree::new(name, resources).expect("chain pages are valid")
}

/// `count` chains of height `height` with resources of 64 to 512 bytes.
pub fn chain_corpus(count: usize, height: usize, seed: u64) -> Vec<DependencyTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let sizes: Vec<u64> = (0..=height).map(|_| rng.gen_range(64..=512)).collect();
            chain_page(&format!("chain-h{height}-{i}"), &sizes)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomPageParams {
    pub max_height: usize,
    /// Resources beyond the chain that fixes the height.
    pub max_extra: usize,
    pub max_size_bytes: u64,
    pub async_probability: f64,
}

impl Default for RandomPageParams {
    fn default() -> Self {
        Self { max_height: 6, max_extra: 20, max_size_bytes: 1_000_000, async_probability: 0.3 }
    }
}

fn random_size(rng: &mut impl Rng, max: u64) -> u64 {
    match rng.gen_range(0..10) {
        0 => 0,
        1 => rng.gen_range(0..=max.min(256)),
        _ => {
            // Log-uniform so small and large objects are both common.
            let hi = (max.max(1) as f64).ln();
            rng.gen_range(0.0..=hi).exp().floor() as u64
        }
    }
}

fn random_offset(rng: &mut impl Rng, parent_size: u64) -> u64 {
    match rng.gen_range(0..6) {
        0 => 0,
        1 => parent_size,
        _ => rng.gen_range(0..=parent_size),
    }
}

/// A random valid tree. Its height is drawn uniformly from `0..=max_height`.
pub fn random_page(rng: &mut impl Rng, name: &str, params: &RandomPageParams) -> DependencyTree {
    const PARSERS: [ResourceKind; 3] = [ResourceKind::Html, ResourceKind::Css, ResourceKind::Script];
    const ALL: [ResourceKind; 6] = [
        ResourceKind::Html,
        ResourceKind::Css,
        ResourceKind::Script,
        ResourceKind::Image,
        ResourceKind::Font,
        ResourceKind::Other,
    ];
    let height = rng.gen_range(0..=params.max_height);
    let mut resources = vec![Resource::new("r0", ResourceKind::Html, random_size(rng, params.max_size_bytes))];
    let mut depth = vec![0usize];
    let mut parsers = vec![0usize];

    let add = |rng: &mut ChaCha8Rng,
               parent: usize,
               kind: ResourceKind,
               resources: &mut Vec<Resource>,
               depth: &mut Vec<usize>| {
        let idx = resources.len();
        let parent_size = resources[parent].size_bytes;
        let mut r = Resource::new(format!("r{idx}"), kind, random_size(rng, params.max_size_bytes))
            .child_of(resources[parent].id.clone(), random_offset(rng, parent_size));
        if kind == ResourceKind::Script {
            r = r.with_async(rng.gen_bool(params.async_probability));
        }
        resources.push(r);
        depth.push(depth[parent] + 1);
        idx
    };

    // The helper closure wants a concrete generator type.
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut tip = 0;
    for d in 1..=height {
        let kind = if d == height { *ALL.choose(&mut local).unwrap() } else { *PARSERS.choose(&mut local).unwrap() };
        tip = add(&mut local, tip, kind, &mut resources, &mut depth);
        if kind.is_parser() {
            parsers.push(tip);
        }
    }
    let extra = local.gen_range(0..=params.max_extra);
    for _ in 0..extra {
        let candidates: Vec<usize> = parsers.iter().copied().filter(|&p| depth[p] < height).collect();
        let Some(&parent) = candidates.choose(&mut local) else { break };
        let kind = if depth[parent] + 1 < height {
            *ALL.choose(&mut local).unwrap()
        } else {
            *ALL[3..].choose(&mut local).unwrap()
        };
        let idx = add(&mut local, parent, kind, &mut resources, &mut depth);
        if kind.is_parser() {
            parsers.push(idx);
        }
    }
    DependencyTree::new(name, resources).expect("generated pages are valid")
}

/// `count` random pages from a fixed seed.
pub fn random_corpus(count: usize, seed: u64, params: &RandomPageParams) -> Vec<DependencyTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| random_page(&mut rng, &format!("random-{seed}-{i}"), params)).collect()
}
