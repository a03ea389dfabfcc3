use serde::{Deserialize, Serialize};

use super::CacheDigest;
use crate::net::LinkParams;
use crate::page::{DependencyTree, ResourceId, ResourceKind};
use crate::sim::{simulate, SimConfig};

/// Resources the server sends after the root, in send order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PushManifest(Vec<ResourceId>);

impl PushManifest {
    pub fn new(ids: Vec<ResourceId>) -> Self {
        Self(ids)
    }

    pub fn ids(&self) -> &[ResourceId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ResourceId> {
        self.0.iter()
    }

    pub fn contains(&self, id: &ResourceId) -> bool {
        self.0.contains(id)
    }
}

impl FromIterator<ResourceId> for PushManifest {
    fn from_iter<I: IntoIterator<Item = ResourceId>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Link used for the pull load that defines request order (100 ms, 100 Mbit/s).
pub const REFERENCE_LINK: (f64, f64) = (0.1, 100e6);

fn reference_link() -> LinkParams {
    LinkParams::new(REFERENCE_LINK.0, REFERENCE_LINK.1).expect("reference link is valid")
}

/// Non-root resources in the order a pull load over `link` requests them.
fn request_order(page: &DependencyTree, link: LinkParams) -> Vec<ResourceId> {
    match simulate(page, &SimConfig::pull(link)) {
        Ok(r) => r.discovery_order(),
        // Pull only fails for pages the tree validation already rejects;
        // fall back to tree order so the manifest stays complete.
        Err(_) => page.preorder().into_iter().skip(1).map(|i| page.resource(i).id.clone()).collect(),
    }
}

/// Stylesheets first, then everything else, each group in request order.
pub fn build_manifest(page: &DependencyTree) -> PushManifest {
    build_manifest_with(page, reference_link())
}

pub fn build_manifest_with(page: &DependencyTree, link: LinkParams) -> PushManifest {
    let order = request_order(page, link);
    let is_css = |id: &ResourceId| page.get(id).is_some_and(|r| r.kind == ResourceKind::Css);
    let (css, rest): (Vec<_>, Vec<_>) = order.into_iter().partition(is_css);
    css.into_iter().chain(rest).collect()
}

/// Request order without the stylesheet promotion.
pub fn naive_manifest(page: &DependencyTree) -> PushManifest {
    PushManifest(request_order(page, reference_link()))
}

/// Drops every entry whose URL the digest reports as cached.
pub fn filter_manifest(manifest: &PushManifest, page: &DependencyTree, digest: &CacheDigest) -> PushManifest {
    manifest
        .iter()
        .filter(|id| match page.get(id) {
            Some(r) => !digest.contains(&r.url),
            None => true,
        })
        .cloned()
        .collect()
}
