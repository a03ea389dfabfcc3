//! HAR 1.2 ingestion.
//!
//! Chromium-family browsers annotate each entry with an `_initiator` object
//! naming the resource that caused the request. We use it to rebuild the
//! dependency tree. HAR carries no byte offsets, so every child is
//! discovered at offset 0 of its parent.

use std::collections::HashMap;

use serde::Deserialize;
use serde_json::Value;

use super::{DependencyTree, PageError, Resource, ResourceId, ResourceKind};

#[derive(Debug, Deserialize)]
struct HarFile {
    log: HarLog,
}

#[derive(Debug, Deserialize)]
struct HarLog {
    #[serde(default)]
    pages: Vec<HarPage>,
    entries: Vec<HarEntry>,
}

#[derive(Debug, Deserialize)]
struct HarPage {
    #[serde(default)]
    title: Option<String>,
}

#[derive(Debug, Deserialize)]
struct HarEntry {
    request: HarRequest,
    response: HarResponse,
    #[serde(default, rename = "_initiator")]
    initiator: Option<Value>,
    #[serde(default, rename = "_resourceType")]
    resource_type: Option<String>,
}

#[derive(Debug, Deserialize)]
struct HarRequest {
    url: String,
}

#[derive(Debug, Deserialize)]
struct HarResponse {
    #[serde(default, rename = "bodySize")]
    body_size: Option<i64>,
    #[serde(default)]
    content: Option<HarContent>,
}

#[derive(Debug, Deserialize)]
struct HarContent {
    #[serde(default)]
    size: Option<i64>,
    #[serde(default, rename = "mimeType")]
    mime_type: Option<String>,
}

/// A tree rebuilt from a HAR file plus the compromises made along the way.
#[derive(Debug, Clone)]
pub struct HarIngest {
    pub tree: DependencyTree,
    pub warnings: Vec<String>,
}

/// Maps a MIME type to a resource kind.
///
/// | MIME                                                    | kind   |
/// |---------------------------------------------------------|--------|
/// | `text/html`, `application/xhtml+xml`                    | html   |
/// | `text/css`                                              | css    |
/// | `*javascript*`, `*ecmascript*`                          | script |
/// | `image/*`                                               | image  |
/// | `font/*`, `application/font-*`, `application/x-font-*`, `application/vnd.ms-fontobject` | font |
/// | anything else                                           | other  |
pub fn kind_from_mime(mime: &str) -> ResourceKind {
    let essence = mime.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    match essence.as_str() {
        "text/html" | "application/xhtml+xml" => ResourceKind::Html,
        "text/css" => ResourceKind::Css,
        m if m.contains("javascript") || m.contains("ecmascript") => ResourceKind::Script,
        m if m.starts_with("image/") => ResourceKind::Image,
        m if m.starts_with("font/")
            || m.starts_with("application/font-")
            || m.starts_with("application/x-font-")
            || m == "application/vnd.ms-fontobject" =>
        {
            ResourceKind::Font
        }
        _ => ResourceKind::Other,
    }
}

fn initiator_url(init: &Value) -> Option<&str> {
    if let Some(url) = init.get("url").and_then(Value::as_str) {
        return Some(url);
    }
    // Script initiators carry a call stack; the innermost frame with a URL wins,
    // falling back to async parent stacks.
    let mut stack = init.get("stack");
    while let Some(s) = stack {
        if let Some(frames) = s.get("callFrames").and_then(Value::as_array) {
            if let Some(url) =
                frames.iter().filter_map(|f| f.get("url").and_then(Value::as_str)).find(|u| !u.is_empty())
            {
                return Some(url);
            }
        }
        stack = s.get("parent");
    }
    None
}

/// Rebuilds a page from a HAR 1.2 document.
///
/// The first document entry becomes the root. Each other entry hangs off
/// the most recent earlier entry whose URL matches its initiator; entries
/// whose initiator is missing, unresolvable, or not a parser attach to the
/// root and produce a warning.
pub fn ingest_har(text: &str) -> Result<HarIngest, PageError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let har: HarFile = serde_path_to_error::deserialize(de)
        .map_err(|e| PageError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
    let entries = har.log.entries;

    let kinds: Vec<ResourceKind> = entries
        .iter()
        .map(|e| {
            e.response
                .content
                .as_ref()
                .and_then(|c| c.mime_type.as_deref())
                .map(kind_from_mime)
                .unwrap_or(ResourceKind::Other)
        })
        .collect();
    let is_document = |i: usize| match entries[i].resource_type.as_deref() {
        Some(t) => t.eq_ignore_ascii_case("document"),
        None => kinds[i] == ResourceKind::Html,
    };
    let root = (0..entries.len()).find(|&i| is_document(i)).ok_or(PageError::NoRoot)?;

    let mut warnings = Vec::new();
    let ids: Vec<ResourceId> = (0..entries.len()).map(|i| ResourceId::new(format!("e{i}"))).collect();
    let mut by_url: HashMap<&str, usize> = HashMap::new();
    let mut resources = Vec::with_capacity(entries.len());

    // The root is emitted first so earlier entries can still attach to it.
    let order = std::iter::once(root).chain((0..entries.len()).filter(|&i| i != root));
    for i in order {
        let e = &entries[i];
        let size = match (e.response.body_size, e.response.content.as_ref().and_then(|c| c.size)) {
            (Some(b), _) if b >= 0 => b as u64,
            (_, Some(c)) if c >= 0 => c as u64,
            _ => {
                warnings.push(format!("{}: no body size, using 0", e.request.url));
                0
            }
        };
        let mut kind = kinds[i];
        if i == root {
            kind = ResourceKind::Html;
        }
        let mut res = Resource::new(ids[i].clone(), kind, size).with_url(e.request.url.clone());

        if i != root {
            let resolved = e.initiator.as_ref().and_then(initiator_url).and_then(|u| by_url.get(u).copied());
            let parent = match resolved {
                Some(p) if p == root || kinds[p].is_parser() => p,
                Some(p) => {
                    warnings.push(format!(
                        "{}: initiator {} is not a parser resource, attached to root",
                        e.request.url, entries[p].request.url
                    ));
                    root
                }
                None => {
                    warnings.push(format!("{}: unknown initiator, attached to root", e.request.url));
                    root
                }
            };
            res = res.child_of(ids[parent].clone(), 0);
        }
        resources.push(res);
        // Later duplicates shadow earlier ones: an initiator refers to the latest fetch.
        by_url.insert(e.request.url.as_str(), i);
    }

    let name = har.log.pages.first().and_then(|p| p.title.clone()).unwrap_or_else(|| entries[root].request.url.clone());
    let tree = DependencyTree::new(name, resources)?;
    Ok(HarIngest { tree, warnings })
}
