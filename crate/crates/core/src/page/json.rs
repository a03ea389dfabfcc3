use serde::{Deserialize, Serialize};

use super::{DependencyTree, PageError, Resource, ResourceId, ResourceKind};

pub const PAGE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct PageDocument {
    version: u32,
    name: String,
    resources: Vec<ResourceEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResourceEntry {
    id: String,
    url: String,
    kind: ResourceKind,
    size_bytes: u64,
    parent: Option<String>,
    #[serde(default)]
    discovery_offset_bytes: u64,
    #[serde(default, rename = "async")]
    script_async: bool,
}

/// Parses and validates a page-description document.
///
/// Schema errors name the JSON path of the offending field, e.g.
/// `resources[1].size_bytes`.
pub fn from_page_json(text: &str) -> Result<DependencyTree, PageError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: PageDocument = serde_path_to_error::deserialize(de)
        .map_err(|e| PageError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
    if doc.version != PAGE_FORMAT_VERSION {
        return Err(PageError::Parse {
            path: "version".into(),
            message: format!("unsupported version {}, expected {PAGE_FORMAT_VERSION}", doc.version),
        });
    }
    let resources = doc
        .resources
        .into_iter()
        .map(|e| Resource {
            id: ResourceId::new(e.id),
            url: e.url,
            kind: e.kind,
            size_bytes: e.size_bytes,
            parent: e.parent.map(ResourceId::new),
            discovery_offset_bytes: e.discovery_offset_bytes,
            script_async: e.script_async,
        })
        .collect();
    DependencyTree::new(doc.name, resources)
}

/// Serializes a page in the form [`from_page_json`] reads, resources in stored order.
pub fn to_page_json(tree: &DependencyTree) -> String {
    let doc = PageDocument {
        version: PAGE_FORMAT_VERSION,
        name: tree.name().to_string(),
        resources: tree
            .resources()
            .iter()
            .map(|r| ResourceEntry {
                id: r.id.as_str().to_string(),
                url: r.url.clone(),
                kind: r.kind,
                size_bytes: r.size_bytes,
                parent: r.parent.as_ref().map(|p| p.as_str().to_string()),
                discovery_offset_bytes: r.discovery_offset_bytes,
                script_async: r.script_async,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("page document serializes");
    s.push('\n');
    s
}
