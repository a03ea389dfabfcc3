use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PageError;

/// Identifier of a resource, unique within one page.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(String);

impl ResourceId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ResourceId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for ResourceId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Html,
    Css,
    Script,
    Image,
    Font,
    Other,
}

impl ResourceKind {
    /// Kinds the browser parses and that can therefore reference other resources.
    pub fn is_parser(self) -> bool {
        matches!(self, ResourceKind::Html | ResourceKind::Css | ResourceKind::Script)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Html => "html",
            ResourceKind::Css => "css",
            ResourceKind::Script => "script",
            ResourceKind::Image => "image",
            ResourceKind::Font => "font",
            ResourceKind::Other => "other",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One fetchable object of a page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resource {
    pub id: ResourceId,
    pub url: String,
    pub kind: ResourceKind,
    pub size_bytes: u64,
    /// `None` only for the root document.
    pub parent: Option<ResourceId>,
    /// Number of parent bytes that must be received before the reference
    /// to this resource is seen.
    pub discovery_offset_bytes: u64,
    /// Only meaningful for scripts.
    pub script_async: bool,
}

impl Resource {
    pub fn new(id: impl Into<ResourceId>, kind: ResourceKind, size_bytes: u64) -> Self {
        let id = id.into();
        Self {
            url: id.as_str().to_string(),
            id,
            kind,
            size_bytes,
            parent: None,
            discovery_offset_bytes: 0,
            script_async: false,
        }
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.url = url.into();
        self
    }

    pub fn child_of(mut self, parent: impl Into<ResourceId>, offset: u64) -> Self {
        self.parent = Some(parent.into());
        self.discovery_offset_bytes = offset;
        self
    }

    pub fn with_async(mut self, script_async: bool) -> Self {
        self.script_async = script_async;
        self
    }

    /// Non-async scripts can hold up parsing of the document that references them.
    pub fn is_blocking_script(&self) -> bool {
        self.kind == ResourceKind::Script && !self.script_async
    }
}

/// A structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    DuplicateId(ResourceId),
    NoRoot,
    MultipleRoots(Vec<ResourceId>),
    RootNotHtml { root: ResourceId, kind: ResourceKind },
    UnknownParent { id: ResourceId, parent: ResourceId },
    Cycle(Vec<ResourceId>),
    NonParserParent { parent: ResourceId, kind: ResourceKind },
    OffsetBeyondParent { id: ResourceId, offset: u64, parent_size: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "page has no resources"),
            Violation::DuplicateId(id) => write!(f, "duplicate resource id `{id}`"),
            Violation::NoRoot => write!(f, "no root: every resource has a parent"),
            Violation::MultipleRoots(ids) => {
                write!(f, "multiple roots: {}", join_ids(ids))
            }
            Violation::RootNotHtml { root, kind } => {
                write!(f, "root `{root}` must be html, found {kind}")
            }
            Violation::UnknownParent { id, parent } => {
                write!(f, "resource `{id}` names unknown parent `{parent}`")
            }
            Violation::Cycle(ids) => write!(f, "cycle through {}", join_ids(ids)),
            Violation::NonParserParent { parent, kind } => {
                write!(f, "non-parser resource has children: `{parent}` is {kind}")
            }
            Violation::OffsetBeyondParent { id, offset, parent_size } => {
                write!(f, "discovery offset {offset} of `{id}` exceeds parent size {parent_size}")
            }
        }
    }
}

fn join_ids(ids: &[ResourceId]) -> String {
    ids.iter().map(|id| format!("`{id}`")).collect::<Vec<_>>().join(", ")
}

/// Checks every structural invariant of a page and returns all violations found.
pub fn validate(resources: &[Resource]) -> Vec<Violation> {
    let mut out = Vec::new();
    if resources.is_empty() {
        out.push(Violation::Empty);
        return out;
    }

    let mut index: HashMap<&ResourceId, usize> = HashMap::new();
    for (i, r) in resources.iter().enumerate() {
        if index.insert(&r.id, i).is_some() {
            out.push(Violation::DuplicateId(r.id.clone()));
        }
    }

    let roots: Vec<&Resource> = resources.iter().filter(|r| r.parent.is_none()).collect();
    match roots.as_slice() {
        [] => out.push(Violation::NoRoot),
        [root] => {
            if root.kind != ResourceKind::Html {
                out.push(Violation::RootNotHtml { root: root.id.clone(), kind: root.kind });
            }
        }
        many => out.push(Violation::MultipleRoots(many.iter().map(|r| r.id.clone()).collect())),
    }

    let mut bad_parents = HashSet::new();
    for r in resources {
        let Some(pid) = &r.parent else { continue };
        match index.get(pid) {
            None => out.push(Violation::UnknownParent { id: r.id.clone(), parent: pid.clone() }),
            Some(&p) => {
                let parent = &resources[p];
                if !parent.kind.is_parser() && bad_parents.insert(p) {
                    out.push(Violation::NonParserParent { parent: parent.id.clone(), kind: parent.kind });
                }
                if r.discovery_offset_bytes > parent.size_bytes {
                    out.push(Violation::OffsetBeyondParent {
                        id: r.id.clone(),
                        offset: r.discovery_offset_bytes,
                        parent_size: parent.size_bytes,
                    });
                }
            }
        }
    }

    // Walk parent links; 0 = unvisited, 1 = on current path, 2 = done.
    let mut state = vec![0u8; resources.len()];
    for start in 0..resources.len() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state[i] {
                2 => break,
                1 => {
                    let from = path.iter().position(|&p| p == i).unwrap_or(0);
                    out.push(Violation::Cycle(path[from..].iter().map(|&p: &usize| resources[p].id.clone()).collect()));
                    break;
                }
                _ => {
                    state[i] = 1;
                    path.push(i);
                    cur = resources[i].parent.as_ref().and_then(|p| index.get(p).copied());
                }
            }
        }
        for p in path {
            state[p] = 2;
        }
    }

    out
}

/// A validated page: resources linked into a single tree rooted at an html document.
#[derive(Debug, Clone)]
pub struct DependencyTree {
    name: String,
    resources: Vec<Resource>,
    root: usize,
    index: HashMap<ResourceId, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl PartialEq for DependencyTree {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.resources == other.resources
    }
}

impl DependencyTree {
    pub fn new(name: impl Into<String>, resources: Vec<Resource>) -> Result<Self, PageError> {
        let violations = validate(&resources);
        if !violations.is_empty() {
            return Err(PageError::Invalid(violations));
        }

        let index: HashMap<ResourceId, usize> = resources.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        let parent: Vec<Option<usize>> = resources.iter().map(|r| r.parent.as_ref().map(|p| index[p])).collect();
        let root = parent.iter().position(Option::is_none).expect("validated single root");

        let mut children = vec![Vec::new(); resources.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        // Parse order: by offset, declaration order breaks ties.
        for list in &mut children {
            list.sort_by_key(|&c| (resources[c].discovery_offset_bytes, c));
        }

        let mut depth = vec![0usize; resources.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            for &c in &children[i] {
                depth[c] = depth[i] + 1;
                stack.push(c);
            }
        }

        Ok(Self { name: name.into(), resources, root, index, parent, children, depth })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn resource(&self, idx: usize) -> &Resource {
        &self.resources[idx]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_resource(&self) -> &Resource {
        &self.resources[self.root]
    }

    pub fn index_of(&self, id: &ResourceId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &ResourceId) -> Option<&Resource> {
        self.index_of(id).map(|i| &self.resources[i])
    }

    pub fn parent_of(&self, idx: usize) -> Option<usize> {
        self.parent[idx]
    }

    /// Children of `idx` in the order a parser meets them.
    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn depth(&self, idx: usize) -> usize {
        self.depth[idx]
    }

    /// Longest root-to-leaf path in edges; 0 for a lone document.
    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Sum of all resource sizes, protocol overhead excluded.
    pub fn total_bytes(&self) -> u64 {
        self.resources.iter().map(|r| r.size_bytes).sum()
    }

    /// Bytes per tree depth, with an entry for every depth in `0..=height`.
    pub fn depth_bytes(&self) -> BTreeMap<usize, u64> {
        let mut out: BTreeMap<usize, u64> = (0..=self.height()).map(|d| (d, 0)).collect();
        for (i, r) in self.resources.iter().enumerate() {
            *out.entry(self.depth[i]).or_default() += r.size_bytes;
        }
        out
    }

    /// Resource indices in pre-order, children visited in parse order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend(self.children[i].iter().rev());
        }
        out
    }

    /// Always empty for a constructed tree; kept for symmetry with [`validate`].
    pub fn validate(&self) -> Vec<Violation> {
        validate(&self.resources)
    }
}
