//! Web pages as resource dependency trees.
//!
//! A page is a tree of typed, sized resources rooted at the main html
//! document. Each child records the byte offset within its parent at which
//! the parser encounters the reference, which is what the simulator uses to
//! decide when a dependency is discovered.
//!
//! Pages come from three places: the versioned page-description JSON
//! ([`from_page_json`] / [`to_page_json`]), HAR 1.2 traces carrying
//! browser initiator data ([`ingest_har`]), and the built-in fixtures in
//! [`fixtures`].

mod har;
mod json;
mod tree;

pub mod fixtures;

pub use har::{ingest_har, kind_from_mime, HarIngest};
pub use json::{from_page_json, to_page_json, PAGE_FORMAT_VERSION};
pub use tree::{validate, DependencyTree, Resource, ResourceId, ResourceKind, Violation};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PageError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid page: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("no root: HAR contains no document entry")]
    NoRoot,
}
