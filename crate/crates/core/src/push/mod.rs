//! Push manifests and the cache digest used to keep cached resources out
//! of them.

mod digest;
mod manifest;

pub use digest::{recommended_digest_size, CacheDigest, DigestError, DIGEST_FORMAT_VERSION};
pub use manifest::{
    build_manifest, build_manifest_with, filter_manifest, naive_manifest, PushManifest, REFERENCE_LINK,
};
