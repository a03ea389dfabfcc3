//! Bloom-filter digest of the URLs a client already has cached.
//!
//! Bit positions are `h1 + i*h2 mod m` for `i` in `0..k`, with `h1` and
//! `h2` the XXH64 hashes of the URL bytes under seeds 0 and
//! `0x9E3779B97F4A7C15`. Wire format, all integers big-endian:
//!
//! ```text
//! u8  version (1)
//! u32 k
//! u64 m
//! [u8; ceil(m/8)] bits, bit i at byte i/8 under mask 0x80 >> (i % 8)
//! ```

use thiserror::Error;
use xxhash_rust::xxh64::xxh64;

pub const DIGEST_FORMAT_VERSION: u8 = 1;
const SEED_1: u64 = 0;
const SEED_2: u64 = 0x9E37_79B9_7F4A_7C15;
const HEADER_LEN: usize = 1 + 4 + 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DigestError {
    #[error("digest needs at least 8 bits, got {0}")]
    TooSmall(u64),
    #[error("digest needs at least one hash function")]
    NoHashes,
    #[error("unsupported digest version {0}")]
    Version(u8),
    #[error("digest is truncated: expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("bits beyond m are set")]
    Padding,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheDigest {
    bits: Vec<u8>,
    m: u64,
    k: u32,
    n: u64,
}

fn byte_len(m: u64) -> usize {
    m.div_ceil(8) as usize
}

impl CacheDigest {
    pub fn new(m: u64, k: u32) -> Result<Self, DigestError> {
        if m < 8 {
            return Err(DigestError::TooSmall(m));
        }
        if k == 0 {
            return Err(DigestError::NoHashes);
        }
        Ok(Self { bits: vec![0; byte_len(m)], m, k, n: 0 })
    }

    /// Sized for `n_expected` entries at false-positive rate `target_fpr`,
    /// with `m` raised to the 8-bit minimum when the formula gives less.
    pub fn for_capacity(n_expected: u64, target_fpr: f64) -> Result<Self, DigestError> {
        let (m, k) = recommended_digest_size(n_expected, target_fpr);
        Self::new(m.max(8), k)
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of inserts since construction. Not carried on the wire.
    pub fn inserted_count(&self) -> u64 {
        self.n
    }

    fn positions(&self, url: &str) -> impl Iterator<Item = u64> {
        let h1 = xxh64(url.as_bytes(), SEED_1);
        let h2 = xxh64(url.as_bytes(), SEED_2);
        let m = self.m;
        (0..self.k as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % m)
    }

    pub fn insert(&mut self, url: &str) {
        let pos: Vec<u64> = self.positions(url).collect();
        for p in pos {
            self.bits[(p / 8) as usize] |= 0x80 >> (p % 8);
        }
        self.n += 1;
    }

    pub fn contains(&self, url: &str) -> bool {
        self.positions(url).all(|p| self.bits[(p / 8) as usize] & (0x80 >> (p % 8)) != 0)
    }

    /// Fraction of bits set.
    pub fn fill_ratio(&self) -> f64 {
        let ones: u64 = self.bits.iter().map(|b| b.count_ones() as u64).sum();
        ones as f64 / self.m as f64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.bits.len());
        out.push(DIGEST_FORMAT_VERSION);
        out.extend_from_slice(&self.k.to_be_bytes());
        out.extend_from_slice(&self.m.to_be_bytes());
        out.extend_from_slice(&self.bits);
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, DigestError> {
        if data.len() < HEADER_LEN {
            return Err(DigestError::Length { expected: HEADER_LEN, actual: data.len() });
        }
        if data[0] != DIGEST_FORMAT_VERSION {
            return Err(DigestError::Version(data[0]));
        }
        let k = u32::from_be_bytes(data[1..5].try_into().expect("4 bytes"));
        let m = u64::from_be_bytes(data[5..13].try_into().expect("8 bytes"));
        let mut d = Self::new(m, k)?;
        let expected = HEADER_LEN + d.bits.len();
        if data.len() != expected {
            return Err(DigestError::Length { expected, actual: data.len() });
        }
        d.bits.copy_from_slice(&data[HEADER_LEN..]);
        let spare = (d.bits.len() as u64 * 8 - m) as u32;
        if spare > 0 && d.bits[d.bits.len() - 1] & ((1u8 << spare) - 1) != 0 {
            return Err(DigestError::Padding);
        }
        Ok(d)
    }
}

/// Optimal Bloom sizing: `m = ceil(-n ln p / ln(2)^2)`, `k = round(m/n ln 2)`
/// with `k` at least 1.
///
/// # Panics
/// If `n_expected` is zero or `target_fpr` is outside `(0, 1)`.
pub fn recommended_digest_size(n_expected: u64, target_fpr: f64) -> (u64, u32) {
    assert!(n_expected > 0, "n_expected must be positive");
    assert!(target_fpr > 0.0 && target_fpr < 1.0, "target_fpr must lie in (0, 1)");
    let n = n_expected as f64;
    let ln2 = std::f64::consts::LN_2;
    let m = (-n * target_fpr.ln() / (ln2 * ln2)).ceil().max(1.0);
    let k = ((m / n) * ln2).round().max(1.0);
    (m as u64, k as u32)
}
