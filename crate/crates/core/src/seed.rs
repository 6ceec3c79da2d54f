//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a master seed and a path of
//! labels. The key is the SHA-256 digest of a domain tag, the master seed and
//! the length-prefixed, type-tagged labels, so distinct label paths cannot
//! collide by concatenation and the order of labels matters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Random stream used throughout the crate.
pub type Stream = ChaCha8Rng;

const DOMAIN_TAG: &[u8] = b"heavy-markov-lab/seed/v1";

/// One component of a seed path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedLabel<'a> {
    Str(&'a str),
    Int(u64),
}

impl<'a> From<&'a str> for SeedLabel<'a> {
    fn from(s: &'a str) -> Self {
        SeedLabel::Str(s)
    }
}

macro_rules! int_label {
    ($($t:ty),*) => {$(
        impl From<$t> for SeedLabel<'_> {
            fn from(v: $t) -> Self {
                SeedLabel::Int(v as u64)
            }
        }
    )*};
}
int_label!(u8, u16, u32, u64, usize);

/// Derive a 64-bit seed from `master` and a label path.
pub fn derive_seed<'a, I>(master: u64, labels: I) -> u64
where
    I: IntoIterator<Item = SeedLabel<'a>>,
{
    let mut h = Sha256::new();
    h.update((DOMAIN_TAG.len() as u64).to_le_bytes());
    h.update(DOMAIN_TAG);
    h.update(master.to_le_bytes());
    for label in labels {
        match label {
            SeedLabel::Str(s) => {
                h.update([b's']);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            SeedLabel::Int(v) => {
                h.update([b'i']);
                h.update(8u64.to_le_bytes());
                h.update(v.to_le_bytes());
            }
        }
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Random stream for a label path.
pub fn stream<'a, I>(master: u64, labels: I) -> Stream
where
    I: IntoIterator<Item = SeedLabel<'a>>,
{
    Stream::seed_from_u64(derive_seed(master, labels))
}

/// SplitMix64 finalizer, used to key counter-based uniforms.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Map 64 random bits to a uniform in (0, 1].
#[inline]
pub fn unit_open_closed(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Child key for tree-structured randomness: cheap and order-sensitive.
#[inline]
pub fn child_key(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}
