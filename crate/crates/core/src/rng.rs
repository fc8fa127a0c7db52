//! Seeded randomness with documented substreams.
//!
//! Every stochastic component derives its generator from a single `u64` seed
//! through [`substream`]. The substream key is built from (seed, domain,
//! stream) so that per-column or per-trial work can be farmed out to workers
//! and still match a serial run bit-for-bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain separators for the crate's substream families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    PostedColumn = 1,
    InterestColumn = 2,
    PolarColumn = 3,
    SecretaryItem = 4,
    Learning = 5,
    Trial = 6,
    Family = 7,
}

/// Deterministic generator for stream `stream` of `domain` under `seed`.
///
/// The 32-byte ChaCha key is the little-endian concatenation of
/// `(seed, domain, stream, 0)`; distinct (domain, stream) pairs never share
/// a key, so substreams are independent regardless of evaluation order.
pub fn substream(seed: u64, domain: Domain, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
