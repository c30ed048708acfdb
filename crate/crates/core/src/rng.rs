//! Seeded, counter-based random streams.
//!
//! Every stochastic operation draws from a ChaCha8 keystream keyed by
//! `(seed, domain)` and addressed by a 64-bit stream id (usually a row
//! index). Each `f64` draw consumes exactly one 64-bit block, so draw `d`
//! of row `i` always lands on the same keystream position regardless of
//! which thread generates which row.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the keystreams of operations that share a user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Loadings = 0x6c6f_6164,
    Generate = 0x6765_6e65,
    Corrupt = 0x636f_7272,
    PrevalenceMask = 0x7072_6576,
    Split = 0x7370_6c69,
    Init = 0x696e_6974,
    Train = 0x7472_6169,
    Threshold = 0x7468_7265,
    Bootstrap = 0x626f_6f74,
    Spectrum = 0x7370_6563,
    Oracle = 0x6f72_6163,
    Classifier = 0x636c_6173,
    Misc = 0x6d69_7363,
}

/// Returns the generator for stream `stream` of `(seed, domain)`.
pub fn stream(seed: u64, domain: Domain, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
