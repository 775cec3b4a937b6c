//! Named, seed-derived random number substreams.
//!
//! Every stochastic stage draws from a stream derived from the top-level
//! seed, a stage name (for example `fit.chain` or `gen.replicate`) and an
//! index, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn substream(seed: u64, name: &str, index: u64) -> StreamRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

pub const FIT_CHAIN: &str = "fit.chain";
pub const GEN_REPLICATE: &str = "gen.replicate";
pub const SIMULATE: &str = "simulate";
