//! Deterministic random substreams.
//!
//! Every unit of parallel work (a Monte Carlo draw, a replication, one
//! series inside a replication) gets its own generator keyed by the master
//! seed and its coordinates, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of coordinates into a single 64-bit key.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &c| mix(acc ^ mix(c)))
}

/// Generator for the substream at `path` below `master`.
pub fn substream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Domain tags so that different consumers of one master seed never share
/// a stream.
pub mod domain {
    pub const GAUSS_DRAW: u64 = 0x6761_7573;
    pub const REPLICATION: u64 = 0x7265_706c;
    pub const QUANTILE_SEED: u64 = 0x7174_626c;
}
