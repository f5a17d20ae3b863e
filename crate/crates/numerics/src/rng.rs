//! Deterministic, splittable random streams.
//!
//! A stream is addressed by a master seed plus a path of integers (for
//! example `[sample_id, k]`). ChaCha is counter-based, so two different paths
//! yield independent sequences and no stream depends on how many values any
//! other stream has consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The RNG stream at `path` under `master`.
pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    let mut key = splitmix64(master);
    let mut sub = splitmix64(key ^ 0x5851_F42D_4C95_7F2D);
    for &p in path {
        key = splitmix64(key ^ splitmix64(p));
        sub = splitmix64(sub.rotate_left(17) ^ p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(sub);
    rng
}

/// Stable 64-bit tag for a string, for naming stream domains.
pub fn tag(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
