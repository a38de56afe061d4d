//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the user seed and selected
//! by a `(domain, a, b)` triple, so the numbers drawn for one unit of work
//! (a model/image pair, a split group, ...) never depend on scheduling or on
//! how many other units exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const DOMAIN_SIMULATE: u64 = 1;
pub(crate) const DOMAIN_SPLIT: u64 = 2;
pub(crate) const DOMAIN_AUGMENT: u64 = 3;
pub(crate) const DOMAIN_SYNTH: u64 = 4;

pub(crate) fn stream(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    // splitmix64 is a bijection, so distinct (seed, domain, a) give distinct keys.
    let words = [
        splitmix64(seed),
        splitmix64(seed ^ splitmix64(domain)),
        splitmix64(a ^ splitmix64(seed.rotate_left(17))),
        splitmix64(domain ^ splitmix64(!seed)),
    ];
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(b);
    rng
}
