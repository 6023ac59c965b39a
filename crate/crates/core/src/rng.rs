//! Reproducible random streams.
//!
//! Every random quantity is drawn from a generator seeded by [`derive_seed`] from a
//! master seed, a stream tag and an index, so results do not depend on execution
//! order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keeping independent uses of one master seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Replication = 1,
    Series = 2,
    Bootstrap = 3,
    Target = 4,
    Oracle = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(master, stream, index)` into a child seed.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(master ^ (stream as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
    splitmix64(a ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(master, stream, index))
}
