//! Deterministic seed tree.
//!
//! Every random quantity is drawn from a stream whose seed is derived from the
//! master seed and a path of `(tag, index)` pairs, so results never depend on
//! how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags; distinct tags keep sibling streams independent.
pub const TOPOLOGY: u64 = 0x746f_706f;
pub const DRAWS: u64 = 0x6472_6177;
pub const CHUNK: u64 = 0x6368_756e;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed of `parent` for stream `tag`, element `index`.
pub fn derive(parent: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(parent ^ splitmix(tag)).wrapping_add(index))
}

pub fn topology_seed(master: u64, topology: usize) -> u64 {
    derive(master, TOPOLOGY, topology as u64)
}

pub fn draw_seed(topology_seed: u64) -> u64 {
    derive(topology_seed, DRAWS, 0)
}

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
