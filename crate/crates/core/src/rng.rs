//! Seeded random streams.
//!
//! Each consumer draws from its own ChaCha stream keyed by
//! `(master seed, purpose, index)`, so bases of different families, hash
//! vectors of different combinations and workload trials never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Basis = 1,
    HashVectors = 2,
    Workload = 3,
}

pub fn stream_rng(master: u64, purpose: Purpose, index: u64) -> StreamRng {
    let key = master ^ (purpose as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
