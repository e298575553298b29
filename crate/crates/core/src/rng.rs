//! Seeded random streams.
//!
//! All randomness goes through ChaCha8, a counter-based generator whose
//! output is fixed by `(seed, stream, word position)` on every platform.
//! Independent work items (dataset samples, trajectories, epochs) draw from
//! their own stream so results do not depend on evaluation order.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

/// Stream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a label into a seed so unrelated consumers of the same run seed
/// (training, test-set generation, evaluation) never share streams.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded into the seed with a splitmix finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
