//! Seed derivation and counter-based pseudo-random streams.
//!
//! Every random decision in the crate is drawn from a [`Stream`] keyed by a
//! tuple of integers. Keys are folded with the SplitMix64 finalizer, and the
//! resulting 64-bit value seeds a ChaCha8 generator, which is itself a
//! counter-mode cipher: the n-th draw of a stream depends only on the key and
//! n, never on any other stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Domain-separation tags so that, e.g., visual seed 5 and dynamics seed 5
/// never share a stream.
pub mod tag {
    pub const RESET: u64 = 0x5245_5345_5400_0001;
    pub const VISUAL: u64 = 0x5649_5355_414c_0002;
    pub const FEW_SHOT: u64 = 0x4645_5753_484f_0003;
    pub const AUGMENT: u64 = 0x4155_474d_4e54_0004;
    pub const MIX: u64 = 0x4d49_5842_4154_0005;
    pub const TRAIN: u64 = 0x5452_4149_4e00_0006;
    pub const INIT: u64 = 0x494e_4954_0000_0007;
    pub const EVAL: u64 = 0x4556_414c_0000_0008;
    pub const TEXTURE: u64 = 0x5445_5854_0000_0009;
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds an ordered key tuple into one 64-bit seed.
pub fn mix_key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Opens the stream addressed by `parts`.
pub fn stream(parts: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(mix_key(parts))
}
