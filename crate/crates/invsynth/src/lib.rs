//! File formats, ground-truth scenarios, benchmarking and the command line
//! on top of `invsynth-core`.

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod parallel;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};

/// Seed for the sub-task `label` of a run seeded with `seed` (SplitMix64 of
/// the seed mixed with an FNV-1a hash of the label).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = (seed ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
