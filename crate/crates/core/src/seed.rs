//! Derivation of per-replication seeds.
//!
//! Replication `i` of a run with base seed `s` uses
//! `splitmix64(s + (i + 1) * 0x9E3779B97F4A7C15)` (wrapping arithmetic), the
//! `(i + 1)`-th output of a SplitMix64 generator started at `s`. Seeds depend
//! only on `(s, i)`, never on execution order.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `base`.
pub fn replication_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Base seed of an independent sub-experiment, e.g. the calibration runs.
pub fn domain_seed(base: u64, domain: &str) -> u64 {
    domain
        .bytes()
        .fold(splitmix64(base ^ 0x5EED), |acc, b| splitmix64(acc ^ u64::from(b)))
}
