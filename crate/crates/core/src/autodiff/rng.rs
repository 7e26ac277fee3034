//! Counter-based randomness for dropout masks: the value at a position is a
//! pure function of `(key, counter)`, so masks do not depend on thread
//! scheduling or batching.

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-key, e.g. `derive(run_seed, step)`.
pub fn derive(key: u64, stream: u64) -> u64 {
    mix64(key ^ mix64(stream))
}

/// Uniform in `[0, 1)`.
pub fn uniform(key: u64, counter: u64) -> f64 {
    (derive(key, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// 64-bit FNV-1a, used for token hashing and content keys.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
