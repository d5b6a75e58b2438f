//! Counter-based deterministic sampling.
//!
//! Every draw is a pure function of (seed, counter), so generated scenes are
//! reproducible across platforms and independent of evaluation order.

#[inline]
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in (0, 1], bit-reproducible.
#[inline]
pub(crate) fn uniform_01(seed: u64, counter: u64) -> f64 {
    let bits = splitmix64(splitmix64(seed) ^ splitmix64(counter.wrapping_add(0x1234_5678_9ABC_DEF0)));
    ((bits >> 11) as f64 + 1.0) * (1.0 / 9_007_199_254_740_992.0) // 2^-53
}

/// Standard normal draw via the Box-Muller transform.
#[inline]
pub(crate) fn normal(seed: u64, counter: u64) -> f64 {
    let u1 = uniform_01(seed, counter.wrapping_mul(2));
    let u2 = uniform_01(seed, counter.wrapping_mul(2).wrapping_add(1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
