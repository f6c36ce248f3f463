//! Seeded sampling helpers over PCG64.

use rand_core::Rng;
use rand_pcg::Pcg64;

/// Uniform integer in `0..n` by Lemire's nearly-divisionless method.
pub fn bounded(rng: &mut Pcg64, n: u64) -> u64 {
    debug_assert!(n > 0);
    let mut m = u128::from(rng.next_u64()) * u128::from(n);
    let mut low = m as u64;
    if low < n {
        let threshold = n.wrapping_neg() % n;
        while low < threshold {
            m = u128::from(rng.next_u64()) * u128::from(n);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// Uniform float in `[0, 1)` from the top 53 bits.
pub fn unit(rng: &mut Pcg64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `true` with probability `p`; exact for `p = 0` and `p = 1`.
pub fn bernoulli(rng: &mut Pcg64, p: f64) -> bool {
    unit(rng) < p
}
