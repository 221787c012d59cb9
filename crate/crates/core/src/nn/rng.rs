use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from `[0, 1)` with 53 bits of precision.
pub fn unit(rng: &mut (impl RngCore + ?Sized)) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform(rng: &mut (impl RngCore + ?Sized), lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Uniform index in `0..n`.
pub fn below(rng: &mut (impl RngCore + ?Sized), n: usize) -> usize {
    debug_assert!(n > 0);
    // rejection sampling keeps the draw unbiased
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

pub fn shuffle<T>(rng: &mut (impl RngCore + ?Sized), items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}
