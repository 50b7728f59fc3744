//! Seed-derived random streams.
//!
//! Every particle draws from its own ChaCha stream keyed by the run seed and
//! its index, so evaluation order never changes the numbers it sees. The
//! resampling offset of update `seq` comes from a separate key and is the
//! same at every particle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OFFSET_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `u0 ∈ [0, 1/n)` for the systematic resampling of update `seq`.
pub fn resample_offset(seed: u64, seq: u64, n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ OFFSET_KEY);
    rng.set_stream(seq);
    let u0 = rng.random::<f64>() / n as f64;
    // Guard against rounding up onto the stratum boundary.
    u0.min(f64::from_bits((1.0 / n as f64).to_bits() - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_reproducible_and_in_range() {
        for seq in 0..1000 {
            let a = resample_offset(42, seq, 7);
            assert_eq!(a, resample_offset(42, seq, 7));
            assert!((0.0..1.0 / 7.0).contains(&a));
        }
        assert_ne!(resample_offset(42, 0, 7), resample_offset(43, 0, 7));
    }

    #[test]
    fn particle_streams_differ() {
        let a: u64 = particle_rng(1, 0).random();
        let b: u64 = particle_rng(1, 1).random();
        assert_ne!(a, b);
        let again: u64 = particle_rng(1, 0).random();
        assert_eq!(a, again);
    }
}
