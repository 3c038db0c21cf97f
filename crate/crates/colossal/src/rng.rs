//! Deterministic pseudorandom numbers.
//!
//! All stochastic behavior in this crate (k-means++ seeding, shuffles,
//! synthetic data generation, prototype perturbation) draws from
//! [`SplitMix64`], a counter-based generator: the n-th output is a fixed
//! bijective mix of `seed + n·0x9E3779B97F4A7C15`. Because the full stream is
//! pinned by these constants, an implementation in any language can reproduce
//! every selection bit for bit. The derived conventions are part of the
//! contract too:
//!
//! * `range(n)` is `next_u64() % n`,
//! * `next_f64()` is `(next_u64() >> 11) · 2⁻⁵³` (uniform in `[0, 1)`),
//! * `next_gaussian()` is Box-Muller on two `next_f64()` draws,
//! * substreams come from [`derive`].

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 (Steele, Lea, Flood 2014), mix function variant `mix13`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    #[inline]
    pub fn range(&mut self, n: usize) -> usize {
        assert!(n > 0, "range over empty interval");
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform f64 in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; `u1` is nudged into `(0, 1]` so the
    /// logarithm is always finite.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle: for `i` from `len-1` down to 1, swap `i` with
    /// `range(i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.range(i + 1);
            items.swap(i, j);
        }
    }
}

/// Independent substream seed for (seed, stream) pairs, e.g. one generator
/// per sample index or per Monte-Carlo run.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ mix(stream).wrapping_mul(GOLDEN_GAMMA))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_reproducible() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    // Reference values for the pinned algorithm, computed from the published
    // SplitMix64 constants by hand; they guard against accidental changes.
    #[test]
    fn known_answer() {
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(r.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn f64_in_unit_interval() {
        let mut r = SplitMix64::new(7);
        for _ in 0..1000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn gaussian_moments_roughly_standard() {
        let mut r = SplitMix64::new(3);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| r.next_gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn derive_separates_streams() {
        assert_ne!(derive(1, 0), derive(1, 1));
        assert_ne!(derive(0, 5), derive(1, 5));
    }
}
