//! Counter-based deterministic random streams.
//!
//! Every draw is a pure function of (stream key, counter), built on the
//! splitmix64 finalizer: integer-only arithmetic, so sequences are identical
//! across platforms and independent of generation order. Child streams are
//! derived by hashing a tag into the parent key, which gives each
//! subject/sample its own independent stream regardless of scheduling.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic stream of pseudo-random values. Cloning preserves the
/// position, so a cloned stream replays the same draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            key: mix64(seed.wrapping_add(GOLDEN)),
            counter: 0,
        }
    }

    /// Independent child stream for `tag`. Children with different tags (or
    /// different parents) produce unrelated sequences.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            key: mix64(self.key ^ mix64(tag.wrapping_add(1).wrapping_mul(GOLDEN))),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        v
    }

    /// Uniform in [0, 1), with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }

    /// Uniform in [-magnitude, magnitude].
    pub fn symmetric(&mut self, magnitude: f64) -> f64 {
        self.uniform(-magnitude, magnitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = StreamRng::from_seed(42);
        let mut b = StreamRng::from_seed(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_tags_give_different_streams() {
        let root = StreamRng::from_seed(7);
        let mut c0 = root.derive(0);
        let mut c1 = root.derive(1);
        let draws0: Vec<u64> = (0..8).map(|_| c0.next_u64()).collect();
        let draws1: Vec<u64> = (0..8).map(|_| c1.next_u64()).collect();
        assert_ne!(draws0, draws1);
    }

    #[test]
    fn derivation_is_order_independent() {
        let root = StreamRng::from_seed(7);
        let mut early = root.derive(3);
        // consuming the parent must not shift children
        let mut parent = root.clone();
        parent.next_u64();
        parent.next_u64();
        let mut late = parent.derive(3);
        assert_eq!(early.next_u64(), late.next_u64());
    }

    #[test]
    fn clone_replays() {
        let mut a = StreamRng::from_seed(9).derive(2);
        let mut b = a.clone();
        assert_eq!(a.next_f64(), b.next_f64());
    }

    #[test]
    fn uniform_respects_bounds() {
        let mut rng = StreamRng::from_seed(123);
        for _ in 0..1000 {
            let v = rng.uniform(-2.5, 4.0);
            assert!((-2.5..4.0).contains(&v));
            let s = rng.symmetric(3.0);
            assert!((-3.0..=3.0).contains(&s));
        }
    }

    #[test]
    fn roughly_uniform_mean() {
        let mut rng = StreamRng::from_seed(55);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| rng.next_f64()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }
}
