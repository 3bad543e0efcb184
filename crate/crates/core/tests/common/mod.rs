//! Shared helpers for the integration test suites.

/// Deterministic splitmix64 stream, so every suite is reproducible.
pub struct SplitMix(pub u64);

// Each test binary uses its own subset of these helpers.
#[allow(dead_code)]
impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    /// Small random rational p/q with p in [-9, 9], q in [1, 4].
    pub fn small_rational(&mut self) -> (i64, i64) {
        let p = (self.next_u64() % 19) as i64 - 9;
        let q = (self.next_u64() % 4) as i64 + 1;
        (p, q)
    }
}
