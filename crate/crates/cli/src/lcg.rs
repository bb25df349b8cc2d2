//! Test-vector generator shared by `verify` and `bench`.
//!
//! A 64-bit linear congruential generator (Knuth's MMIX constants):
//!
//! ```text
//! state' = state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//! x      = (state' >> 11) / 2^53 * 2 - 1                         in [-1, 1)
//! ```
//!
//! The state starts at the seed itself, so a seed reproduces the same
//! vector on every platform.

pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed)
    }

    pub fn next_unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

pub fn vector(n: usize, seed: u64) -> Vec<f64> {
    let mut g = Lcg::new(seed);
    (0..n).map(|_| g.next_unit()).collect()
}
