//! splitmix64 generator shared by the phantom generator and the random-query baseline.
//!
//! The stream is fully specified here so that any implementation can
//! reproduce it bit for bit:
//! - `next_u64`: the reference splitmix64 step.
//! - `below(n)`: draw `next_u64() >> (64 - k)` with `k = ceil(log2 n)`, reject values `>= n`.
//! - `uniform`: `(next_u64() >> 11) * 2^-53`, in `[0, 1)`.
//! - `standard_normal`: Box–Muller cosine branch on `u1 = 1 - uniform()`, `u2 = uniform()`,
//!   evaluated with the `libm` routines; the sine branch is discarded.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for a sub-task (a phantom case, a simulation).
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut base = Self::new(seed ^ stream.wrapping_add(1).wrapping_mul(GOLDEN));
        Self::new(base.next_u64())
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        if n == 1 {
            return 0;
        }
        let bits = 64 - (n - 1).leading_zeros();
        loop {
            let v = self.next_u64() >> (64 - bits);
            if v < n {
                return v;
            }
        }
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }
}
