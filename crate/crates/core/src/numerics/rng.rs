//! Seeded pseudo-random generator.
//!
//! The generator is SplitMix64 (Steele, Lea and Flood, 2014): a 64-bit
//! counter advanced by the golden-ratio increment `0x9E3779B97F4A7C15` and
//! passed through a fixed avalanche mix. The algorithm uses only wrapping
//! integer arithmetic, so a given seed produces the same stream on every
//! platform.

use super::{Matrix, Real};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
    state: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed }
    }

    /// Seed this generator was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)` by rejection sampling (no modulo bias).
    ///
    /// Panics if `bound == 0`.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below requires a positive bound");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Fisher-Yates shuffle driven by this generator.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Picks one element uniformly. Panics on an empty slice.
    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.next_below(items.len() as u64) as usize]
    }

    /// Derives an independent child generator, e.g. one per epoch.
    pub fn fork(&mut self) -> SeededRng {
        SeededRng::new(self.next_u64())
    }
}

/// Matrix of i.i.d. uniform draws in `[lo, hi)`, advancing `rng`.
pub fn rng_uniform<T: Real>(
    rng: &mut SeededRng,
    lo: f64,
    hi: f64,
    rows: usize,
    cols: usize,
) -> Result<Matrix<T>, super::NumericsError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(super::NumericsError::InvalidRange { lo, hi });
    }
    let hi_t = T::from_f64(hi);
    let mut values = Vec::with_capacity(rows * cols);
    while values.len() < rows * cols {
        let v = T::from_f64(lo + (hi - lo) * rng.next_f64());
        // rounding to f32 can land exactly on `hi`
        if v < hi_t {
            values.push(v);
        }
    }
    Matrix::from_vec(rows, cols, values)
}
