//! Seeded, reproducible random number generation for problem generators.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood's 64-bit finalizer mix):
//! a single u64 of state advanced by the golden-ratio increment
//! 0x9E3779B97F4A7C15 and scrambled with two xor-multiply rounds. It is
//! pinned deliberately instead of a platform RNG so that a reimplementation
//! in any language reproduces every generated problem bit-for-bit from the
//! seed. Uniform doubles take the top 53 bits; normal deviates use the
//! Box-Muller transform on consecutive uniforms, never a ziggurat.

use num_complex::Complex64;

/// SplitMix64 stream.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Next raw 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard real normal deviate: sqrt(-2 ln u1) * cos(2 pi u2).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(f64::MIN_POSITIVE);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Standard complex normal deviate with E|z|^2 = 1:
    /// sqrt(-ln u1) * (cos(2 pi u2) + i sin(2 pi u2)).
    pub fn complex_normal(&mut self) -> Complex64 {
        let u1 = self.uniform().max(f64::MIN_POSITIVE);
        let u2 = self.uniform();
        let r = (-u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        Complex64::new(r * c, r * s)
    }
}
