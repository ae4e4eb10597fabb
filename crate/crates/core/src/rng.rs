//! Deterministic random number generation.
//!
//! Every random stream in the crate is a ChaCha8 generator (`rand_chacha`)
//! seeded through [`ChaCha8Rng::seed_from_u64`]. ChaCha output is specified
//! byte-for-byte, so streams are identical on every platform.
//!
//! Normal variates use the basic Box–Muller transform: two uniforms
//! `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)` give `sqrt(-2 ln u1) cos(2π u2)` and
//! `sqrt(-2 ln u1) sin(2π u2)`. Both outputs are used, in that order.
//! Uniforms are the top 53 bits of a `u64` scaled by `2^-53`.
//!
//! Independent sub-streams (one per image and patch in the sampler) are
//! keyed by mixing the indices into the master seed with the SplitMix64
//! finalizer; see [`derive_seed`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seedable Gaussian source used throughout the crate.
pub struct GaussianRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianRng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    fn uniform_open_zero(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = self.uniform_open_zero();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Laplace variate with location 0 and the given scale, by inverse CDF.
    pub fn laplace(&mut self, scale: f64) -> f64 {
        // u in (-1/2, 1/2]
        let u = 0.5 - self.uniform_open_zero();
        -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Sub-seed for `(master, image, patch)`: SplitMix64 applied three times,
/// folding in one key per round.
pub fn derive_seed(master: u64, image: u64, patch: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ image) ^ patch)
}
