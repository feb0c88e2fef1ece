//! Reproducible random streams.
//!
//! Realization `i` of a study with master seed `s` draws from a ChaCha12
//! stream seeded (through `SeedableRng::seed_from_u64`) with `mix64(s, i)`.
//! Standard normals come from the Box-Muller transform, both outputs used,
//! with `libm` transcendental functions so results do not depend on the
//! platform's libm.

use core::f64::consts::PI;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// SplitMix64-style avalanche of `master` and `index`.
pub fn mix64(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream of independent standard normal variates.
pub struct NormalStream {
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `(0, 1]`.
    fn open_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.open_uniform();
        let u2 = self.open_uniform();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_separates_indices() {
        assert_ne!(mix64(42, 0), mix64(42, 1));
        assert_ne!(mix64(42, 0), mix64(43, 0));
        assert_eq!(mix64(7, 3), mix64(7, 3));
    }

    #[test]
    fn normal_moments() {
        let mut s = NormalStream::new(1);
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.next_normal();
            m1 += z;
            m2 += z * z;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        assert!(m1.abs() < 0.01);
        assert!((m2 - 1.0).abs() < 0.01);
    }
}
