//! Deterministic synthetic scenes.
//!
//! Randomness comes from SplitMix64 seeded with the raw seed value. A uniform
//! float is `(next_u64() >> 40) * 2^-24`, scaled into the target interval as
//! `lo + (hi - lo) * u`. Per Gaussian the draws are, in order: mean x, y, z;
//! scale x, y, z; quaternion lanes w, x, y, z by rejection from `[-1, 1]^4`
//! (accepting `1e-4 < |q|^2 <= 1`); opacity; color r, g, b.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use super::{normalize_quaternion, Gaussian3D};
use crate::projection::SH_C0;

/// SplitMix64 with the float mapping used by the generator.
pub struct SplitMixStream(SplitMix64);

impl SplitMixStream {
    pub fn new(seed: u64) -> Self {
        SplitMixStream(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` on a 2^-24 grid.
    pub fn unit(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / 16_777_216.0)
    }

    pub fn uniform(&mut self, lo: f32, hi: f32) -> f32 {
        lo + (hi - lo) * self.unit()
    }
}

/// Generates `count` Gaussians with means uniform in `[-extent, extent]^3`,
/// shifted by `2 * extent` along +z so they sit in front of
/// [`Camera::canonical`](super::Camera::canonical). Per-axis scales are
/// uniform in `scale_range`, opacities uniform in `[0.2, 0.95]`, and the DC
/// coefficient is chosen so the rendered base color is uniform in `[0, 1]`.
pub fn gen_synthetic_scene(seed: u64, count: usize, extent: f32, scale_range: (f32, f32)) -> Vec<Gaussian3D> {
    assert!(extent > 0.0, "extent must be positive");
    assert!(
        0.0 < scale_range.0 && scale_range.0 <= scale_range.1,
        "scale range must satisfy 0 < min <= max"
    );
    let mut rng = SplitMixStream::new(seed);
    (0..count)
        .map(|_| {
            let mut mean = [0.0; 3];
            mean.iter_mut().for_each(|m| *m = rng.uniform(-extent, extent));
            mean[2] += 2.0 * extent;
            let mut scale = [0.0; 3];
            scale.iter_mut().for_each(|s| *s = rng.uniform(scale_range.0, scale_range.1));
            let rotation = loop {
                let q = [(); 4].map(|_| rng.uniform(-1.0, 1.0));
                let n2: f32 = q.iter().map(|v| v * v).sum();
                if n2 > 1e-4 && n2 <= 1.0 {
                    break normalize_quaternion(q);
                }
            };
            let opacity = rng.uniform(0.2, 0.95);
            let sh_dc = [(); 3].map(|_| (rng.unit() - 0.5) / SH_C0);
            Gaussian3D {
                mean,
                scale,
                rotation,
                opacity,
                sh_dc,
                sh_rest: None,
            }
        })
        .collect()
}
