//! Scene primitives, cameras and image buffers, plus their file formats.

mod camera;
mod gsb;
mod image;
mod synthetic;

pub use camera::{camera_to_text, load_camera, parse_camera, save_camera, Camera};
pub use gsb::{decode_scene, encode_scene, load_scene, save_scene, GSB_HEADER_BYTES, GSB_MAGIC};
pub use image::{decode_ppm, read_ppm, write_image, ImageBuffer};
pub use synthetic::{gen_synthetic_scene, SplitMixStream};

use crate::error::{Error, Result};

/// Number of higher-order SH coefficients (degrees 1..=3, three channels).
pub const SH_REST_LEN: usize = 45;

/// World-space Gaussian primitive.
///
/// `rotation` is a unit quaternion stored as `(w, x, y, z)`. `opacity` is the
/// activated value in `[0, 1]`. `sh_rest` holds degrees 1..=3 laid out
/// coefficient-major: entry `3 * k + channel` for basis function `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian3D {
    pub mean: [f32; 3],
    pub scale: [f32; 3],
    pub rotation: [f32; 4],
    pub opacity: f32,
    pub sh_dc: [f32; 3],
    pub sh_rest: Option<Box<[f32; SH_REST_LEN]>>,
}

impl Gaussian3D {
    pub fn sh_degree(&self) -> u32 {
        if self.sh_rest.is_some() {
            3
        } else {
            0
        }
    }

    /// Checks the record invariants; `index` is used in the error.
    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRecord { index, msg });
        if !(0.0..=1.0).contains(&self.opacity) {
            return bad(format!("opacity {} outside [0, 1]", self.opacity));
        }
        if self.scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad(format!("scale {:?} must be positive and finite", self.scale));
        }
        if self.mean.iter().any(|v| !v.is_finite()) {
            return bad(format!("mean {:?} is not finite", self.mean));
        }
        let finite_sh = self.sh_dc.iter().all(|v| v.is_finite())
            && self.sh_rest.as_ref().is_none_or(|r| r.iter().all(|v| v.is_finite()));
        if !finite_sh {
            return bad("non-finite SH coefficient".into());
        }
        let n = quat_norm(&self.rotation);
        if !(n.is_finite() && n > 0.0) {
            return bad(format!("rotation {:?} has no direction", self.rotation));
        }
        Ok(())
    }
}

fn quat_norm(q: &[f32; 4]) -> f64 {
    q.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}

/// Renormalizes `q` when its norm is off by more than 1e-6. Quaternions
/// already within tolerance are returned bit-for-bit unchanged, so the
/// operation is idempotent and scene files round-trip exactly.
pub fn normalize_quaternion(q: [f32; 4]) -> [f32; 4] {
    let n = quat_norm(&q);
    if (n - 1.0).abs() <= 1e-6 || n == 0.0 {
        return q;
    }
    q.map(|v| (v as f64 / n) as f32)
}
