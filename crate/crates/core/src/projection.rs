//! Frustum culling and per-Gaussian screen-space features: projected mean,
//! dilated 2D covariance, conic, splat radius and view-dependent color.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scene::{Camera, Gaussian3D};

pub const SH_C0: f32 = 0.282_094_79;
const SH_C0_F64: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Low-pass dilation added to both diagonal entries of the 2D covariance.
pub const COV2D_DILATION: f64 = 0.3;
/// Centers may lie this factor beyond the image half-extent and still be kept.
pub const GUARD_BAND: f64 = 1.3;
/// Projections whose 2D covariance determinant falls below this are dropped.
pub const MIN_COV2D_DET: f64 = 1e-12;

/// Screen-space splat.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectedGaussian {
    /// Index of the source Gaussian in the scene.
    pub source: u32,
    pub mean2d: [f32; 2],
    /// `(a, b, c)` of the inverse 2D covariance `[[a, b], [b, c]]`.
    pub conic: [f32; 3],
    /// Dilated 2D covariance `(xx, xy, yy)`.
    pub cov2d: [f32; 3],
    pub color: [f32; 3],
    pub opacity: f32,
    pub depth: f32,
    pub radius: u32,
}

/// Projected scene plus what was discarded along the way.
#[derive(Clone, Debug, Default)]
pub struct Projection {
    pub splats: Vec<ProjectedGaussian>,
    pub culled: usize,
    pub degenerate: usize,
}

/// `R S S^T R^T` as `(xx, xy, xz, yy, yz, zz)`; `rotation` is `(w, x, y, z)`.
pub fn compute_cov3d(scale: [f32; 3], rotation: [f32; 4]) -> Result<[f64; 6]> {
    if scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Config(format!("scale {scale:?} must be positive")));
    }
    let r = rotation_matrix(rotation);
    let s = scale.map(|v| v as f64);
    // M = R S
    let m: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| r[i][j] * s[j]));
    let e = |i: usize, j: usize| (0..3).map(|k| m[i][k] * m[j][k]).sum::<f64>();
    Ok([e(0, 0), e(0, 1), e(0, 2), e(1, 1), e(1, 2), e(2, 2)])
}

fn rotation_matrix(q: [f32; 4]) -> [[f64; 3]; 3] {
    let n = q.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v as f64 / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Keeps a Gaussian when its camera-space depth is inside `(near, far)` and
/// its projected center lies within the guard band around the image.
pub fn frustum_cull(g: &Gaussian3D, cam: &Camera) -> bool {
    let p = cam.world_to_camera(g.mean);
    let z = p[2];
    if !(z > cam.near as f64 && z < cam.far as f64) {
        return false;
    }
    let [cx, cy] = cam.principal_point();
    let u = cam.focal_x as f64 * p[0] / z;
    let v = cam.focal_y as f64 * p[1] / z;
    u.abs() <= GUARD_BAND * cx && v.abs() <= GUARD_BAND * cy
}

/// Projects a Gaussian that passed [`frustum_cull`]. Returns `None` when the
/// dilated 2D covariance is degenerate.
pub fn project_gaussian(g: &Gaussian3D, index: u32, cam: &Camera) -> Option<ProjectedGaussian> {
    let t = cam.world_to_camera(g.mean);
    let [x, y, z] = t;
    let (fx, fy) = (cam.focal_x as f64, cam.focal_y as f64);
    let [cx, cy] = cam.principal_point();

    let cov = compute_cov3d(g.scale, g.rotation).ok()?;
    let sigma = [
        [cov[0], cov[1], cov[2]],
        [cov[1], cov[3], cov[4]],
        [cov[2], cov[4], cov[5]],
    ];
    let jac = [[fx / z, 0.0, -fx * x / (z * z)], [0.0, fy / z, -fy * y / (z * z)]];
    let w = cam.rotation();
    // T = J W (2x3), cov2d = T sigma T^T
    let tm: [[f64; 3]; 2] = std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| jac[i][k] * w[k][j]).sum()));
    let ts: [[f64; 3]; 2] =
        std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| tm[i][k] * sigma[k][j]).sum()));
    let c2 = |i: usize, j: usize| (0..3).map(|k| ts[i][k] * tm[j][k]).sum::<f64>();
    let a = c2(0, 0) + COV2D_DILATION;
    let b = c2(0, 1);
    let c = c2(1, 1) + COV2D_DILATION;

    let det = a * c - b * b;
    if det.is_nan() || det < MIN_COV2D_DET {
        return None;
    }
    let mid = 0.5 * (a + c);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    let radius = ((3.0 * lambda_max.sqrt()).ceil() as u32).max(1);

    let center = cam.center();
    let dir = [
        g.mean[0] as f64 - center[0],
        g.mean[1] as f64 - center[1],
        g.mean[2] as f64 - center[2],
    ];
    let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let color = eval_sh_color(g, dir.map(|v| v / len));

    Some(ProjectedGaussian {
        source: index,
        mean2d: [(fx * x / z + cx) as f32, (fy * y / z + cy) as f32],
        conic: [(c / det) as f32, (-b / det) as f32, (a / det) as f32],
        cov2d: [a as f32, b as f32, c as f32],
        color,
        opacity: g.opacity,
        depth: z as f32,
        radius,
    })
}

/// Degree-0 or degree-3 real spherical-harmonics color, offset by 0.5 and
/// clamped below at zero.
pub fn eval_sh_color(g: &Gaussian3D, view_dir: [f64; 3]) -> [f32; 3] {
    let [x, y, z] = view_dir;
    std::array::from_fn(|ch| {
        let mut v = SH_C0_F64 * g.sh_dc[ch] as f64;
        if let Some(rest) = &g.sh_rest {
            let sh = |k: usize| rest[3 * (k - 1) + ch] as f64;
            let (xx, yy, zz) = (x * x, y * y, z * z);
            let (xy, yz, xz) = (x * y, y * z, x * z);
            v += -SH_C1 * y * sh(1) + SH_C1 * z * sh(2) - SH_C1 * x * sh(3);
            v += SH_C2[0] * xy * sh(4)
                + SH_C2[1] * yz * sh(5)
                + SH_C2[2] * (2.0 * zz - xx - yy) * sh(6)
                + SH_C2[3] * xz * sh(7)
                + SH_C2[4] * (xx - yy) * sh(8);
            v += SH_C3[0] * y * (3.0 * xx - yy) * sh(9)
                + SH_C3[1] * xy * z * sh(10)
                + SH_C3[2] * y * (4.0 * zz - xx - yy) * sh(11)
                + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * sh(12)
                + SH_C3[4] * x * (4.0 * zz - xx - yy) * sh(13)
                + SH_C3[5] * z * (xx - yy) * sh(14)
                + SH_C3[6] * x * (xx - 3.0 * yy) * sh(15);
        }
        ((v + 0.5).max(0.0)) as f32
    })
}

/// Culls and projects a whole scene. Output order follows scene order.
pub fn project_scene(scene: &[Gaussian3D], cam: &Camera) -> Projection {
    enum Outcome {
        Culled,
        Degenerate,
        Kept(ProjectedGaussian),
    }
    let outcomes: Vec<Outcome> = scene
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            if !frustum_cull(g, cam) {
                Outcome::Culled
            } else {
                match project_gaussian(g, i as u32, cam) {
                    Some(p) => Outcome::Kept(p),
                    None => Outcome::Degenerate,
                }
            }
        })
        .collect();
    let mut out = Projection::default();
    for o in outcomes {
        match o {
            Outcome::Culled => out.culled += 1,
            Outcome::Degenerate => out.degenerate += 1,
            Outcome::Kept(p) => out.splats.push(p),
        }
    }
    out
}
