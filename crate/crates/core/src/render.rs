//! End-to-end rendering: projection, binning, sorting and rasterization.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::binning::{build_group_entries, sort_entries, GroupConfig};
use crate::error::{Error, Result};
use crate::metrics::OpReport;
use crate::projection::{project_scene, Projection};
use crate::raster::{rasterize_groups, rasterize_tiles_scalar, PrecisionMode, RasterConstants, MAX_CHUNK};
use crate::scene::{Camera, Gaussian3D, ImageBuffer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Per-tile, per-pixel evaluation.
    Scalar,
    /// Grouped tiles with fragment matrix products.
    Tensor,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Scalar => "scalar",
            Backend::Tensor => "tensor",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(Backend::Scalar),
            "tensor" => Ok(Backend::Tensor),
            _ => Err(Error::Config(format!("unknown backend `{s}` (expected scalar or tensor)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOptions {
    pub backend: Backend,
    pub mode: PrecisionMode,
    /// Tiles per group side. The scalar backend only accepts 1.
    pub group: u32,
    pub chunk_len: usize,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    pub constants: RasterConstants,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            backend: Backend::Tensor,
            mode: PrecisionMode::Fp32,
            group: 2,
            chunk_len: MAX_CHUNK,
            workers: 0,
            constants: RasterConstants::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub image: ImageBuffer,
    pub report: OpReport,
}

/// Runs `f` on a dedicated pool of `workers` threads, or inline when 0.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

pub fn render(scene: &[Gaussian3D], cam: &Camera, opts: &RenderOptions) -> Result<RenderOutput> {
    cam.validate()?;
    if opts.backend == Backend::Scalar && opts.group != 1 {
        return Err(Error::Config(format!(
            "scalar backend renders per tile; group must be 1, got {}",
            opts.group
        )));
    }
    let cfg = GroupConfig::square(cam.width, cam.height, opts.group)?;
    with_workers(opts.workers, || {
        let projection = project_scene(scene, cam);
        render_projected(&projection, &cfg, opts)
    })?
}

/// Bins, sorts and rasterizes an already projected scene.
pub fn render_projected(projection: &Projection, cfg: &GroupConfig, opts: &RenderOptions) -> Result<RenderOutput> {
    let entries = build_group_entries(&projection.splats, cfg);
    let lists = sort_entries(&entries, cfg.num_groups())?;
    let splats = &projection.splats;
    let k = &opts.constants;
    let (image, counters) = match opts.backend {
        Backend::Scalar => rasterize_tiles_scalar(&lists, splats, cfg, opts.mode, k, opts.chunk_len)?,
        Backend::Tensor => rasterize_groups(&lists, splats, cfg, opts.mode, k, opts.chunk_len)?,
    };
    Ok(RenderOutput {
        image,
        report: OpReport {
            backend: opts.backend,
            precision: opts.mode,
            group: cfg.group_h,
            chunk_len: opts.chunk_len,
            projected: splats.len(),
            culled: projection.culled,
            degenerate: projection.degenerate,
            entries: entries.len(),
            counters,
            padding_waste_ratio: counters.padding_waste_ratio(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::gen_synthetic_scene;

    #[test]
    fn backend_names() {
        assert_eq!("tensor".parse::<Backend>().unwrap(), Backend::Tensor);
        assert_eq!(Backend::Scalar.to_string(), "scalar");
        assert!("gpu".parse::<Backend>().is_err());
    }

    #[test]
    fn scalar_needs_single_tile_groups() {
        let cam = Camera::canonical(32, 32);
        let opts = RenderOptions {
            backend: Backend::Scalar,
            group: 2,
            ..RenderOptions::default()
        };
        assert!(matches!(render(&[], &cam, &opts), Err(Error::Config(_))));
    }

    #[test]
    fn empty_scene_is_black() {
        let cam = Camera::canonical(40, 24);
        let out = render(&[], &cam, &RenderOptions::default()).unwrap();
        assert!(out.image.rgb.iter().all(|&v| v == 0.0));
        assert_eq!(out.report.counters.chunk_loads, 0);
    }

    #[test]
    fn small_scene_backends_agree() {
        let cam = Camera::canonical(48, 40);
        let scene = gen_synthetic_scene(7, 60, 1.0, (0.02, 0.08));
        let tensor = render(&scene, &cam, &RenderOptions { group: 1, ..RenderOptions::default() }).unwrap();
        let scalar = render(
            &scene,
            &cam,
            &RenderOptions {
                backend: Backend::Scalar,
                group: 1,
                ..RenderOptions::default()
            },
        )
        .unwrap();
        assert!(tensor.image.bit_identical(&scalar.image));
        assert!(tensor.image.rgb.iter().any(|&v| v > 0.0));
    }
}
