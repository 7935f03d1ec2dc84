//! CPU rasterizer for 3D Gaussian splats with two backends: a per-tile
//! scalar reference and a grouped-tile backend that evaluates splat powers
//! as emulated half-precision 16x16x16 fragment matrix products.

pub mod binning;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod projection;
pub mod raster;
pub mod render;
pub mod scene;

pub use error::{Error, Result};
pub use metrics::{max_abs_diff, psnr, OpReport, ReuseReport};
pub use raster::PrecisionMode;
pub use render::{render, Backend, RenderOptions, RenderOutput};
pub use scene::{Camera, Gaussian3D, ImageBuffer};
