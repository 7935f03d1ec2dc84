//! Stage-4 rasterization: shared per-pixel rules plus the two backends.
//!
//! Both backends evaluate the power term as the ordered three-term sum
//! `((-a/2 * dx^2) + (-b * dx*dy)) + (-c/2 * dy^2)` over operands staged at
//! the selected precision, then apply the same opacity, skip, clamp and
//! early-termination rules. That shared order is what lets images be
//! compared bit for bit across backends.

mod scalar;
mod tensor;

pub use scalar::rasterize_tiles_scalar;
pub use tensor::{
    build_phi_operand, build_q_operand, rasterize_group, rasterize_groups, GaussianChunk, GroupOutput, StagedEntry,
    TileOutput,
};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::numeric::{three_term, Operand};
use crate::projection::ProjectedGaussian;

pub const TILE_PIXELS: usize = 256;
/// Entries staged per chunk; one chunk fills the rows of one A fragment.
pub const MAX_CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterConstants {
    pub alpha_skip: f32,
    pub alpha_clamp: f32,
    pub t_terminate: f32,
}

impl Default for RasterConstants {
    fn default() -> Self {
        RasterConstants {
            alpha_skip: 1.0 / 255.0,
            alpha_clamp: 0.99,
            t_terminate: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    #[default]
    Fp32,
    Fp16,
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecisionMode::Fp32 => "fp32",
            PrecisionMode::Fp16 => "fp16",
        })
    }
}

impl FromStr for PrecisionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fp32" => Ok(PrecisionMode::Fp32),
            "fp16" => Ok(PrecisionMode::Fp16),
            _ => Err(format!("unknown precision `{s}` (expected fp32 or fp16)")),
        }
    }
}

/// Per-pixel blending state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelState {
    pub transmittance: f32,
    pub accum: [f32; 3],
    pub done: bool,
}

impl Default for PixelState {
    fn default() -> Self {
        PixelState {
            transmittance: 1.0,
            accum: [0.0; 3],
            done: false,
        }
    }
}

/// `min(alpha_clamp, opacity * exp(power))`, or `None` when the result falls
/// below `alpha_skip`. Positive power is treated as zero; NaN power is skipped.
#[inline]
pub fn alpha_of(power: f32, opacity: f32, k: &RasterConstants) -> Option<f32> {
    if power.is_nan() {
        return None;
    }
    let power = if power > 0.0 { 0.0 } else { power };
    let alpha = (opacity * power.exp()).min(k.alpha_clamp);
    (alpha >= k.alpha_skip).then_some(alpha)
}

/// Front-to-back compositing step.
#[inline]
pub fn blend(state: &mut PixelState, alpha: f32, color: [f32; 3], k: &RasterConstants) {
    let weight = state.transmittance * alpha;
    for (acc, c) in state.accum.iter_mut().zip(color) {
        *acc += weight * c;
    }
    state.transmittance *= 1.0 - alpha;
    state.done = state.transmittance < k.t_terminate;
}

/// Gaussian-side coefficients `[-a/2, -b, -c/2]` at operand precision.
#[inline]
pub fn conic_coeffs<T: Operand>(conic: [f32; 3]) -> [T; 3] {
    [
        T::quantize(-0.5 * conic[0]),
        T::quantize(-conic[1]),
        T::quantize(-0.5 * conic[2]),
    ]
}

/// Pixel-side basis `[dx^2, dx*dy, dy^2]`. Offsets are rounded to operand
/// precision first and the products are formed from the rounded values and
/// rounded again.
#[inline]
pub fn quad_basis<T: Operand>(pixel: [f32; 2], mean: [T; 2]) -> [T; 3] {
    let dx = T::quantize(pixel[0] - mean[0].widen()).widen();
    let dy = T::quantize(pixel[1] - mean[1].widen()).widen();
    [T::quantize(dx * dx), T::quantize(dx * dy), T::quantize(dy * dy)]
}

/// Power term for a conic and an offset `d = pixel - mean`, in full single
/// precision.
#[inline]
pub fn power_scalar(conic: [f32; 3], d: [f32; 2]) -> f32 {
    let [dx, dy] = d;
    three_term::<f32>(conic_coeffs(conic), [dx * dx, dx * dy, dy * dy])
}

/// Rasterization operands of one splat at precision `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StagedSplat<T: Operand> {
    pub coeffs: [T; 3],
    pub mean: [T; 2],
    pub opacity: T,
    pub color: [f32; 3],
}

impl<T: Operand> StagedSplat<T> {
    pub fn stage(p: &ProjectedGaussian) -> Self {
        StagedSplat {
            coeffs: conic_coeffs(p.conic),
            mean: p.mean2d.map(T::quantize),
            opacity: T::quantize(p.opacity),
            color: p.color,
        }
    }

    #[inline]
    pub fn power_at(&self, pixel: [f32; 2]) -> f32 {
        three_term(self.coeffs, quad_basis(pixel, self.mean))
    }
}

/// Work counters gathered during rasterization. All are exact integer
/// tallies, so totals do not depend on how work was scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RasterCounters {
    /// Chunks staged (tensor) or list batches staged (scalar).
    pub chunk_loads: u64,
    /// Gaussian entries staged across all chunk loads.
    pub gaussian_loads: u64,
    /// Fragment multiply-accumulates issued (one per chunk, tile and panel).
    pub fragment_mma: u64,
    /// Staged (entry, tile) pairs dropped by the membership mask.
    pub skipped_pairs: u64,
    /// Power values computed.
    pub power_evals: u64,
    /// Multiply lanes carrying real coefficients, over all fragment ops.
    pub useful_lanes: u64,
    /// All multiply lanes issued (4096 per fragment op).
    pub total_lanes: u64,
}

impl RasterCounters {
    pub fn add(&mut self, o: &RasterCounters) {
        self.chunk_loads += o.chunk_loads;
        self.gaussian_loads += o.gaussian_loads;
        self.fragment_mma += o.fragment_mma;
        self.skipped_pairs += o.skipped_pairs;
        self.power_evals += o.power_evals;
        self.useful_lanes += o.useful_lanes;
        self.total_lanes += o.total_lanes;
    }

    /// Fraction of issued multiply lanes that were padding or unused rows.
    pub fn padding_waste_ratio(&self) -> f64 {
        if self.total_lanes == 0 {
            0.0
        } else {
            1.0 - self.useful_lanes as f64 / self.total_lanes as f64
        }
    }
}
