use rayon::prelude::*;

use super::{
    alpha_of, blend, PixelState, PrecisionMode, RasterConstants, RasterCounters, StagedSplat, TileOutput, TILE_PIXELS,
};
use crate::binning::{GroupConfig, SortedGroupLists};
use crate::error::{Error, Result};
use crate::numeric::{Half, Operand};
use crate::projection::ProjectedGaussian;
use crate::scene::ImageBuffer;

/// Baseline per-tile rasterizer. `lists` must come from 1x1 groups, so each
/// group list is exactly one tile's depth-ordered list. Every pixel walks
/// that list front to back, staged in batches of `chunk_len` entries.
pub fn rasterize_tiles_scalar(
    lists: &SortedGroupLists,
    projected: &[ProjectedGaussian],
    cfg: &GroupConfig,
    mode: PrecisionMode,
    k: &RasterConstants,
    chunk_len: usize,
) -> Result<(ImageBuffer, RasterCounters)> {
    if cfg.tiles_per_group() != 1 {
        return Err(Error::Config(format!(
            "scalar rasterizer needs per-tile lists, got {}x{} groups",
            cfg.group_h, cfg.group_w
        )));
    }
    if chunk_len == 0 {
        return Err(Error::Config("chunk length must be at least 1".into()));
    }
    if lists.num_groups() != cfg.num_groups() {
        return Err(Error::Config("group lists do not match the configuration".into()));
    }
    let tiles: Vec<(TileOutput, RasterCounters)> = match mode {
        PrecisionMode::Fp32 => run::<f32>(lists, projected, cfg, k, chunk_len),
        PrecisionMode::Fp16 => run::<Half>(lists, projected, cfg, k, chunk_len),
    };
    let mut img = ImageBuffer::new(cfg.width as usize, cfg.height as usize);
    let mut counters = RasterCounters::default();
    for (tile, c) in &tiles {
        tile.write_into(&mut img);
        counters.add(c);
    }
    img.finalize();
    Ok((img, counters))
}

fn run<T: Operand>(
    lists: &SortedGroupLists,
    projected: &[ProjectedGaussian],
    cfg: &GroupConfig,
    k: &RasterConstants,
    chunk_len: usize,
) -> Vec<(TileOutput, RasterCounters)> {
    (0..cfg.num_groups() as u32)
        .into_par_iter()
        .map(|tile| {
            let (tx, ty) = (tile % cfg.tiles_x(), tile / cfg.tiles_x());
            rasterize_tile::<T>(tx, ty, lists.group(tile), projected, cfg, k, chunk_len)
        })
        .collect()
}

fn rasterize_tile<T: Operand>(
    tx: u32,
    ty: u32,
    list: &[crate::binning::GroupEntry],
    projected: &[ProjectedGaussian],
    cfg: &GroupConfig,
    k: &RasterConstants,
    chunk_len: usize,
) -> (TileOutput, RasterCounters) {
    let mut counters = RasterCounters::default();
    let mut pixels = [PixelState::default(); TILE_PIXELS];
    let (x0, y0) = (tx * cfg.tile_size, ty * cfg.tile_size);
    let mut live = 0;
    for (i, px) in pixels.iter_mut().enumerate() {
        let (x, y) = (x0 + (i % 16) as u32, y0 + (i / 16) as u32);
        px.done = x >= cfg.width || y >= cfg.height;
        live += !px.done as usize;
    }

    let mut batch: Vec<StagedSplat<T>> = Vec::with_capacity(chunk_len);
    for entries in list.chunks(chunk_len) {
        if live == 0 {
            break;
        }
        counters.chunk_loads += 1;
        counters.gaussian_loads += entries.len() as u64;
        batch.clear();
        batch.extend(entries.iter().map(|e| StagedSplat::<T>::stage(&projected[e.gaussian_index as usize])));

        for (i, px) in pixels.iter_mut().enumerate() {
            if px.done {
                continue;
            }
            let pos = [(x0 + (i % 16) as u32) as f32, (y0 + (i / 16) as u32) as f32];
            for s in &batch {
                counters.power_evals += 1;
                let power = s.power_at(pos);
                if let Some(alpha) = alpha_of(power, s.opacity.widen(), k) {
                    blend(px, alpha, s.color, k);
                    if px.done {
                        live -= 1;
                        break;
                    }
                }
            }
        }
    }
    (TileOutput::from_pixels(tx, ty, &pixels), counters)
}
