//! Grouped rasterizer with the power term computed by fragment GEMMs.
//!
//! A group's depth-ordered list is consumed in chunks of at most 16 entries.
//! Each staged chunk is shared by every member tile: a tile keeps the rows
//! whose mask names it, evaluates them against its 16 pixel panels through
//! the fragment multiply, and blends in chunk order with its own per-pixel
//! state.

use arrayvec::ArrayVec;
use rayon::prelude::*;

use super::{
    alpha_of, blend, quad_basis, PixelState, PrecisionMode, RasterConstants, RasterCounters, StagedSplat, MAX_CHUNK,
    TILE_PIXELS,
};
use crate::binning::{GroupConfig, GroupEntry, SortedGroupLists};
use crate::error::{Error, Result};
use crate::numeric::{row_product, widen_fragment, FragmentA, FragmentB, Half, Operand, FRAG};
use crate::projection::ProjectedGaussian;
use crate::scene::ImageBuffer;

const PANELS: usize = TILE_PIXELS / FRAG;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StagedEntry<T: Operand> {
    pub gaussian_index: u32,
    pub depth: f32,
    pub mask: u32,
    pub splat: StagedSplat<T>,
}

/// Up to 16 consecutive list entries with their operands staged.
#[derive(Clone, Debug)]
pub struct GaussianChunk<T: Operand> {
    entries: ArrayVec<StagedEntry<T>, MAX_CHUNK>,
}

impl<T: Operand> GaussianChunk<T> {
    /// Stages `entries` in list order. Panics if more than 16 are given.
    pub fn stage(entries: &[GroupEntry], projected: &[ProjectedGaussian]) -> Self {
        assert!(entries.len() <= MAX_CHUNK, "a chunk holds at most {MAX_CHUNK} entries");
        GaussianChunk {
            entries: entries
                .iter()
                .map(|e| StagedEntry {
                    gaussian_index: e.gaussian_index,
                    depth: e.depth,
                    mask: e.mask,
                    splat: StagedSplat::stage(&projected[e.gaussian_index as usize]),
                })
                .collect(),
        }
    }

    pub fn entries(&self) -> &[StagedEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Gaussian-side operand for one tile: the chunk entries whose mask has
/// `tile_bit` set, in chunk order, one per row. Returns the fragment and the
/// row -> chunk-position mapping; rows past the mapping are zero.
pub fn build_q_operand<T: Operand>(chunk: &GaussianChunk<T>, tile_bit: u32) -> (FragmentA<T>, ArrayVec<u8, FRAG>) {
    let mut a = FragmentA::<T>::zeros();
    let mut rows = ArrayVec::new();
    for (pos, e) in chunk.entries.iter().enumerate() {
        if e.mask >> tile_bit & 1 == 1 {
            a.set_row_terms(rows.len(), e.splat.coeffs);
            rows.push(pos as u8);
        }
    }
    (a, rows)
}

/// Pixel-side operands for one panel (pixel row `panel` of tile `tile`):
/// one fragment per selected Gaussian mean, column `p` holding the basis of
/// pixel `p` of the panel.
pub fn build_phi_operand<T: Operand>(
    tile: (u32, u32),
    tile_size: u32,
    panel: usize,
    means: &[[T; 2]],
) -> Vec<FragmentB<T>> {
    means
        .iter()
        .map(|&mean| {
            let mut b = FragmentB::<T>::zeros();
            for p in 0..FRAG {
                b.set_col_terms(p, quad_basis(panel_pixel(tile, tile_size, panel, p), mean));
            }
            b
        })
        .collect()
}

#[inline]
fn panel_pixel(tile: (u32, u32), tile_size: u32, panel: usize, p: usize) -> [f32; 2] {
    [
        (tile.0 * tile_size + p as u32) as f32,
        (tile.1 * tile_size + panel as u32) as f32,
    ]
}

/// Final accumulated color of one tile, row-major over its 16x16 pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct TileOutput {
    pub tx: u32,
    pub ty: u32,
    pub rgb: Vec<f32>,
}

impl TileOutput {
    pub(crate) fn from_pixels(tx: u32, ty: u32, pixels: &[PixelState; TILE_PIXELS]) -> Self {
        TileOutput {
            tx,
            ty,
            rgb: pixels.iter().flat_map(|p| p.accum).collect(),
        }
    }

    /// Copies the in-image part of the tile into `img`.
    pub fn write_into(&self, img: &mut ImageBuffer) {
        for i in 0..TILE_PIXELS {
            let x = self.tx as usize * 16 + i % 16;
            let y = self.ty as usize * 16 + i / 16;
            if x < img.width && y < img.height {
                img.set_pixel(x, y, [self.rgb[3 * i], self.rgb[3 * i + 1], self.rgb[3 * i + 2]]);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroupOutput {
    pub group: u32,
    pub tiles: Vec<TileOutput>,
    pub counters: RasterCounters,
}

struct TileState {
    bit: u32,
    tx: u32,
    ty: u32,
    pixels: [PixelState; TILE_PIXELS],
    live: usize,
}

/// Rasterizes every member tile of `group` from the group's list.
pub fn rasterize_group(
    group: u32,
    lists: &SortedGroupLists,
    projected: &[ProjectedGaussian],
    cfg: &GroupConfig,
    mode: PrecisionMode,
    k: &RasterConstants,
    chunk_len: usize,
) -> GroupOutput {
    match mode {
        PrecisionMode::Fp32 => group_impl::<f32>(group, lists.group(group), projected, cfg, k, chunk_len),
        PrecisionMode::Fp16 => group_impl::<Half>(group, lists.group(group), projected, cfg, k, chunk_len),
    }
}

fn group_impl<T: Operand>(
    group: u32,
    list: &[GroupEntry],
    projected: &[ProjectedGaussian],
    cfg: &GroupConfig,
    k: &RasterConstants,
    chunk_len: usize,
) -> GroupOutput {
    assert!((1..=MAX_CHUNK).contains(&chunk_len), "chunk length must be in 1..=16");
    let ts = cfg.tile_size;
    let mut tiles: Vec<TileState> = cfg
        .group_tiles(group)
        .map(|(bit, tx, ty)| {
            let mut pixels = [PixelState::default(); TILE_PIXELS];
            let mut live = 0;
            for (i, px) in pixels.iter_mut().enumerate() {
                let x = tx * ts + (i % 16) as u32;
                let y = ty * ts + (i / 16) as u32;
                px.done = x >= cfg.width || y >= cfg.height;
                live += !px.done as usize;
            }
            TileState {
                bit,
                tx,
                ty,
                pixels,
                live,
            }
        })
        .collect();

    let mut counters = RasterCounters::default();
    // Lanes 3.. of the B operand stay zero for the whole group.
    let mut b = [[0.0f32; FRAG]; FRAG];
    let mut power = [[0.0f32; FRAG]; FRAG];

    for entries in list.chunks(chunk_len) {
        if tiles.iter().all(|t| t.live == 0) {
            break;
        }
        let chunk = GaussianChunk::<T>::stage(entries, projected);
        counters.chunk_loads += 1;
        counters.gaussian_loads += chunk.len() as u64;

        for tile in tiles.iter_mut().filter(|t| t.live > 0) {
            let (a, rows) = build_q_operand(&chunk, tile.bit);
            counters.skipped_pairs += (chunk.len() - rows.len()) as u64;
            if rows.is_empty() {
                continue;
            }
            let a = widen_fragment(&a);
            for panel in 0..PANELS {
                let panel_px = &mut tile.pixels[panel * FRAG..(panel + 1) * FRAG];
                if panel_px.iter().all(|p| p.done) {
                    continue;
                }
                counters.fragment_mma += 1;
                counters.total_lanes += (FRAG * FRAG * FRAG) as u64;
                counters.useful_lanes += (rows.len() * 3 * FRAG) as u64;
                counters.power_evals += (rows.len() * FRAG) as u64;

                for (r, &pos) in rows.iter().enumerate() {
                    let mean = chunk.entries[pos as usize].splat.mean;
                    for p in 0..FRAG {
                        let terms = quad_basis(panel_pixel((tile.tx, tile.ty), ts, panel, p), mean);
                        for (lane, t) in terms.iter().enumerate() {
                            b[lane][p] = t.widen();
                        }
                    }
                    power[r] = [0.0; FRAG];
                    row_product(&a[r], &b, &mut power[r]);
                }

                for (p, px) in panel_px.iter_mut().enumerate() {
                    if px.done {
                        continue;
                    }
                    for (r, &pos) in rows.iter().enumerate() {
                        let s = &chunk.entries[pos as usize].splat;
                        if let Some(alpha) = alpha_of(power[r][p], s.opacity.widen(), k) {
                            blend(px, alpha, s.color, k);
                            if px.done {
                                tile.live -= 1;
                                break;
                            }
                        }
                    }
                }
            }
        }
    }

    GroupOutput {
        group,
        tiles: tiles
            .iter()
            .map(|t| TileOutput::from_pixels(t.tx, t.ty, &t.pixels))
            .collect(),
        counters,
    }
}

/// Rasterizes all groups (in parallel) and assembles the image.
pub fn rasterize_groups(
    lists: &SortedGroupLists,
    projected: &[ProjectedGaussian],
    cfg: &GroupConfig,
    mode: PrecisionMode,
    k: &RasterConstants,
    chunk_len: usize,
) -> Result<(ImageBuffer, RasterCounters)> {
    if !(1..=MAX_CHUNK).contains(&chunk_len) {
        return Err(Error::Config(format!("chunk length {chunk_len} outside 1..={MAX_CHUNK}")));
    }
    if lists.num_groups() != cfg.num_groups() {
        return Err(Error::Config("group lists do not match the configuration".into()));
    }
    let outputs: Vec<GroupOutput> = (0..cfg.num_groups() as u32)
        .into_par_iter()
        .map(|g| rasterize_group(g, lists, projected, cfg, mode, k, chunk_len))
        .collect();
    let mut img = ImageBuffer::new(cfg.width as usize, cfg.height as usize);
    let mut counters = RasterCounters::default();
    for out in &outputs {
        for t in &out.tiles {
            t.write_into(&mut img);
        }
        counters.add(&out.counters);
    }
    img.finalize();
    Ok((img, counters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{fragment_mma, same_value, three_term, FragmentC};

    fn splat(mean2d: [f32; 2], conic: [f32; 3]) -> ProjectedGaussian {
        ProjectedGaussian {
            source: 0,
            mean2d,
            conic,
            cov2d: [0.0; 3],
            color: [0.2, 0.4, 0.6],
            opacity: 0.7,
            depth: 1.0,
            radius: 8,
        }
    }

    fn entry(i: u32, mask: u32) -> GroupEntry {
        GroupEntry {
            gaussian_index: i,
            depth: 1.0 + i as f32,
            mask,
        }
    }

    #[test]
    fn q_rows_hold_negated_conic_terms() {
        let projected = [splat([4.0, 4.0], [2.0, 1.0, 4.0])];
        let chunk = GaussianChunk::<Half>::stage(&[entry(0, 1)], &projected);
        let (a, rows) = build_q_operand(&chunk, 0);
        assert_eq!(rows.as_slice(), &[0]);
        let row: Vec<f32> = a.row(0).iter().map(|h| h.to_f32()).collect();
        assert_eq!(&row[..3], &[-1.0, -1.0, -2.0]);
        assert!(row[3..].iter().all(|&v| v == 0.0));
        assert!(a.padding_is_zero(true));
    }

    #[test]
    fn q_operand_filters_by_mask() {
        let projected: Vec<_> = (0..16).map(|i| splat([i as f32, 0.0], [0.1, 0.0, 0.1])).collect();
        let entries: Vec<_> = (0..16).map(|i| entry(i, if i % 3 == 0 { 0b10 } else { 0b01 })).collect();
        let chunk = GaussianChunk::<f32>::stage(&entries, &projected);
        let (a, rows) = build_q_operand(&chunk, 2);
        assert!(rows.is_empty());
        assert_eq!(a, FragmentA::<f32>::zeros());
        let (_, rows) = build_q_operand(&chunk, 1);
        assert_eq!(rows.as_slice(), &[0, 3, 6, 9, 12, 15]);
        let all: Vec<_> = (0..16).map(|i| entry(i, 0b1111)).collect();
        let (a, rows) = build_q_operand(&GaussianChunk::<f32>::stage(&all, &projected), 3);
        assert_eq!(rows.len(), 16);
        assert!((0..16).all(|r| a.get(r, 0) == -0.05));
    }

    #[test]
    fn phi_columns() {
        // Gaussian centered exactly on pixel (3, 0) of tile (0, 0).
        let b = build_phi_operand::<Half>((0, 0), 16, 0, &[[Half::from_f32(3.0), Half::from_f32(0.0)]]);
        let col = |p: usize| (0..FRAG).map(|k| b[0].get(k, p).to_f32()).collect::<Vec<_>>();
        assert!(col(3).iter().all(|&v| v == 0.0));
        // Pixel (5, 3) vs mean (3, 0): d = (2, 3).
        let b = build_phi_operand::<f32>((0, 0), 16, 3, &[[3.0, 0.0]]);
        let c: Vec<f32> = (0..FRAG).map(|k| b[0].get(k, 5)).collect();
        assert_eq!(&c[..3], &[4.0, 6.0, 9.0]);
        assert!(c[3..].iter().all(|&v| v == 0.0));
        assert!(b[0].padding_is_zero(false));
        // Pixels 1 and 5 mirror around x = 3.
        let b = build_phi_operand::<Half>((0, 0), 16, 7, &[[Half::from_f32(3.0), Half::from_f32(7.0)]]);
        let terms = |p: usize| (0..3).map(|k| b[0].get(k, p).to_f32()).collect::<Vec<_>>();
        assert_eq!(terms(1), terms(5));
    }

    /// The hot path must equal an explicit fragment_mma over the built operands.
    fn check_fragment_path<T: Operand>() {
        let projected: Vec<_> = (0..16)
            .map(|i| {
                let f = i as f32;
                splat([3.3 + f * 0.7, 5.1 + f * 0.4], [0.05 + f * 0.01, 0.01 * (f - 8.0), 0.08])
            })
            .collect();
        let entries: Vec<_> = (0..16).map(|i| entry(i, 1)).collect();
        let chunk = GaussianChunk::<T>::stage(&entries, &projected);
        let (a, rows) = build_q_operand(&chunk, 0);
        let means: Vec<_> = rows.iter().map(|&r| chunk.entries()[r as usize].splat.mean).collect();
        for panel in [0usize, 7, 15] {
            let bs = build_phi_operand((0, 0), 16, panel, &means);
            let aw = widen_fragment(&a);
            for (r, b) in bs.iter().enumerate() {
                let full = fragment_mma(&a, b, &FragmentC::default());
                let mut hot = [0.0; FRAG];
                row_product(&aw[r], &widen_fragment(b), &mut hot);
                for p in 0..FRAG {
                    assert_eq!(hot[p].to_bits(), full.values[r][p].to_bits());
                    let phi = [b.get(0, p), b.get(1, p), b.get(2, p)];
                    let s = chunk.entries()[rows[r] as usize].splat;
                    assert!(same_value(full.values[r][p], three_term(s.coeffs, phi)));
                    assert!(same_value(full.values[r][p], s.power_at(panel_pixel((0, 0), 16, panel, p))));
                }
            }
        }
    }

    #[test]
    fn fragment_path_matches_three_term_fp32() {
        check_fragment_path::<f32>();
    }

    #[test]
    fn fragment_path_matches_three_term_fp16() {
        check_fragment_path::<Half>();
    }

    #[test]
    fn empty_group_is_background() {
        let cfg = GroupConfig::square(64, 64, 2).unwrap();
        let lists = crate::binning::sort_entries(&[], cfg.num_groups()).unwrap();
        let out = rasterize_group(0, &lists, &[], &cfg, PrecisionMode::Fp16, &RasterConstants::default(), 16);
        assert_eq!(out.tiles.len(), 4);
        assert!(out.tiles.iter().all(|t| t.rgb.iter().all(|&v| v == 0.0)));
        assert_eq!(out.counters, RasterCounters::default());
    }
}
