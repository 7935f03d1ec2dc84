//! Tile and tile-group binning.
//!
//! Each projected Gaussian emits one entry per tile group its bounding box
//! touches. The entry carries a membership mask with bit `r * group_w + c`
//! set for every overlapped member tile at local row `r`, column `c`. Entries
//! are then ordered by the 64-bit key `(group_id << 32) | depth_bits`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::Half;
use crate::projection::ProjectedGaussian;

pub const TILE_SIZE: u32 = 16;

/// Largest mask that fits the `u32` mask word.
pub const MAX_GROUP_TILES: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupConfig {
    pub tile_size: u32,
    pub group_h: u32,
    pub group_w: u32,
    pub width: u32,
    pub height: u32,
}

impl GroupConfig {
    /// Square `group x group` tiles over a `width x height` image.
    pub fn square(width: u32, height: u32, group: u32) -> Result<Self> {
        Self::new(width, height, group, group)
    }

    pub fn new(width: u32, height: u32, group_h: u32, group_w: u32) -> Result<Self> {
        let cfg = GroupConfig {
            tile_size: TILE_SIZE,
            group_h,
            group_w,
            width,
            height,
        };
        if group_h == 0 || group_w == 0 {
            return Err(Error::Config("group dimensions must be non-zero".into()));
        }
        if group_h * group_w > MAX_GROUP_TILES {
            return Err(Error::Config(format!(
                "{group_h}x{group_w} group needs {} mask bits; at most {MAX_GROUP_TILES} are supported",
                group_h * group_w
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config("image dimensions must be non-zero".into()));
        }
        Ok(cfg)
    }

    pub fn tiles_x(&self) -> u32 {
        self.width.div_ceil(self.tile_size)
    }

    pub fn tiles_y(&self) -> u32 {
        self.height.div_ceil(self.tile_size)
    }

    pub fn groups_x(&self) -> u32 {
        self.tiles_x().div_ceil(self.group_w)
    }

    pub fn groups_y(&self) -> u32 {
        self.tiles_y().div_ceil(self.group_h)
    }

    pub fn num_groups(&self) -> usize {
        (self.groups_x() * self.groups_y()) as usize
    }

    pub fn tiles_per_group(&self) -> u32 {
        self.group_h * self.group_w
    }

    /// `(group_id, mask bit)` of a tile.
    pub fn locate_tile(&self, tx: u32, ty: u32) -> (u32, u32) {
        let (gx, gy) = (tx / self.group_w, ty / self.group_h);
        let bit = (ty % self.group_h) * self.group_w + tx % self.group_w;
        (gy * self.groups_x() + gx, bit)
    }

    /// Member tiles of a group that lie on the tile grid, as
    /// `(mask bit, tile x, tile y)` in bit order.
    pub fn group_tiles(&self, group: u32) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        let (gx, gy) = (group % self.groups_x(), group / self.groups_x());
        (0..self.group_h).flat_map(move |r| {
            (0..self.group_w).filter_map(move |c| {
                let tx = gx * self.group_w + c;
                let ty = gy * self.group_h + r;
                (tx < self.tiles_x() && ty < self.tiles_y()).then_some((r * self.group_w + c, tx, ty))
            })
        })
    }
}

/// Inclusive tile-coordinate rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl TileRect {
    pub fn count(&self) -> u64 {
        (self.x1 - self.x0 + 1) as u64 * (self.y1 - self.y0 + 1) as u64
    }

    pub fn contains(&self, tx: u32, ty: u32) -> bool {
        (self.x0..=self.x1).contains(&tx) && (self.y0..=self.y1).contains(&ty)
    }
}

fn tile_span(center: f32, radius: f32, tile: u32, n_tiles: u32) -> Option<(u32, u32)> {
    let lo = ((center - radius) / tile as f32).floor();
    let hi = ((center + radius) / tile as f32).floor();
    if !(hi >= 0.0 && lo <= (n_tiles - 1) as f32) {
        return None;
    }
    Some((lo.max(0.0) as u32, hi.min((n_tiles - 1) as f32) as u32))
}

/// Tiles intersecting the square `[mean - radius, mean + radius]`, clipped to
/// the tile grid. `None` when the box misses the grid entirely.
pub fn tiles_overlapped(p: &ProjectedGaussian, cfg: &GroupConfig) -> Option<TileRect> {
    let r = p.radius as f32;
    let (x0, x1) = tile_span(p.mean2d[0], r, cfg.tile_size, cfg.tiles_x())?;
    let (y0, y1) = tile_span(p.mean2d[1], r, cfg.tile_size, cfg.tiles_y())?;
    Some(TileRect { x0, y0, x1, y1 })
}

/// Sum over Gaussians of the number of tiles each one touches: the entry
/// count of an ungrouped per-tile pipeline.
pub fn tile_duplication_count(projected: &[ProjectedGaussian], cfg: &GroupConfig) -> u64 {
    projected
        .iter()
        .filter_map(|p| tiles_overlapped(p, cfg))
        .map(|r| r.count())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupEntry {
    pub gaussian_index: u32,
    pub depth: f32,
    pub mask: u32,
}

fn entries_for(index: u32, p: &ProjectedGaussian, cfg: &GroupConfig) -> Vec<(u32, GroupEntry)> {
    let Some(rect) = tiles_overlapped(p, cfg) else {
        return Vec::new();
    };
    let (gw, gh) = (cfg.group_w, cfg.group_h);
    let mut out = Vec::new();
    for gy in rect.y0 / gh..=rect.y1 / gh {
        for gx in rect.x0 / gw..=rect.x1 / gw {
            let mut mask = 0u32;
            for ty in rect.y0.max(gy * gh)..=rect.y1.min(gy * gh + gh - 1) {
                for tx in rect.x0.max(gx * gw)..=rect.x1.min(gx * gw + gw - 1) {
                    mask |= 1 << ((ty - gy * gh) * gw + (tx - gx * gw));
                }
            }
            out.push((
                gy * cfg.groups_x() + gx,
                GroupEntry {
                    gaussian_index: index,
                    depth: p.depth,
                    mask,
                },
            ));
        }
    }
    out
}

/// One entry per (Gaussian, overlapped group), ordered by Gaussian index and
/// then group id.
pub fn build_group_entries(projected: &[ProjectedGaussian], cfg: &GroupConfig) -> Vec<(u32, GroupEntry)> {
    let per: Vec<Vec<(u32, GroupEntry)>> = projected
        .par_iter()
        .enumerate()
        .map(|(i, p)| entries_for(i as u32, p, cfg))
        .collect();
    per.concat()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GroupRange {
    pub offset: u32,
    pub len: u32,
}

/// Flat depth-ordered entry array with a range per group.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SortedGroupLists {
    pub entries: Vec<GroupEntry>,
    pub ranges: Vec<GroupRange>,
}

impl SortedGroupLists {
    pub fn group(&self, group: u32) -> &[GroupEntry] {
        let r = self.ranges[group as usize];
        &self.entries[r.offset as usize..(r.offset + r.len) as usize]
    }

    pub fn num_groups(&self) -> usize {
        self.ranges.len()
    }
}

pub fn sort_key(group: u32, depth: f32) -> u64 {
    ((group as u64) << 32) | depth.to_bits() as u64
}

/// Stable LSD radix sort by 8-bit digits; passes where every key shares the
/// digit are skipped.
pub fn radix_sort_by_key<T: Copy>(items: &mut Vec<(u64, T)>) {
    if items.len() < 2 {
        return;
    }
    let mut buf = items.clone();
    for pass in 0..8 {
        let shift = pass * 8;
        let mut counts = [0usize; 256];
        for (k, _) in items.iter() {
            counts[((k >> shift) & 0xFF) as usize] += 1;
        }
        if counts.contains(&items.len()) {
            continue;
        }
        let mut offsets = [0usize; 256];
        let mut acc = 0;
        for (o, c) in offsets.iter_mut().zip(counts) {
            *o = acc;
            acc += c;
        }
        for item in items.iter() {
            let d = ((item.0 >> shift) & 0xFF) as usize;
            buf[offsets[d]] = *item;
            offsets[d] += 1;
        }
        std::mem::swap(items, &mut buf);
    }
}

/// Orders entries by `(group_id, depth)` with ties kept in input order, and
/// computes per-group ranges for `num_groups` groups.
pub fn sort_entries(entries: &[(u32, GroupEntry)], num_groups: usize) -> Result<SortedGroupLists> {
    let mut keyed = Vec::with_capacity(entries.len());
    for (i, (group, e)) in entries.iter().enumerate() {
        if !e.depth.is_finite() || e.depth.is_sign_negative() {
            return Err(Error::InvalidDepth { index: i, depth: e.depth });
        }
        if *group as usize >= num_groups {
            return Err(Error::Config(format!("entry {i} names group {group} of {num_groups}")));
        }
        keyed.push((sort_key(*group, e.depth), *e));
    }
    radix_sort_by_key(&mut keyed);

    let mut ranges = vec![GroupRange::default(); num_groups];
    for (pos, (key, _)) in keyed.iter().enumerate() {
        let r = &mut ranges[(key >> 32) as usize];
        if r.len == 0 {
            r.offset = pos as u32;
        }
        r.len += 1;
    }
    // Empty groups point at the end of their predecessor.
    let mut next = 0;
    for r in &mut ranges {
        if r.len == 0 {
            r.offset = next;
        }
        next = r.offset + r.len;
    }
    Ok(SortedGroupLists {
        entries: keyed.into_iter().map(|(_, e)| e).collect(),
        ranges,
    })
}

/// Bytes of the fixed entry payload: center `2 x f16`, conic and opacity
/// `4 x f16`, Gaussian id `u32`.
pub const ENTRY_PAYLOAD_BYTES: usize = 16;
pub const ENTRY_MASK_BYTES: usize = 1;
pub const SERIALIZED_ENTRY_BYTES: usize = ENTRY_PAYLOAD_BYTES + ENTRY_MASK_BYTES;

/// Decoded form of a serialized entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PackedEntry {
    pub mean2d: [Half; 2],
    pub conic_opacity: [Half; 4],
    pub gaussian_id: u32,
    pub mask: u8,
}

/// Little-endian 17-byte record for the stats tooling.
pub fn encode_entry(entry: &GroupEntry, splat: &ProjectedGaussian) -> Result<[u8; SERIALIZED_ENTRY_BYTES]> {
    let mask = u8::try_from(entry.mask)
        .map_err(|_| Error::Config(format!("mask {:#x} does not fit the 8-bit mask field", entry.mask)))?;
    let mut out = [0u8; SERIALIZED_ENTRY_BYTES];
    let halves = [
        splat.mean2d[0],
        splat.mean2d[1],
        splat.conic[0],
        splat.conic[1],
        splat.conic[2],
        splat.opacity,
    ];
    for (i, v) in halves.into_iter().enumerate() {
        out[2 * i..2 * i + 2].copy_from_slice(&Half::from_f32(v).to_bits().to_le_bytes());
    }
    out[12..16].copy_from_slice(&entry.gaussian_index.to_le_bytes());
    out[16] = mask;
    Ok(out)
}

pub fn decode_entry(bytes: &[u8; SERIALIZED_ENTRY_BYTES]) -> PackedEntry {
    let h = |i: usize| Half::from_bits(u16::from_le_bytes([bytes[2 * i], bytes[2 * i + 1]]));
    PackedEntry {
        mean2d: [h(0), h(1)],
        conic_opacity: [h(2), h(3), h(4), h(5)],
        gaussian_id: u32::from_le_bytes(bytes[12..16].try_into().unwrap()),
        mask: bytes[16],
    }
}
