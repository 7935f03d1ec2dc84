//! Image comparison, cross-tile reuse statistics and operation reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::binning::{
    encode_entry, GroupConfig, GroupEntry, ENTRY_MASK_BYTES, ENTRY_PAYLOAD_BYTES, SERIALIZED_ENTRY_BYTES,
};
use crate::error::{Error, Result};
use crate::projection::ProjectedGaussian;
use crate::raster::{PrecisionMode, RasterCounters};
use crate::render::Backend;
use crate::scene::ImageBuffer;

/// Reported for identical images instead of +inf.
pub const PSNR_CAP_DB: f64 = 99.0;

fn check_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// Peak-1.0 PSNR in decibels over all channels, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.rgb.len().max(1) as f64;
    let mse = a
        .rgb
        .iter()
        .zip(&b.rgb)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxDiff {
    pub value: f32,
    pub x: usize,
    pub y: usize,
    pub channel: usize,
}

/// Largest per-channel absolute difference and its first row-major location.
pub fn max_abs_diff(a: &ImageBuffer, b: &ImageBuffer) -> Result<MaxDiff> {
    check_dims(a, b)?;
    let mut best = MaxDiff {
        value: 0.0,
        x: 0,
        y: 0,
        channel: 0,
    };
    for (i, (&x, &y)) in a.rgb.iter().zip(&b.rgb).enumerate() {
        let d = (x - y).abs();
        if d > best.value {
            let px = i / 3;
            best = MaxDiff {
                value: d,
                x: px % a.width,
                y: px / a.width,
                channel: i % 3,
            };
        }
    }
    Ok(best)
}

/// Gaussian loading statistics for one grouping.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReuseReport {
    pub group_h: u32,
    pub group_w: u32,
    /// Tile-level appearances: the sum of mask popcounts.
    pub n_total: u64,
    /// Group-level entries.
    pub n_group: u64,
    /// `1 - n_group / n_total`.
    pub load_reduction: f64,
    /// `popcount_histogram[k]` = entries whose mask has `k` bits set.
    pub popcount_histogram: Vec<u64>,
}

impl ReuseReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "group={}x{}", self.group_h, self.group_w);
        let _ = writeln!(s, "n_total={}", self.n_total);
        let _ = writeln!(s, "n_group={}", self.n_group);
        let _ = writeln!(s, "load_reduction={:.6}", self.load_reduction);
        let hist: Vec<String> = self
            .popcount_histogram
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, n)| format!("{k}:{n}"))
            .collect();
        let _ = writeln!(s, "mask_popcount_hist={}", hist.join(","));
        s
    }
}

pub fn load_reduction(entries: &[(u32, GroupEntry)], cfg: &GroupConfig) -> Result<ReuseReport> {
    if entries.is_empty() {
        return Err(Error::EmptyEntries);
    }
    let mut hist = vec![0u64; cfg.tiles_per_group() as usize + 1];
    let mut n_total = 0u64;
    for (_, e) in entries {
        let bits = e.mask.count_ones();
        n_total += bits as u64;
        hist[bits as usize] += 1;
    }
    let n_group = entries.len() as u64;
    Ok(ReuseReport {
        group_h: cfg.group_h,
        group_w: cfg.group_w,
        n_total,
        n_group,
        load_reduction: 1.0 - n_group as f64 / n_total as f64,
        popcount_histogram: hist,
    })
}

/// Independent tile-appearance count: tests every tile of the grid against
/// every Gaussian's pixel bounding box.
pub fn brute_force_tile_appearances(projected: &[ProjectedGaussian], cfg: &GroupConfig) -> u64 {
    let ts = cfg.tile_size as f32;
    let mut n = 0;
    for p in projected {
        let r = p.radius as f32;
        let (lx, hx) = (p.mean2d[0] - r, p.mean2d[0] + r);
        let (ly, hy) = (p.mean2d[1] - r, p.mean2d[1] + r);
        for ty in 0..cfg.tiles_y() {
            for tx in 0..cfg.tiles_x() {
                let (x0, y0) = (tx as f32 * ts, ty as f32 * ts);
                if lx < x0 + ts && hx >= x0 && ly < y0 + ts && hy >= y0 {
                    n += 1;
                }
            }
        }
    }
    n
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntryOverhead {
    pub payload_bytes: usize,
    pub mask_bytes: usize,
    pub fraction: f64,
}

/// Storage cost of the membership mask relative to the entry payload, read
/// off the serializer's actual record size.
pub fn entry_overhead(cfg: &GroupConfig) -> Result<EntryOverhead> {
    let bits = cfg.tiles_per_group();
    if bits > 8 * ENTRY_MASK_BYTES as u32 {
        return Err(Error::Config(format!(
            "{}x{} group needs {bits} mask bits but the serialized mask field holds {}",
            cfg.group_h,
            cfg.group_w,
            8 * ENTRY_MASK_BYTES
        )));
    }
    let probe = ProjectedGaussian {
        source: 0,
        mean2d: [0.0; 2],
        conic: [1.0, 0.0, 1.0],
        cov2d: [1.0, 0.0, 1.0],
        color: [0.0; 3],
        opacity: 1.0,
        depth: 1.0,
        radius: 1,
    };
    let full_mask = if bits == 32 { u32::MAX } else { (1u32 << bits) - 1 };
    let record = encode_entry(
        &GroupEntry {
            gaussian_index: 0,
            depth: 1.0,
            mask: full_mask,
        },
        &probe,
    )?;
    debug_assert_eq!(record.len(), SERIALIZED_ENTRY_BYTES);
    let mask_bytes = record.len() - ENTRY_PAYLOAD_BYTES;
    Ok(EntryOverhead {
        payload_bytes: ENTRY_PAYLOAD_BYTES,
        mask_bytes,
        fraction: mask_bytes as f64 / ENTRY_PAYLOAD_BYTES as f64,
    })
}

/// Operation-count summary of one render.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpReport {
    pub backend: Backend,
    pub precision: PrecisionMode,
    pub group: u32,
    pub chunk_len: usize,
    pub projected: usize,
    pub culled: usize,
    pub degenerate: usize,
    pub entries: usize,
    #[serde(flatten)]
    pub counters: RasterCounters,
    pub padding_waste_ratio: f64,
}

impl OpReport {
    pub fn to_kv(&self) -> String {
        let c = &self.counters;
        let mut s = String::new();
        let _ = writeln!(s, "backend={}", self.backend);
        let _ = writeln!(s, "precision={}", self.precision);
        let _ = writeln!(s, "group={}", self.group);
        let _ = writeln!(s, "chunk_len={}", self.chunk_len);
        let _ = writeln!(s, "projected={}", self.projected);
        let _ = writeln!(s, "culled={}", self.culled);
        let _ = writeln!(s, "degenerate={}", self.degenerate);
        let _ = writeln!(s, "entries={}", self.entries);
        let _ = writeln!(s, "chunk_loads={}", c.chunk_loads);
        let _ = writeln!(s, "gaussian_loads={}", c.gaussian_loads);
        let _ = writeln!(s, "fragment_mma={}", c.fragment_mma);
        let _ = writeln!(s, "skipped_pairs={}", c.skipped_pairs);
        let _ = writeln!(s, "power_evals={}", c.power_evals);
        let _ = writeln!(s, "padding_waste_ratio={:.6}", self.padding_waste_ratio);
        s
    }
}
