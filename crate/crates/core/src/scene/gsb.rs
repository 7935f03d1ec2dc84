//! `.gsb` binary scene files.
//!
//! Little-endian throughout. A 16-byte header (`b"GSB1"`, `u32` count,
//! `u32` SH degree, `u32` reserved = 0) is followed by `count` fixed-size
//! records: mean `f32 x3`, scale `f32 x3`, quaternion `f32 x4` (w, x, y, z),
//! opacity `f32`, DC color `f32 x3`, and 45 further `f32` SH coefficients
//! when the degree is 3.

use std::path::Path;

use super::{normalize_quaternion, Gaussian3D, SH_REST_LEN};
use crate::error::{Error, Result};

pub const GSB_MAGIC: [u8; 4] = *b"GSB1";
pub const GSB_HEADER_BYTES: usize = 16;

const BASE_FLOATS: usize = 14;

fn record_bytes(degree: u32) -> usize {
    4 * if degree == 3 {
        BASE_FLOATS + SH_REST_LEN
    } else {
        BASE_FLOATS
    }
}

/// Serializes a scene. All Gaussians must agree on whether they carry
/// higher-order SH coefficients.
pub fn encode_scene(gaussians: &[Gaussian3D]) -> Result<Vec<u8>> {
    let degree = gaussians.first().map_or(0, Gaussian3D::sh_degree);
    if let Some(i) = gaussians.iter().position(|g| g.sh_degree() != degree) {
        return Err(Error::InvalidRecord {
            index: i,
            msg: format!("SH degree {} differs from the scene degree {degree}", gaussians[i].sh_degree()),
        });
    }
    let mut out = Vec::with_capacity(GSB_HEADER_BYTES + gaussians.len() * record_bytes(degree));
    out.extend_from_slice(&GSB_MAGIC);
    out.extend_from_slice(&(gaussians.len() as u32).to_le_bytes());
    out.extend_from_slice(&degree.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for g in gaussians {
        let fields = g
            .mean
            .iter()
            .chain(&g.scale)
            .chain(&g.rotation)
            .chain(std::iter::once(&g.opacity))
            .chain(&g.sh_dc)
            .chain(g.sh_rest.iter().flat_map(|r| r.iter()));
        for v in fields {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Parses a serialized scene, renormalizing quaternions and validating each
/// record.
pub fn decode_scene(bytes: &[u8]) -> Result<Vec<Gaussian3D>> {
    if bytes.len() < GSB_HEADER_BYTES {
        return Err(Error::byte(bytes.len() as u64, "truncated header"));
    }
    if bytes[..4] != GSB_MAGIC {
        return Err(Error::byte(0, format!("bad magic {:02x?}", &bytes[..4])));
    }
    let count = read_u32(bytes, 4) as usize;
    let degree = read_u32(bytes, 8);
    if degree != 0 && degree != 3 {
        return Err(Error::byte(8, format!("unsupported SH degree {degree}")));
    }
    if read_u32(bytes, 12) != 0 {
        return Err(Error::byte(12, "reserved header field must be zero"));
    }
    let rec = record_bytes(degree);
    let payload = &bytes[GSB_HEADER_BYTES..];
    let needed = count as u64 * rec as u64;
    if (payload.len() as u64) < needed {
        let complete = payload.len() / rec;
        let offset = GSB_HEADER_BYTES + complete * rec;
        return Err(Error::byte(
            offset as u64,
            format!("truncated payload: record {complete} of {count} is incomplete"),
        ));
    }
    if payload.len() as u64 > needed {
        return Err(Error::byte(
            GSB_HEADER_BYTES as u64 + needed,
            "trailing bytes after the last record",
        ));
    }

    let mut out = Vec::with_capacity(count);
    for (index, chunk) in payload.chunks_exact(rec).enumerate() {
        let f: Vec<f32> = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let sh_rest = (degree == 3).then(|| {
            let mut rest = Box::new([0.0f32; SH_REST_LEN]);
            rest.copy_from_slice(&f[BASE_FLOATS..]);
            rest
        });
        let mut g = Gaussian3D {
            mean: [f[0], f[1], f[2]],
            scale: [f[3], f[4], f[5]],
            rotation: [f[6], f[7], f[8], f[9]],
            opacity: f[10],
            sh_dc: [f[11], f[12], f[13]],
            sh_rest,
        };
        g.validate(index)?;
        g.rotation = normalize_quaternion(g.rotation);
        out.push(g);
    }
    Ok(out)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Vec<Gaussian3D>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_scene(&bytes)
}

pub fn save_scene(gaussians: &[Gaussian3D], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_scene(gaussians)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
