//! Read-only subset of NIfTI-1: single-file (`n+1` magic), uncompressed,
//! integer data types. Both byte orders are accepted. Only dims and voxel
//! spacing (pixdim) are taken from the header; orientation is ignored
//! because all downstream quantities are voxel-count based.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mask_io::LabelVolume;

const HEADER_SIZE: usize = 348;

// header field offsets
const OFF_SIZEOF_HDR: usize = 0;
const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_MAGIC: usize = 344;

pub fn looks_like_nifti(bytes: &[u8]) -> bool {
    bytes.len() >= HEADER_SIZE && {
        let v = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
        v == 348 || v.swap_bytes() == 348
    }
}

fn format_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    swapped: bool,
}

impl<'a> Header<'a> {
    fn i16_at(&self, off: usize) -> i16 {
        let v = i16::from_le_bytes(self.bytes[off..off + 2].try_into().unwrap());
        if self.swapped {
            v.swap_bytes()
        } else {
            v
        }
    }

    fn f32_at(&self, off: usize) -> f32 {
        let raw = u32::from_le_bytes(self.bytes[off..off + 4].try_into().unwrap());
        f32::from_bits(if self.swapped { raw.swap_bytes() } else { raw })
    }
}

pub fn parse(path: &Path, bytes: &[u8]) -> Result<LabelVolume> {
    if bytes.len() < HEADER_SIZE {
        return Err(format_err(
            path,
            format!("file too small for a NIfTI-1 header ({} bytes)", bytes.len()),
        ));
    }
    let sizeof_le = i32::from_le_bytes(bytes[OFF_SIZEOF_HDR..4].try_into().unwrap());
    let swapped = match sizeof_le {
        348 => false,
        v if v.swap_bytes() == 348 => true,
        v => return Err(format_err(path, format!("sizeof_hdr is {v}, expected 348"))),
    };
    let hdr = Header { bytes, swapped };

    let magic = &bytes[OFF_MAGIC..OFF_MAGIC + 4];
    if magic != b"n+1\0" {
        return Err(format_err(
            path,
            format!("magic is {magic:?}, only single-file n+1 volumes are supported"),
        ));
    }

    let ndim = hdr.i16_at(OFF_DIM);
    if !(1..=7).contains(&ndim) {
        return Err(format_err(path, format!("dim[0] is {ndim}, expected 1..=7")));
    }
    let mut dims = [1usize; 7];
    for (i, d) in dims.iter_mut().enumerate().take(ndim as usize) {
        let v = hdr.i16_at(OFF_DIM + 2 * (i + 1));
        if v < 1 {
            return Err(format_err(path, format!("dim[{}] is {v}, must be >= 1", i + 1)));
        }
        *d = v as usize;
    }
    if dims[3..].iter().any(|&d| d != 1) {
        return Err(format_err(
            path,
            "volumes with more than 3 non-singleton dimensions are not supported",
        ));
    }
    let (nx, ny, nz) = (dims[0], dims[1], dims[2]);

    let mut spacing = [0f64; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        let v = hdr.f32_at(OFF_PIXDIM + 4 * (i + 1)) as f64;
        if !(v.is_finite() && v > 0.0) {
            return Err(format_err(
                path,
                format!("pixdim[{}] is {v}, spacing must be strictly positive", i + 1),
            ));
        }
        *s = v;
    }

    let datatype = hdr.i16_at(OFF_DATATYPE);
    let elem_size = match datatype {
        2 | 256 => 1usize,        // uint8 / int8
        4 | 512 => 2usize,        // int16 / uint16
        8 | 768 => 4usize,        // int32 / uint32
        16 | 64 => {
            return Err(format_err(
                path,
                format!("datatype {datatype} is floating point; only integer label volumes are supported"),
            ))
        }
        other => {
            return Err(format_err(
                path,
                format!("unsupported datatype code {other}"),
            ))
        }
    };
    let signed = matches!(datatype, 4 | 8 | 256);

    let vox_offset = hdr.f32_at(OFF_VOX_OFFSET);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32) {
        return Err(format_err(
            path,
            format!("vox_offset is {vox_offset}, must be >= {HEADER_SIZE}"),
        ));
    }
    let offset = vox_offset as usize;

    let n_voxels = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .ok_or_else(|| format_err(path, "dims overflow"))?;
    let payload_len = n_voxels
        .checked_mul(elem_size)
        .ok_or_else(|| format_err(path, "payload size overflow"))?;
    let end = offset
        .checked_add(payload_len)
        .ok_or_else(|| format_err(path, "payload extent overflow"))?;
    if bytes.len() < end {
        return Err(format_err(
            path,
            format!(
                "payload truncated: need {payload_len} bytes at offset {offset}, file has {}",
                bytes.len()
            ),
        ));
    }
    let payload = &bytes[offset..end];

    let mut labels = Vec::with_capacity(n_voxels);
    match elem_size {
        1 => {
            for &b in payload {
                if signed && b > i8::MAX as u8 {
                    return Err(format_err(path, format!("negative int8 label value {}", b as i8)));
                }
                labels.push(b as u16);
            }
        }
        2 => {
            for c in payload.chunks_exact(2) {
                let raw = u16::from_le_bytes([c[0], c[1]]);
                let raw = if swapped { raw.swap_bytes() } else { raw };
                if signed && raw > i16::MAX as u16 {
                    return Err(format_err(
                        path,
                        format!("negative int16 label value {}", raw as i16),
                    ));
                }
                labels.push(raw);
            }
        }
        _ => {
            for c in payload.chunks_exact(4) {
                let raw = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let raw = if swapped { raw.swap_bytes() } else { raw };
                let v = if signed {
                    let v = raw as i32;
                    if v < 0 {
                        return Err(format_err(path, format!("negative int32 label value {v}")));
                    }
                    v as u32
                } else {
                    raw
                };
                if v > u16::MAX as u32 {
                    return Err(format_err(
                        path,
                        format!("label value {v} does not fit in 16 bits"),
                    ));
                }
                labels.push(v as u16);
            }
        }
    }

    LabelVolume::new((nx, ny, nz), (spacing[0], spacing[1], spacing[2]), labels)
}
