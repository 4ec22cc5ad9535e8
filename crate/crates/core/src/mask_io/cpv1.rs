//! CPV1 volume format.
//!
//! Layout, in order:
//!
//! ```text
//! CPV1\n
//! dims <nx> <ny> <nz>\n
//! spacing <sx> <sy> <sz>\n
//! dtype u8|u16\n
//! end\n
//! <nx*ny*nz little-endian values, x fastest, then y, then z>
//! ```
//!
//! Spacing values are written with the shortest decimal representation that
//! round-trips the f64, so parse(encode(v)) == v exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mask_io::LabelVolume;

fn format_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Serialize a volume to CPV1 bytes. Uses the u8 payload dtype whenever all
/// labels fit, u16 otherwise.
pub fn encode(vol: &LabelVolume) -> Vec<u8> {
    let (nx, ny, nz) = vol.dims();
    let (sx, sy, sz) = vol.spacing();
    let use_u8 = vol.labels().iter().all(|&v| v <= u8::MAX as u16);
    let dtype = if use_u8 { "u8" } else { "u16" };
    let header = format!("CPV1\ndims {nx} {ny} {nz}\nspacing {sx} {sy} {sz}\ndtype {dtype}\nend\n");
    let mut bytes = header.into_bytes();
    if use_u8 {
        bytes.extend(vol.labels().iter().map(|&v| v as u8));
    } else {
        for &v in vol.labels() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

/// Parse CPV1 bytes. Every header line is validated with a diagnostic naming
/// the offending field; the payload must match the declared size exactly
/// (no truncation, no trailing bytes).
pub fn parse(path: &Path, bytes: &[u8]) -> Result<LabelVolume> {
    let mut cursor = 0usize;
    let mut next_line = |field: &str| -> Result<&str> {
        let rest = &bytes[cursor.min(bytes.len())..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| format_err(path, format!("missing {field} header line")))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| format_err(path, format!("{field} line is not valid ASCII")))?;
        cursor += end + 1;
        Ok(line)
    };

    let magic = next_line("magic")?;
    if magic != "CPV1" {
        return Err(format_err(path, format!("bad magic line {magic:?}")));
    }

    let dims_line = next_line("dims")?;
    let dims = parse_triple(path, dims_line, "dims", |tok| {
        tok.parse::<usize>().ok().filter(|&v| v > 0)
    })?;

    let spacing_line = next_line("spacing")?;
    let spacing = parse_triple(path, spacing_line, "spacing", |tok| {
        tok.parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0)
    })?;

    let dtype_line = next_line("dtype")?;
    let dtype = dtype_line
        .strip_prefix("dtype ")
        .ok_or_else(|| format_err(path, format!("bad dtype line {dtype_line:?}")))?;
    let elem_size = match dtype {
        "u8" => 1usize,
        "u16" => 2usize,
        other => return Err(format_err(path, format!("unsupported dtype {other:?}"))),
    };

    let end_line = next_line("end")?;
    if end_line != "end" {
        return Err(format_err(path, format!("bad end line {end_line:?}")));
    }

    let n_voxels = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or_else(|| format_err(path, "dims overflow"))?;
    let payload = &bytes[cursor..];
    let expected = n_voxels
        .checked_mul(elem_size)
        .ok_or_else(|| format_err(path, "payload size overflow"))?;
    if payload.len() < expected {
        return Err(format_err(
            path,
            format!(
                "payload truncated: dims declare {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(format_err(
            path,
            format!(
                "payload has {} trailing bytes beyond the declared {expected}",
                payload.len() - expected
            ),
        ));
    }

    let labels: Vec<u16> = match elem_size {
        1 => payload.iter().map(|&b| b as u16).collect(),
        _ => payload
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect(),
    };

    LabelVolume::new(
        (dims[0], dims[1], dims[2]),
        (spacing[0], spacing[1], spacing[2]),
        labels,
    )
}

fn parse_triple<T: Copy>(
    path: &Path,
    line: &str,
    field: &str,
    parse_tok: impl Fn(&str) -> Option<T>,
) -> Result<[T; 3]> {
    let mut parts = line.split_ascii_whitespace();
    if parts.next() != Some(field) {
        return Err(format_err(path, format!("bad {field} line {line:?}")));
    }
    let mut out = Vec::with_capacity(3);
    for tok in parts {
        out.push(
            parse_tok(tok)
                .ok_or_else(|| format_err(path, format!("bad {field} value {tok:?}")))?,
        );
    }
    <[T; 3]>::try_from(out)
        .map_err(|_| format_err(path, format!("{field} line must have exactly 3 values")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.cpv")
    }

    #[test]
    fn minimal_well_formed_file() {
        let bytes = b"CPV1\ndims 2 2 1\nspacing 1 1 1\ndtype u8\nend\n\x00\x01\x01\x02";
        let vol = parse(p(), bytes).unwrap();
        assert_eq!(vol.dims(), (2, 2, 1));
        assert_eq!(vol.spacing(), (1.0, 1.0, 1.0));
        assert_eq!(vol.labels(), &[0, 1, 1, 2]);
        assert_eq!(vol.present_labels(), vec![1, 2]);
    }

    #[test]
    fn truncated_payload_errors() {
        // header declares 8 voxels, payload carries 7
        let bytes = b"CPV1\ndims 2 2 2\nspacing 1 1 1\ndtype u8\nend\n\x00\x00\x00\x00\x00\x00\x00";
        let err = parse(p(), bytes).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn trailing_bytes_error() {
        let bytes = b"CPV1\ndims 1 1 1\nspacing 1 1 1\ndtype u8\nend\n\x00\x00";
        let err = parse(p(), bytes).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }

    #[test]
    fn diagnostics_name_the_field() {
        let cases: [(&[u8], &str); 5] = [
            (b"CPV2\ndims 1 1 1\nspacing 1 1 1\ndtype u8\nend\n\x00", "magic"),
            (b"CPV1\ndims 0 1 1\nspacing 1 1 1\ndtype u8\nend\n", "dims"),
            (b"CPV1\ndims 1 1 1\nspacing 1 -2 1\ndtype u8\nend\n\x00", "spacing"),
            (b"CPV1\ndims 1 1 1\nspacing 1 1 1\ndtype f32\nend\n\x00", "dtype"),
            (b"CPV1\ndims 1 1 1\nspacing 1 1 1\ndtype u8\nfin\n\x00", "end"),
        ];
        for (bytes, field) in cases {
            let err = parse(p(), bytes).unwrap_err();
            assert!(err.to_string().contains(field), "{field}: {err}");
        }
    }

    #[test]
    fn u16_payload_round_trip() {
        let vol = LabelVolume::new((2, 1, 1), (0.5, 0.5, 2.0), vec![300, 0]).unwrap();
        let back = parse(p(), &encode(&vol)).unwrap();
        assert_eq!(back, vol);
    }

    #[test]
    fn non_integer_spacing_round_trips_exactly() {
        let vol = LabelVolume::new((1, 1, 1), (1.25, 0.9, 1.0 / 3.0), vec![1]).unwrap();
        let back = parse(p(), &encode(&vol)).unwrap();
        assert_eq!(back.spacing(), vol.spacing());
    }
}
