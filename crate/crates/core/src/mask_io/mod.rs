//! Parsing and validation of segmentation volumes and dataset manifests.
//!
//! Two on-disk volume formats are understood:
//!
//! * CPV1 — a minimal self-describing binary format (ASCII header lines for
//!   dims/spacing/dtype followed by a raw little-endian payload). This is the
//!   only format [`write_volume`] emits, and it round-trips bit-exactly.
//! * A read-only subset of NIfTI-1: single-file, uncompressed, integer data
//!   types; the header is used solely to extract dims and voxel spacing.
//!
//! Format detection is by content (magic bytes), not file extension.

mod cpv1;
mod manifest;
mod nifti;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use manifest::{
    load_manifest, load_precomputed_csv, DatasetManifest, LabelMap, MethodSamples, PrecomputedKey,
    ScanEntry, SubjectEntry, DEFAULT_LABEL_LVBP, DEFAULT_LABEL_MYO, DEFAULT_LABEL_RVBP,
};

/// Dense 3D integer label grid with per-axis voxel spacing in millimeters.
///
/// Storage is x-fastest (index `x + nx*(y + ny*z)`), value 0 is background.
/// Instances are immutable after construction and safe to share across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    labels: Vec<u16>,
}

impl LabelVolume {
    /// Build a volume, checking every invariant: positive dims, strictly
    /// positive finite spacing, and a label array of exactly `nx*ny*nz`
    /// entries.
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        labels: Vec<u16>,
    ) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Volume(format!(
                "dims must be positive, got ({nx}, {ny}, {nz})"
            )));
        }
        let expected = nx
            .checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| Error::Volume(format!("dims ({nx}, {ny}, {nz}) overflow")))?;
        if labels.len() != expected {
            return Err(Error::Volume(format!(
                "label array has {} entries, dims ({nx}, {ny}, {nz}) require {expected}",
                labels.len()
            )));
        }
        for (axis, s) in [("sx", spacing.0), ("sy", spacing.1), ("sz", spacing.2)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Volume(format!(
                    "spacing {axis} must be strictly positive and finite, got {s}"
                )));
            }
        }
        Ok(Self {
            dims,
            spacing,
            labels,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Volume of one voxel in cubic millimeters.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.0 * self.spacing.1 * self.spacing.2
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.labels[self.index(x, y, z)]
    }

    /// Number of voxels carrying `label`.
    pub fn count_label(&self, label: u16) -> usize {
        self.labels.iter().filter(|&&v| v == label).count()
    }

    /// Distinct non-background labels present, ascending.
    pub fn present_labels(&self) -> Vec<u16> {
        let mut seen = [false; u16::MAX as usize + 1];
        for &v in &self.labels {
            seen[v as usize] = true;
        }
        (1..=u16::MAX).filter(|&v| seen[v as usize]).collect()
    }

    /// Check that every non-background label belongs to `map`.
    pub fn validate_labels(&self, map: &LabelMap) -> Result<()> {
        for label in self.present_labels() {
            if !map.contains_label(label) {
                return Err(Error::UnknownLabel { label });
            }
        }
        Ok(())
    }
}

/// Parse a volume file, detecting CPV1 or NIfTI-1 by magic bytes.
pub fn parse_volume(path: &Path) -> Result<LabelVolume> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(b"CPV1\n") {
        cpv1::parse(path, &bytes)
    } else if nifti::looks_like_nifti(&bytes) {
        nifti::parse(path, &bytes)
    } else {
        Err(Error::Format {
            path: path.to_path_buf(),
            detail: "unrecognized volume format (expected CPV1 or uncompressed NIfTI-1)".into(),
        })
    }
}

/// Write `vol` to `path` in CPV1 format. The written file parses back to a
/// volume equal to the input.
pub fn write_volume(vol: &LabelVolume, path: &Path) -> Result<()> {
    let bytes = cpv1::encode(vol);
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
