//! Structure volumes and Dice overlap from label volumes.
//!
//! Volumes are pure voxel counts times voxel size; no partial-volume or
//! sub-voxel correction is applied.

use crate::error::{Error, Result};
use crate::mask_io::{LabelMap, LabelVolume};

/// Volume of one labeled structure, in milliliters.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureVolume {
    pub structure: String,
    pub volume_ml: f64,
}

/// Volume of `label` in `vol`: `count(voxels == label) * voxel-volume-mm3 / 1000`.
///
/// The label must be declared in `map` (zero voxels is fine; an undeclared
/// label is an error).
pub fn structure_volume(vol: &LabelVolume, label: u16, map: &LabelMap) -> Result<StructureVolume> {
    let structure = map
        .structure_for(label)
        .ok_or(Error::UnknownLabel { label })?;
    let count = vol.count_label(label) as f64;
    Ok(StructureVolume {
        structure: structure.to_string(),
        volume_ml: count * vol.voxel_volume_mm3() / 1000.0,
    })
}

/// Dice overlap of `label` between two volumes of identical dims:
/// `2|A∩B| / (|A| + |B|)`. Two empty masks agree perfectly (1.0); an empty
/// mask against a non-empty one scores 0.
pub fn dice(a: &LabelVolume, b: &LabelVolume, label: u16) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "dice needs identical dims, got {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let mut in_a = 0u64;
    let mut in_b = 0u64;
    let mut overlap = 0u64;
    for (&va, &vb) in a.labels().iter().zip(b.labels()) {
        let ma = va == label;
        let mb = vb == label;
        in_a += ma as u64;
        in_b += mb as u64;
        overlap += (ma && mb) as u64;
    }
    if in_a + in_b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap as f64 / (in_a + in_b) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(dims: (usize, usize, usize), spacing: f64, labels: Vec<u16>) -> LabelVolume {
        LabelVolume::new(dims, (spacing, spacing, spacing), labels).unwrap()
    }

    #[test]
    fn volume_is_count_times_voxel_size() {
        let mut labels = vec![0u16; 1000];
        labels[..500].fill(1);
        let v1 = vol((10, 10, 10), 1.0, labels.clone());
        assert_eq!(structure_volume(&v1, 1, &LabelMap::default()).unwrap().volume_ml, 0.5);

        // same mask at 2 mm spacing: x8 volume
        let v2 = vol((10, 10, 10), 2.0, labels);
        assert_eq!(structure_volume(&v2, 1, &LabelMap::default()).unwrap().volume_ml, 4.0);
    }

    #[test]
    fn empty_structure_is_zero_ml() {
        let v = vol((4, 4, 4), 1.0, vec![0; 64]);
        let sv = structure_volume(&v, 1, &LabelMap::default()).unwrap();
        assert_eq!(sv.volume_ml, 0.0);
        assert_eq!(sv.structure, "LVBP");
    }

    #[test]
    fn undeclared_label_errors() {
        let v = vol((2, 2, 1), 1.0, vec![0; 4]);
        assert!(structure_volume(&v, 9, &LabelMap::default()).is_err());
    }

    #[test]
    fn volume_depends_only_on_counts() {
        let a = vol((3, 2, 1), 1.0, vec![1, 1, 0, 0, 0, 0]);
        let b = vol((3, 2, 1), 1.0, vec![0, 0, 0, 0, 1, 1]);
        let map = LabelMap::default();
        assert_eq!(
            structure_volume(&a, 1, &map).unwrap(),
            structure_volume(&b, 1, &map).unwrap()
        );
    }

    #[test]
    fn dice_identities() {
        let a = vol((4, 1, 1), 1.0, vec![1, 1, 0, 0]);
        let b = vol((4, 1, 1), 1.0, vec![0, 0, 1, 1]);
        assert_eq!(dice(&a, &a, 1).unwrap(), 1.0);
        assert_eq!(dice(&a, &b, 1).unwrap(), 0.0);
    }

    #[test]
    fn dice_half_overlap() {
        // A: 2 voxels, B: 2 voxels, overlap 1 -> 2*1/4
        let a = vol((4, 1, 1), 1.0, vec![1, 1, 0, 0]);
        let b = vol((4, 1, 1), 1.0, vec![0, 1, 1, 0]);
        assert_eq!(dice(&a, &b, 1).unwrap(), 0.5);
        assert_eq!(dice(&b, &a, 1).unwrap(), 0.5);
    }

    #[test]
    fn dice_both_empty_is_one() {
        let a = vol((2, 1, 1), 1.0, vec![0, 0]);
        assert_eq!(dice(&a, &a, 3).unwrap(), 1.0);
    }

    #[test]
    fn dice_dimension_mismatch() {
        let a = vol((2, 1, 1), 1.0, vec![0, 0]);
        let b = vol((1, 2, 1), 1.0, vec![0, 0]);
        assert!(dice(&a, &b, 1).is_err());
    }
}
