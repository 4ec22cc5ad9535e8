//! Label-mask perturbations modeling scan-rescan and uncertainty-draw
//! variability: in-plane rotation, translation, central crop, and soft-mask
//! Gaussian blur with rethresholding.
//!
//! These operate on segmentation masks directly (the quantities the
//! precision metrics consume); blur+threshold is the mask-level analogue of
//! image-space Gaussian blurring, and intensity scaling has no mask
//! equivalent so it is omitted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask_io::LabelVolume;
use crate::simulator::rng::StreamRng;

/// Perturbation magnitudes. All values are maxima (or ranges) for uniform
/// draws; a spec of all zeros is the exact identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationSpec {
    /// Rotation about the z axis, degrees; the angle is drawn uniformly
    /// from ±this.
    pub rotation_deg_max: f64,
    /// Central crop removing up to this fraction of each axis extent.
    pub crop_fraction_max: f64,
    /// Gaussian blur sigma range in voxels, applied to per-label soft masks
    /// rethresholded at 0.5.
    pub blur_sigma_range: [f64; 2],
    /// Translation maxima per axis, mm; each component is drawn uniformly
    /// from ±its maximum.
    pub translation_mm_max: [f64; 3],
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            rotation_deg_max: 10.0,
            crop_fraction_max: 0.10,
            blur_sigma_range: [0.0, 1.0],
            translation_mm_max: [0.0, 0.0, 0.0],
        }
    }
}

impl PerturbationSpec {
    /// The spec that leaves every volume untouched.
    pub fn identity() -> Self {
        Self {
            rotation_deg_max: 0.0,
            crop_fraction_max: 0.0,
            blur_sigma_range: [0.0, 0.0],
            translation_mm_max: [0.0, 0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("rotation_deg_max", self.rotation_deg_max),
            ("crop_fraction_max", self.crop_fraction_max),
            ("blur_sigma_range lower", self.blur_sigma_range[0]),
            ("blur_sigma_range upper", self.blur_sigma_range[1]),
            ("translation_mm_max x", self.translation_mm_max[0]),
            ("translation_mm_max y", self.translation_mm_max[1]),
            ("translation_mm_max z", self.translation_mm_max[2]),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Simulator(format!(
                    "perturbation magnitude {name} must be >= 0, got {v}"
                )));
            }
        }
        if self.blur_sigma_range[0] > self.blur_sigma_range[1] {
            return Err(Error::Simulator(format!(
                "blur_sigma_range is inverted: [{}, {}]",
                self.blur_sigma_range[0], self.blur_sigma_range[1]
            )));
        }
        if self.crop_fraction_max >= 1.0 {
            return Err(Error::Simulator(format!(
                "crop_fraction_max must be < 1, got {}",
                self.crop_fraction_max
            )));
        }
        Ok(())
    }

    /// All magnitudes multiplied by `k` (per-method noise scaling).
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            rotation_deg_max: self.rotation_deg_max * k,
            crop_fraction_max: self.crop_fraction_max * k,
            blur_sigma_range: [self.blur_sigma_range[0] * k, self.blur_sigma_range[1] * k],
            translation_mm_max: [
                self.translation_mm_max[0] * k,
                self.translation_mm_max[1] * k,
                self.translation_mm_max[2] * k,
            ],
        }
    }
}

/// Draws consumed by one perturbation, in a fixed order so streams stay
/// aligned when magnitudes change between scenarios.
struct Draws {
    angle_deg: f64,
    translation_mm: [f64; 3],
    crop_fraction: f64,
    sigma_vox: f64,
}

fn draw(spec: &PerturbationSpec, rng: &mut StreamRng) -> Draws {
    Draws {
        angle_deg: rng.symmetric(spec.rotation_deg_max),
        translation_mm: [
            rng.symmetric(spec.translation_mm_max[0]),
            rng.symmetric(spec.translation_mm_max[1]),
            rng.symmetric(spec.translation_mm_max[2]),
        ],
        crop_fraction: rng.uniform(0.0, spec.crop_fraction_max),
        sigma_vox: rng.uniform(spec.blur_sigma_range[0], spec.blur_sigma_range[1]),
    }
}

/// Apply one randomized perturbation: rigid rotation about the z axis and
/// translation (one nearest-neighbor resampling pass about the grid
/// center), then a central crop-and-pad, then per-label soft-mask Gaussian
/// blur rethresholded at 0.5. Deterministic given the stream state; an
/// identity spec returns the input bit-exact. Output may be empty (a draw
/// can push a structure off the grid); callers decide whether that matters.
pub fn perturb(vol: &LabelVolume, spec: &PerturbationSpec, rng: &mut StreamRng) -> Result<LabelVolume> {
    spec.validate()?;
    let draws = draw(spec, rng);

    let mut labels = if draws.angle_deg == 0.0 && draws.translation_mm == [0.0; 3] {
        vol.labels().to_vec()
    } else {
        resample_rigid(vol, draws.angle_deg, draws.translation_mm)
    };

    if draws.crop_fraction > 0.0 {
        central_crop(vol.dims(), &mut labels, draws.crop_fraction);
    }

    if draws.sigma_vox > 0.0 {
        labels = blur_rethreshold(vol.dims(), &labels, draws.sigma_vox);
    }

    LabelVolume::new(vol.dims(), vol.spacing(), labels)
}

/// Inverse-map nearest-neighbor resampling of the rigid motion
/// `p -> R_z(angle) p + t` in physical coordinates about the grid center.
fn resample_rigid(vol: &LabelVolume, angle_deg: f64, translation_mm: [f64; 3]) -> Vec<u16> {
    let (nx, ny, nz) = vol.dims();
    let (sx, sy, sz) = vol.spacing();
    let cx = (nx - 1) as f64 / 2.0;
    let cy = (ny - 1) as f64 / 2.0;
    let cz = (nz - 1) as f64 / 2.0;
    let theta = -angle_deg.to_radians(); // inverse rotation
    let (sin_t, cos_t) = theta.sin_cos();

    let mut out = vec![0u16; vol.len()];
    let mut idx = 0;
    for iz in 0..nz {
        let pz = (iz as f64 - cz) * sz - translation_mm[2];
        let src_z = (pz / sz + cz).round();
        for iy in 0..ny {
            let py = (iy as f64 - cy) * sy - translation_mm[1];
            for ix in 0..nx {
                let px = (ix as f64 - cx) * sx - translation_mm[0];
                let qx = cos_t * px - sin_t * py;
                let qy = sin_t * px + cos_t * py;
                let src_x = (qx / sx + cx).round();
                let src_y = (qy / sy + cy).round();
                if src_x >= 0.0
                    && src_x < nx as f64
                    && src_y >= 0.0
                    && src_y < ny as f64
                    && src_z >= 0.0
                    && src_z < nz as f64
                {
                    out[idx] = vol.get(src_x as usize, src_y as usize, src_z as usize);
                }
                idx += 1;
            }
        }
    }
    out
}

/// Zero out everything but the central `(1 - fraction)` portion of each
/// axis; the removed margins become background (crop-and-pad).
fn central_crop(dims: (usize, usize, usize), labels: &mut [u16], fraction: f64) {
    let (nx, ny, nz) = dims;
    let margin = |n: usize| ((n as f64) * fraction / 2.0).floor() as usize;
    let (mx, my, mz) = (margin(nx), margin(ny), margin(nz));
    if mx == 0 && my == 0 && mz == 0 {
        return;
    }
    let mut idx = 0;
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let inside = ix >= mx
                    && ix < nx - mx
                    && iy >= my
                    && iy < ny - my
                    && iz >= mz
                    && iz < nz - mz;
                if !inside {
                    labels[idx] = 0;
                }
                idx += 1;
            }
        }
    }
}

/// Separable 1D Gaussian kernel with radius 3 sigma, normalized.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Blur each label's soft mask with an isotropic Gaussian (sigma in voxels)
/// and rethreshold: a voxel takes the label with the largest blurred value
/// when that value exceeds 0.5, otherwise background. Outside the grid the
/// soft mask is zero.
fn blur_rethreshold(dims: (usize, usize, usize), labels: &[u16], sigma_vox: f64) -> Vec<u16> {
    let (nx, ny, nz) = dims;
    let kernel = gaussian_kernel(sigma_vox);
    let radius = (kernel.len() / 2) as i64;
    let index = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);

    let mut present: Vec<u16> = labels.iter().copied().filter(|&v| v != 0).collect();
    present.sort_unstable();
    present.dedup();

    let mut best_value = vec![0.0f64; labels.len()];
    let mut best_label = vec![0u16; labels.len()];

    let mut soft = vec![0.0f64; labels.len()];
    let mut tmp = vec![0.0f64; labels.len()];
    for &label in &present {
        for (s, &l) in soft.iter_mut().zip(labels) {
            *s = (l == label) as u8 as f64;
        }
        // x pass
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut acc = 0.0;
                    for (k, w) in kernel.iter().enumerate() {
                        let sx = x as i64 + k as i64 - radius;
                        if sx >= 0 && sx < nx as i64 {
                            acc += w * soft[index(sx as usize, y, z)];
                        }
                    }
                    tmp[index(x, y, z)] = acc;
                }
            }
        }
        std::mem::swap(&mut soft, &mut tmp);
        // y pass
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut acc = 0.0;
                    for (k, w) in kernel.iter().enumerate() {
                        let sy = y as i64 + k as i64 - radius;
                        if sy >= 0 && sy < ny as i64 {
                            acc += w * soft[index(x, sy as usize, z)];
                        }
                    }
                    tmp[index(x, y, z)] = acc;
                }
            }
        }
        std::mem::swap(&mut soft, &mut tmp);
        // z pass
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut acc = 0.0;
                    for (k, w) in kernel.iter().enumerate() {
                        let sz = z as i64 + k as i64 - radius;
                        if sz >= 0 && sz < nz as i64 {
                            acc += w * soft[index(x, y, sz as usize)];
                        }
                    }
                    tmp[index(x, y, z)] = acc;
                }
            }
        }
        std::mem::swap(&mut soft, &mut tmp);

        for i in 0..labels.len() {
            if soft[i] > best_value[i] {
                best_value[i] = soft[i];
                best_label[i] = label;
            }
        }
    }

    for i in 0..labels.len() {
        if best_value[i] <= 0.5 {
            best_label[i] = 0;
        }
    }
    best_label
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biomarkers::Frame;
    use crate::simulator::phantom::{generate_phantom, PhantomSpec};

    fn reference_vol() -> LabelVolume {
        generate_phantom(&PhantomSpec::reference(1.0), Frame::Ed).unwrap()
    }

    #[test]
    fn identity_spec_is_exact_identity() {
        let vol = reference_vol();
        let mut rng = StreamRng::from_seed(1);
        let out = perturb(&vol, &PerturbationSpec::identity(), &mut rng).unwrap();
        assert_eq!(out, vol);
    }

    #[test]
    fn same_seed_same_output() {
        let vol = generate_phantom(&PhantomSpec::reference(2.0), Frame::Ed).unwrap();
        let spec = PerturbationSpec::default();
        let mut rng_a = StreamRng::from_seed(77).derive(4);
        let mut rng_b = StreamRng::from_seed(77).derive(4);
        let out_a = perturb(&vol, &spec, &mut rng_a).unwrap();
        let out_b = perturb(&vol, &spec, &mut rng_b).unwrap();
        assert_eq!(out_a, out_b);
    }

    #[test]
    fn rotation_roughly_preserves_foreground() {
        // measured voxelization bound for the reference phantom at 1 mm:
        // pure rotations change the LVBP count by well under 5%
        let vol = reference_vol();
        let spec = PerturbationSpec {
            rotation_deg_max: 10.0,
            crop_fraction_max: 0.0,
            blur_sigma_range: [0.0, 0.0],
            translation_mm_max: [0.0; 3],
        };
        let before = vol.count_label(1) as f64;
        for seed in 0..5 {
            let mut rng = StreamRng::from_seed(seed);
            let out = perturb(&vol, &spec, &mut rng).unwrap();
            let after = out.count_label(1) as f64;
            let rel = (after - before).abs() / before;
            assert!(rel < 0.05, "seed {seed}: relative change {rel}");
        }
    }

    #[test]
    fn integer_translation_shifts_exactly() {
        // 3 voxels in a row, translate by exactly one 2mm voxel in x
        let vol = LabelVolume::new((5, 1, 1), (2.0, 2.0, 2.0), vec![0, 1, 2, 0, 0]).unwrap();
        let spec = PerturbationSpec {
            rotation_deg_max: 0.0,
            crop_fraction_max: 0.0,
            blur_sigma_range: [0.0, 0.0],
            translation_mm_max: [0.0; 3],
        };
        // bypass the random draw by resampling directly
        let _ = spec;
        let out = resample_rigid(&vol, 0.0, [2.0, 0.0, 0.0]);
        assert_eq!(out, vec![0, 0, 1, 2, 0]);
    }

    #[test]
    fn crop_zeroes_margins_only() {
        let mut labels = vec![7u16; 10 * 10 * 10];
        central_crop((10, 10, 10), &mut labels, 0.4);
        // margin = floor(10*0.2) = 2 on each side
        let vol = LabelVolume::new((10, 10, 10), (1.0, 1.0, 1.0), labels).unwrap();
        assert_eq!(vol.get(0, 5, 5), 0);
        assert_eq!(vol.get(1, 5, 5), 0);
        assert_eq!(vol.get(2, 5, 5), 7);
        assert_eq!(vol.get(7, 5, 5), 7);
        assert_eq!(vol.get(8, 5, 5), 0);
        assert_eq!(vol.count_label(7), 6 * 6 * 6);
    }

    #[test]
    fn blur_keeps_a_large_solid_block() {
        // a big solid cube survives blur+rethreshold with its interior intact
        let mut labels = vec![0u16; 20 * 20 * 20];
        for z in 4..16 {
            for y in 4..16 {
                for x in 4..16 {
                    labels[x + 20 * (y + 20 * z)] = 1;
                }
            }
        }
        let out = blur_rethreshold((20, 20, 20), &labels, 0.8);
        let vol = LabelVolume::new((20, 20, 20), (1.0, 1.0, 1.0), out).unwrap();
        assert_eq!(vol.get(10, 10, 10), 1);
        assert_eq!(vol.get(0, 0, 0), 0);
        let count = vol.count_label(1) as f64;
        let rel = (count - 12f64.powi(3)).abs() / 12f64.powi(3);
        assert!(rel < 0.1, "relative change {rel}");
    }

    #[test]
    fn blur_clears_isolated_voxels() {
        let mut labels = vec![0u16; 9 * 9 * 9];
        labels[4 + 9 * (4 + 9 * 4)] = 1;
        let out = blur_rethreshold((9, 9, 9), &labels, 1.0);
        assert!(out.iter().all(|&v| v == 0));
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let vol = reference_vol();
        let mut rng = StreamRng::from_seed(0);
        let bad = PerturbationSpec {
            rotation_deg_max: -1.0,
            ..PerturbationSpec::identity()
        };
        assert!(perturb(&vol, &bad, &mut rng).is_err());
        let bad = PerturbationSpec {
            blur_sigma_range: [1.0, 0.5],
            ..PerturbationSpec::identity()
        };
        assert!(perturb(&vol, &bad, &mut rng).is_err());
    }
}
