//! Analytic cardiac phantom: concentric ellipsoids for the left ventricle
//! (shell = myocardium, inner = blood pool) and an offset ellipsoid clipped
//! against the LV outer wall for the right ventricle.
//!
//! End-systole shrinks the LV cavity by a per-axis scale factor about the LV
//! center, and shrinks the RV crescent by a per-axis scale factor about the
//! point of the RV ellipsoid farthest from the LV. Scaling a region about a
//! fixed point multiplies its volume by the product of the scale factors
//! exactly, whatever its shape, so ejection fractions have closed-form
//! ground truth even for the clipped crescent.

use serde::{Deserialize, Serialize};

use crate::biomarkers::{Frame, MYOCARDIAL_DENSITY_G_PER_ML};
use crate::error::{Error, Result};
use crate::mask_io::{LabelVolume, DEFAULT_LABEL_LVBP, DEFAULT_LABEL_MYO, DEFAULT_LABEL_RVBP};

/// Geometry of one synthetic subject. Lengths in millimeters; centers are
/// relative to the grid center (the centroid of all voxel centers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    pub lv_center_mm: [f64; 3],
    /// LV blood-pool (cavity) semi-axes at ED.
    pub lv_inner_mm: [f64; 3],
    /// Epicardial boundary semi-axes; shell between inner and outer is
    /// myocardium.
    pub lv_outer_mm: [f64; 3],
    pub rv_center_mm: [f64; 3],
    pub rv_semi_axes_mm: [f64; 3],
    /// Per-axis LV cavity scale at ES.
    pub es_scale: [f64; 3],
    /// Per-axis RV crescent scale at ES.
    pub rv_es_scale: [f64; 3],
}

fn ellipsoid_ml(axes: [f64; 3]) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * axes[0] * axes[1] * axes[2] / 1000.0
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let (nx, ny, nz) = self.dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Simulator("phantom grid dims must be positive".into()));
        }
        for axis in 0..3 {
            if self.lv_inner_mm[axis] >= self.lv_outer_mm[axis] {
                return Err(Error::Simulator(format!(
                    "LV wall has zero or negative thickness on axis {axis}: inner {} >= outer {}",
                    self.lv_inner_mm[axis], self.lv_outer_mm[axis]
                )));
            }
            for (name, v) in [
                ("lv_inner", self.lv_inner_mm[axis]),
                ("rv_semi_axes", self.rv_semi_axes_mm[axis]),
                ("es_scale", self.es_scale[axis]),
                ("rv_es_scale", self.rv_es_scale[axis]),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Simulator(format!(
                        "{name}[{axis}] must be positive, got {v}"
                    )));
                }
            }
        }
        if self.rv_center_mm == self.lv_center_mm {
            return Err(Error::Simulator(
                "RV center must be offset from the LV center".into(),
            ));
        }
        // shapes must fit inside the physical grid extent
        let half = [
            nx as f64 * self.spacing.0 / 2.0,
            ny as f64 * self.spacing.1 / 2.0,
            nz as f64 * self.spacing.2 / 2.0,
        ];
        for axis in 0..3 {
            let lv_reach = self.lv_center_mm[axis].abs() + self.lv_outer_mm[axis];
            let rv_reach = self.rv_center_mm[axis].abs() + self.rv_semi_axes_mm[axis];
            if lv_reach > half[axis] || rv_reach > half[axis] {
                return Err(Error::Simulator(format!(
                    "shape exceeds grid on axis {axis}: reach {:.1} mm vs half-extent {:.1} mm",
                    lv_reach.max(rv_reach),
                    half[axis]
                )));
            }
        }
        Ok(())
    }

    /// Anchor for the ES scaling of the RV crescent: the point of the RV
    /// ellipsoid farthest from the LV. Shrinking toward it moves crescent
    /// points away from the LV wall, keeping the scaled crescent clear of
    /// the LV labels.
    fn rv_es_anchor(&self) -> [f64; 3] {
        let diff = [
            self.rv_center_mm[0] - self.lv_center_mm[0],
            self.rv_center_mm[1] - self.lv_center_mm[1],
            self.rv_center_mm[2] - self.lv_center_mm[2],
        ];
        let norm = (diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]).sqrt();
        let dir = [diff[0] / norm, diff[1] / norm, diff[2] / norm];
        // radius of the ellipsoid along dir
        let inv_r2 = (dir[0] / self.rv_semi_axes_mm[0]).powi(2)
            + (dir[1] / self.rv_semi_axes_mm[1]).powi(2)
            + (dir[2] / self.rv_semi_axes_mm[2]).powi(2);
        let r = 1.0 / inv_r2.sqrt();
        [
            self.rv_center_mm[0] + r * dir[0],
            self.rv_center_mm[1] + r * dir[1],
            self.rv_center_mm[2] + r * dir[2],
        ]
    }

    pub fn lv_cavity_ml(&self, frame: Frame) -> f64 {
        match frame {
            Frame::Ed => ellipsoid_ml(self.lv_inner_mm),
            Frame::Es => {
                ellipsoid_ml(self.lv_inner_mm)
                    * self.es_scale[0]
                    * self.es_scale[1]
                    * self.es_scale[2]
            }
        }
    }

    pub fn lv_myo_ed_ml(&self) -> f64 {
        ellipsoid_ml(self.lv_outer_mm) - ellipsoid_ml(self.lv_inner_mm)
    }

    pub fn analytic_lvef(&self) -> f64 {
        (1.0 - self.es_scale[0] * self.es_scale[1] * self.es_scale[2]) * 100.0
    }

    pub fn analytic_rvef(&self) -> f64 {
        (1.0 - self.rv_es_scale[0] * self.rv_es_scale[1] * self.rv_es_scale[2]) * 100.0
    }

    pub fn analytic_lvm_g(&self) -> f64 {
        self.lv_myo_ed_ml() * MYOCARDIAL_DENSITY_G_PER_ML
    }

    /// Reference phantom with a 30x30x50 mm LV cavity (about 188.5 mL), an
    /// 8 mm wall, and es_scale targeting 60% EF for both ventricles, on an
    /// isotropic grid of the given spacing. The 128x88x120 mm extent leaves
    /// a safety margin around every shape; the LV center sits off the voxel
    /// lattice so voxelization error is not resonance-lucky at any one
    /// spacing.
    pub fn reference(spacing_mm: f64) -> Self {
        let dim = |extent_mm: f64| (extent_mm / spacing_mm).round() as usize;
        let s = (0.4f64).cbrt();
        Self {
            dims: (dim(128.0), dim(88.0), dim(120.0)),
            spacing: (spacing_mm, spacing_mm, spacing_mm),
            lv_center_mm: [-20.7, 0.9, 1.3],
            lv_inner_mm: [30.0, 30.0, 50.0],
            lv_outer_mm: [38.0, 38.0, 58.0],
            rv_center_mm: [24.0, 0.0, 0.0],
            rv_semi_axes_mm: [35.0, 30.0, 50.0],
            es_scale: [s, s, s],
            rv_es_scale: [s, s, s],
        }
    }
}

#[inline]
fn in_ellipsoid(p: [f64; 3], center: &[f64; 3], axes: &[f64; 3]) -> bool {
    let dx = (p[0] - center[0]) / axes[0];
    let dy = (p[1] - center[1]) / axes[1];
    let dz = (p[2] - center[2]) / axes[2];
    dx * dx + dy * dy + dz * dz <= 1.0
}

/// Voxelize the phantom at the given frame: each voxel is labeled by its
/// center point against the analytic shapes (LVBP = 1, myocardium = 2,
/// RVBP = 3 under the default label map).
pub fn generate_phantom(spec: &PhantomSpec, frame: Frame) -> Result<LabelVolume> {
    spec.validate()?;
    let (nx, ny, nz) = spec.dims;
    let (sx, sy, sz) = spec.spacing;
    let cx = (nx - 1) as f64 / 2.0;
    let cy = (ny - 1) as f64 / 2.0;
    let cz = (nz - 1) as f64 / 2.0;

    let lv_cavity = match frame {
        Frame::Ed => spec.lv_inner_mm,
        Frame::Es => [
            spec.lv_inner_mm[0] * spec.es_scale[0],
            spec.lv_inner_mm[1] * spec.es_scale[1],
            spec.lv_inner_mm[2] * spec.es_scale[2],
        ],
    };
    let anchor = spec.rv_es_anchor();

    let mut labels = vec![0u16; nx * ny * nz];
    let mut idx = 0;
    for iz in 0..nz {
        let pz = (iz as f64 - cz) * sz;
        for iy in 0..ny {
            let py = (iy as f64 - cy) * sy;
            for ix in 0..nx {
                let p = [(ix as f64 - cx) * sx, py, pz];
                labels[idx] = if in_ellipsoid(p, &spec.lv_center_mm, &lv_cavity) {
                    DEFAULT_LABEL_LVBP
                } else if in_ellipsoid(p, &spec.lv_center_mm, &spec.lv_outer_mm) {
                    DEFAULT_LABEL_MYO
                } else {
                    // RV crescent: at ES, test the point mapped back through
                    // the per-axis shrink about the anchor
                    let q = match frame {
                        Frame::Ed => p,
                        Frame::Es => [
                            anchor[0] + (p[0] - anchor[0]) / spec.rv_es_scale[0],
                            anchor[1] + (p[1] - anchor[1]) / spec.rv_es_scale[1],
                            anchor[2] + (p[2] - anchor[2]) / spec.rv_es_scale[2],
                        ],
                    };
                    let in_rv = in_ellipsoid(q, &spec.rv_center_mm, &spec.rv_semi_axes_mm)
                        && !in_ellipsoid(q, &spec.lv_center_mm, &spec.lv_outer_mm);
                    if in_rv {
                        DEFAULT_LABEL_RVBP
                    } else {
                        0
                    }
                };
                idx += 1;
            }
        }
    }

    LabelVolume::new(spec.dims, spec.spacing, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biomarkers::ejection_fraction;
    use crate::mask_io::LabelMap;
    use crate::volumetry::structure_volume;

    fn cavity_ml(vol: &LabelVolume) -> f64 {
        structure_volume(vol, DEFAULT_LABEL_LVBP, &LabelMap::default())
            .unwrap()
            .volume_ml
    }

    fn rv_ml(vol: &LabelVolume) -> f64 {
        structure_volume(vol, DEFAULT_LABEL_RVBP, &LabelMap::default())
            .unwrap()
            .volume_ml
    }

    #[test]
    fn cavity_volume_matches_analytic_within_2_percent() {
        let spec = PhantomSpec::reference(1.0);
        let analytic = spec.lv_cavity_ml(Frame::Ed);
        // (4/3)*pi*30*30*50/1000
        assert!((analytic - 188.495559).abs() < 1e-4);
        let vol = generate_phantom(&spec, Frame::Ed).unwrap();
        let voxelized = cavity_ml(&vol);
        let rel = (voxelized - analytic).abs() / analytic;
        assert!(rel < 0.02, "relative error {rel}");
    }

    #[test]
    fn voxelization_error_shrinks_with_spacing() {
        let coarse_spec = PhantomSpec::reference(2.0);
        let fine_spec = PhantomSpec::reference(1.0);
        let analytic = coarse_spec.lv_cavity_ml(Frame::Ed);
        let coarse = cavity_ml(&generate_phantom(&coarse_spec, Frame::Ed).unwrap());
        let fine = cavity_ml(&generate_phantom(&fine_spec, Frame::Ed).unwrap());
        let err_coarse = (coarse - analytic).abs() / analytic;
        let err_fine = (fine - analytic).abs() / analytic;
        assert!(
            err_fine < err_coarse,
            "fine {err_fine} should beat coarse {err_coarse}"
        );
    }

    #[test]
    fn voxel_derived_ef_matches_analytic_within_one_point() {
        let spec = PhantomSpec::reference(1.0);
        assert!((spec.analytic_lvef() - 60.0).abs() < 1e-9);
        let ed = generate_phantom(&spec, Frame::Ed).unwrap();
        let es = generate_phantom(&spec, Frame::Es).unwrap();
        let lvef = ejection_fraction(cavity_ml(&ed), cavity_ml(&es)).unwrap();
        assert!((lvef - 60.0).abs() < 1.0, "voxel LVEF {lvef}");
        let rvef = ejection_fraction(rv_ml(&ed), rv_ml(&es)).unwrap();
        assert!((rvef - 60.0).abs() < 1.0, "voxel RVEF {rvef}");
    }

    #[test]
    fn zero_thickness_wall_is_rejected() {
        let mut spec = PhantomSpec::reference(2.0);
        spec.lv_outer_mm = spec.lv_inner_mm;
        assert!(generate_phantom(&spec, Frame::Ed).is_err());
    }

    #[test]
    fn oversized_shape_is_rejected() {
        let mut spec = PhantomSpec::reference(2.0);
        spec.rv_center_mm[0] += 100.0;
        let err = generate_phantom(&spec, Frame::Ed).unwrap_err();
        assert!(err.to_string().contains("exceeds grid"), "{err}");
    }

    #[test]
    fn rv_crescent_is_clipped_by_the_lv() {
        let spec = PhantomSpec::reference(1.0);
        let ed = generate_phantom(&spec, Frame::Ed).unwrap();
        let full_rv = ellipsoid_ml(spec.rv_semi_axes_mm);
        let crescent = rv_ml(&ed);
        assert!(crescent > 0.0);
        assert!(crescent < 0.95 * full_rv, "crescent {crescent} vs full {full_rv}");
    }

    #[test]
    fn myocardium_thickens_at_es() {
        let spec = PhantomSpec::reference(1.0);
        let map = LabelMap::default();
        let ed = generate_phantom(&spec, Frame::Ed).unwrap();
        let es = generate_phantom(&spec, Frame::Es).unwrap();
        let myo_ed = structure_volume(&ed, DEFAULT_LABEL_MYO, &map).unwrap().volume_ml;
        let myo_es = structure_volume(&es, DEFAULT_LABEL_MYO, &map).unwrap().volume_ml;
        assert!(myo_es > myo_ed);
    }
}
