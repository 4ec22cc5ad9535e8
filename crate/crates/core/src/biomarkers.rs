//! Derivation of LVEF, RVEF, and LVM sample sets from ED/ES segmentation
//! samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask_io::{LabelMap, LabelVolume};
use crate::volumetry::structure_volume;

/// Density of myocardial muscle, g/mL.
pub const MYOCARDIAL_DENSITY_G_PER_ML: f64 = 1.05;

pub const STRUCTURE_LVBP: &str = "LVBP";
pub const STRUCTURE_MYO: &str = "LV-myocardium";
pub const STRUCTURE_RVBP: &str = "RVBP";

macro_rules! string_enum {
    ($(#[$doc:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::InvalidParameter(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        other
                    ))),
                }
            }
        }
    };
}

string_enum! {
    /// One of the two acquisitions of a scan-rescan pair.
    Scan { A => "A", B => "B" }
}

string_enum! {
    /// Uncertainty estimation technique that produced a sample set.
    Method { De => "DE", Tta => "TTA", Mcd => "MCD" }
}

string_enum! {
    /// Cardiac functional biomarker. EF values are percent, LVM is grams.
    Biomarker { Lvef => "LVEF", Lvm => "LVM", Rvef => "RVEF" }
}

string_enum! {
    /// Cardiac phase of a segmentation.
    Frame { Ed => "ED", Es => "ES" }
}

/// Ordered biomarker values for one (subject, scan, method, biomarker),
/// one value per uncertainty draw. Order preserves the sample pairing index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiomarkerSamples {
    pub subject_id: String,
    pub scan: Scan,
    pub method: Method,
    pub biomarker: Biomarker,
    pub values: Vec<f64>,
}

impl BiomarkerSamples {
    pub fn new(
        subject_id: impl Into<String>,
        scan: Scan,
        method: Method,
        biomarker: Biomarker,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientSamples(format!(
                "biomarker sample set needs N >= 2, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite biomarker value {bad}"
            )));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            scan,
            method,
            biomarker,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices of values that look implausible and deserve a warning:
    /// EF outside [0, 100] (negative EF means ESV > EDV, a segmentation
    /// failure we retain rather than clamp), LVM of exactly zero.
    pub fn suspicious_indices(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| match self.biomarker {
                Biomarker::Lvef | Biomarker::Rvef => !(0.0..=100.0).contains(&v),
                Biomarker::Lvm => v == 0.0,
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// EF in percent from end-diastolic and end-systolic volumes in mL:
/// `(edv - esv) / edv * 100`.
///
/// `edv <= 0` signals an empty blood-pool segmentation at ED and is an
/// error; esv > edv yields a negative EF which is retained (and flagged
/// upstream) rather than clamped.
pub fn ejection_fraction(edv_ml: f64, esv_ml: f64) -> Result<f64> {
    if !(edv_ml > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ejection fraction needs edv > 0, got {edv_ml}"
        )));
    }
    if esv_ml < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "esv must be >= 0, got {esv_ml}"
        )));
    }
    Ok((edv_ml - esv_ml) / edv_ml * 100.0)
}

/// LV mass in grams from the ED myocardial volume in mL.
pub fn lv_mass(myo_ed_volume_ml: f64) -> f64 {
    myo_ed_volume_ml * MYOCARDIAL_DENSITY_G_PER_ML
}

/// ED/ES segmentation samples of one scan, index-aligned.
pub struct FrameSamples<'a> {
    pub ed: &'a [LabelVolume],
    pub es: &'a [LabelVolume],
}

/// Derive LVEF, RVEF, and LVM sample sets for one (subject, scan, method)
/// from its ED/ES segmentation samples.
///
/// Exactly one value per input sample index is produced for each biomarker;
/// a sample whose volumetry fails aborts the whole call with subject/sample
/// context so the pairing contract (equal N everywhere) cannot silently
/// break.
pub fn derive_samples(
    subject_id: &str,
    scan: Scan,
    method: Method,
    frames: FrameSamples<'_>,
    label_map: &LabelMap,
) -> Result<Vec<BiomarkerSamples>> {
    if frames.ed.len() != frames.es.len() {
        return Err(Error::LengthMismatch(format!(
            "subject {subject_id} scan {scan} method {method}: {} ED samples vs {} ES samples",
            frames.ed.len(),
            frames.es.len()
        )));
    }
    let lvbp = label_map.label_for(STRUCTURE_LVBP)?;
    let myo = label_map.label_for(STRUCTURE_MYO)?;
    let rvbp = label_map.label_for(STRUCTURE_RVBP)?;

    let n = frames.ed.len();
    let mut lvef = Vec::with_capacity(n);
    let mut rvef = Vec::with_capacity(n);
    let mut lvm = Vec::with_capacity(n);
    for i in 0..n {
        let ed = &frames.ed[i];
        let es = &frames.es[i];
        let with_context = |e: Error| match e {
            Error::InvalidParameter(detail) | Error::Volume(detail) => Error::DegenerateVolume {
                subject: subject_id.to_string(),
                scan: scan.to_string(),
                method: method.to_string(),
                sample_index: i,
                detail,
            },
            other => other,
        };

        let lv_edv = structure_volume(ed, lvbp, label_map)?.volume_ml;
        let lv_esv = structure_volume(es, lvbp, label_map)?.volume_ml;
        lvef.push(ejection_fraction(lv_edv, lv_esv).map_err(with_context)?);

        let rv_edv = structure_volume(ed, rvbp, label_map)?.volume_ml;
        let rv_esv = structure_volume(es, rvbp, label_map)?.volume_ml;
        rvef.push(ejection_fraction(rv_edv, rv_esv).map_err(with_context)?);

        lvm.push(lv_mass(structure_volume(ed, myo, label_map)?.volume_ml));
    }

    Ok(vec![
        BiomarkerSamples::new(subject_id, scan, method, Biomarker::Lvef, lvef)?,
        BiomarkerSamples::new(subject_id, scan, method, Biomarker::Lvm, lvm)?,
        BiomarkerSamples::new(subject_id, scan, method, Biomarker::Rvef, rvef)?,
    ])
}
