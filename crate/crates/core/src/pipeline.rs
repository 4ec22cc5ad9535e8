//! End-to-end analysis driver: manifest -> volumes -> biomarkers ->
//! per-subject precision -> dataset report.
//!
//! Subjects are processed in parallel on the global rayon pool; results are
//! collected in manifest order and reduced serially, so the output is
//! independent of thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::biomarkers::{derive_samples, BiomarkerSamples, FrameSamples, Method, Scan};
use crate::error::{Error, Result};
use crate::mask_io::{load_precomputed_csv, parse_volume, DatasetManifest, LabelVolume};
use crate::precision::{
    aggregate, subject_precision, CovMode, CppMode, PrecisionReport, SubjectPair,
    SubjectPrecision,
};
use crate::stats::CiMethod;
use crate::volumetry::dice;

/// Analysis knobs. The defaults follow the documented conventions: t-mean
/// 95% CIs, mean-based CPP, arithmetic-mean CoV aggregation, alpha 0.05.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub ci_method: CiMethod,
    pub ci_level: f64,
    pub cpp_mode: CppMode,
    pub cov_mode: CovMode,
    pub alpha: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            ci_method: CiMethod::TMean,
            ci_level: 0.95,
            cpp_mode: CppMode::Mean,
            cov_mode: CovMode::Pairwise,
            alpha: 0.05,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("ci_level", self.ci_level)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct AnalysisOutput {
    /// One row per subject x biomarker x method, in manifest subject order.
    pub rows: Vec<SubjectPrecision>,
    pub report: PrecisionReport,
    /// Human-readable notes about suspicious sample values (EF outside
    /// [0, 100], zero LVM). Values are retained, not clamped.
    pub warnings: Vec<String>,
}

/// Run the full analysis for a manifest, from mask volumetry or from the
/// precomputed-samples CSV when the manifest points at one.
pub fn analyze_manifest(
    manifest: &DatasetManifest,
    opts: &AnalysisOptions,
) -> Result<AnalysisOutput> {
    opts.validate()?;
    let pairs = match &manifest.precomputed_samples {
        Some(csv_path) => pairs_from_csv(manifest, csv_path)?,
        None => pairs_from_masks(manifest)?,
    };

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (pair, mut pair_warnings) in pairs {
        warnings.append(&mut pair_warnings);
        for (method, biomarker) in pair.keys().collect::<Vec<_>>() {
            rows.push(subject_precision(
                &pair,
                biomarker,
                method,
                opts.ci_method,
                opts.ci_level,
                opts.alpha,
            )?);
        }
    }

    let report = aggregate(
        manifest.dataset.clone(),
        &rows,
        opts.alpha,
        opts.ci_level,
        opts.ci_method,
        opts.cpp_mode,
        opts.cov_mode,
    )?;

    Ok(AnalysisOutput {
        rows,
        report,
        warnings,
    })
}

fn collect_warnings(samples: &BiomarkerSamples) -> Vec<String> {
    let suspicious = samples.suspicious_indices();
    if suspicious.is_empty() {
        return Vec::new();
    }
    vec![format!(
        "subject {} scan {} {}/{}: suspicious values at sample indices {:?} (retained)",
        samples.subject_id, samples.scan, samples.method, samples.biomarker, suspicious
    )]
}

type PairWithWarnings = (SubjectPair, Vec<String>);

fn pairs_from_masks(manifest: &DatasetManifest) -> Result<Vec<PairWithWarnings>> {
    manifest
        .subjects
        .par_iter()
        .map(|subject| {
            let mut pair = SubjectPair::new(subject.id.clone());
            let mut warnings = Vec::new();
            for scan in [Scan::A, Scan::B] {
                for (&method, samples) in &subject.scan(scan).methods {
                    let load = |paths: &[std::path::PathBuf]| -> Result<Vec<LabelVolume>> {
                        paths
                            .iter()
                            .map(|p| {
                                let vol = parse_volume(p)?;
                                vol.validate_labels(&manifest.label_map)?;
                                Ok(vol)
                            })
                            .collect()
                    };
                    let ed = load(&samples.ed)?;
                    let es = load(&samples.es)?;
                    let derived = derive_samples(
                        &subject.id,
                        scan,
                        method,
                        FrameSamples { ed: &ed, es: &es },
                        &manifest.label_map,
                    )?;
                    for samples in derived {
                        warnings.extend(collect_warnings(&samples));
                        pair.insert(scan, method, samples.biomarker, samples.values);
                    }
                }
            }
            Ok((pair, warnings))
        })
        .collect()
}

fn pairs_from_csv(
    manifest: &DatasetManifest,
    csv_path: &std::path::Path,
) -> Result<Vec<PairWithWarnings>> {
    let precomputed = load_precomputed_csv(csv_path)?;

    let manifest_ids: Vec<&String> = manifest.subjects.iter().map(|s| &s.id).collect();
    let csv_ids: std::collections::BTreeSet<&String> =
        precomputed.keys().map(|k| &k.subject).collect();
    for id in &manifest_ids {
        if !csv_ids.contains(id) {
            return Err(Error::Manifest {
                path: csv_path.to_path_buf(),
                detail: format!("manifest subject {id:?} has no rows in the precomputed CSV"),
            });
        }
    }
    for id in csv_ids {
        if !manifest_ids.iter().any(|m| *m == id) {
            return Err(Error::Manifest {
                path: csv_path.to_path_buf(),
                detail: format!("precomputed CSV subject {id:?} is not in the manifest"),
            });
        }
    }

    let mut by_subject: BTreeMap<&String, SubjectPair> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (key, values) in &precomputed {
        let samples = BiomarkerSamples::new(
            key.subject.clone(),
            key.scan,
            key.method,
            key.biomarker,
            values.clone(),
        )?;
        warnings.extend(collect_warnings(&samples));
        by_subject
            .entry(&key.subject)
            .or_insert_with(|| SubjectPair::new(key.subject.clone()))
            .insert(key.scan, key.method, key.biomarker, samples.values);
    }

    // manifest order, with per-subject warnings inline
    Ok(manifest
        .subjects
        .iter()
        .map(|s| {
            let pair = by_subject.remove(&s.id).expect("checked above");
            let subject_warnings = warnings
                .iter()
                .filter(|w| w.contains(&format!("subject {} ", s.id)))
                .cloned()
                .collect();
            (pair, subject_warnings)
        })
        .collect())
}

/// One Dice comparison between a predicted and a reference mask.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DiceRow {
    pub subject: String,
    pub scan: Scan,
    pub method: Method,
    pub frame: crate::biomarkers::Frame,
    pub sample_index: usize,
    pub structure: String,
    pub dice: f64,
}

/// Per-structure and overall Dice means.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiceSummary {
    pub structure: String,
    pub mean_dice: f64,
    pub n: usize,
}

/// Compare every (subject, scan, method, frame, sample) mask of
/// `predictions` against `reference`, per structure in the predictions
/// label map. The reference manifest must cover exactly the same keys with
/// the same sample counts and identical dims per pair.
pub fn dice_report(
    predictions: &DatasetManifest,
    reference: &DatasetManifest,
) -> Result<Vec<DiceRow>> {
    use crate::biomarkers::Frame;

    let ref_by_id: BTreeMap<&String, &crate::mask_io::SubjectEntry> =
        reference.subjects.iter().map(|s| (&s.id, s)).collect();

    let per_subject: Vec<Vec<DiceRow>> = predictions
        .subjects
        .par_iter()
        .map(|subject| -> Result<Vec<DiceRow>> {
            let ref_subject = ref_by_id.get(&subject.id).ok_or_else(|| {
                Error::EmptyDataset(format!(
                    "subject {:?} is missing from the reference manifest",
                    subject.id
                ))
            })?;
            let mut rows = Vec::new();
            for scan in [Scan::A, Scan::B] {
                for (&method, pred_samples) in &subject.scan(scan).methods {
                    let ref_samples =
                        ref_subject.scan(scan).methods.get(&method).ok_or_else(|| {
                            Error::EmptyDataset(format!(
                                "subject {:?} scan {scan}: method {method} missing from reference",
                                subject.id
                            ))
                        })?;
                    if ref_samples.n_samples() != pred_samples.n_samples() {
                        return Err(Error::LengthMismatch(format!(
                            "subject {:?} scan {scan} method {method}: {} predicted vs {} reference samples",
                            subject.id,
                            pred_samples.n_samples(),
                            ref_samples.n_samples()
                        )));
                    }
                    for (frame, pred_paths, ref_paths) in [
                        (Frame::Ed, &pred_samples.ed, &ref_samples.ed),
                        (Frame::Es, &pred_samples.es, &ref_samples.es),
                    ] {
                        for (i, (pp, rp)) in pred_paths.iter().zip(ref_paths).enumerate() {
                            let pred = parse_volume(pp)?;
                            let refv = parse_volume(rp)?;
                            for (structure, label) in predictions.label_map.iter() {
                                rows.push(DiceRow {
                                    subject: subject.id.clone(),
                                    scan,
                                    method,
                                    frame,
                                    sample_index: i,
                                    structure: structure.to_string(),
                                    dice: dice(&pred, &refv, label)?,
                                });
                            }
                        }
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    Ok(per_subject.into_iter().flatten().collect())
}

/// Mean Dice per structure plus an overall mean (structure = "ALL").
pub fn dice_summary(rows: &[DiceRow]) -> Vec<DiceSummary> {
    let mut grouped: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for row in rows {
        let entry = grouped.entry(&row.structure).or_insert((0.0, 0));
        entry.0 += row.dice;
        entry.1 += 1;
    }
    let mut out: Vec<DiceSummary> = grouped
        .into_iter()
        .map(|(structure, (sum, n))| DiceSummary {
            structure: structure.to_string(),
            mean_dice: sum / n as f64,
            n,
        })
        .collect();
    if !rows.is_empty() {
        let total: f64 = rows.iter().map(|r| r.dice).sum();
        out.push(DiceSummary {
            structure: "ALL".to_string(),
            mean_dice: total / rows.len() as f64,
            n: rows.len(),
        });
    }
    out
}
