//! Dataset manifest: which mask files belong to which subject, scan,
//! uncertainty method, and cardiac frame.
//!
//! JSON schema:
//!
//! ```json
//! {
//!   "label_map": { "LVBP": 1, "LV-myocardium": 2, "RVBP": 3 },
//!   "precomputed_samples": "samples.csv",
//!   "subjects": [
//!     { "id": "S001",
//!       "scans": {
//!         "A": { "methods": { "DE": { "ED": ["a_ed_0.cpv"], "ES": ["a_es_0.cpv"] } } },
//!         "B": { "methods": { "DE": { "ED": ["b_ed_0.cpv"], "ES": ["b_es_0.cpv"] } } }
//!       } }
//!   ]
//! }
//! ```
//!
//! `label_map` and `precomputed_samples` are optional; relative paths are
//! resolved against the manifest location. Sample index `i` in scan A and
//! scan B denote paired draws — the paired tests downstream rely on it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::biomarkers::{Biomarker, Method, Scan};
use crate::error::{Error, Result};

pub const DEFAULT_LABEL_LVBP: u16 = 1;
pub const DEFAULT_LABEL_MYO: u16 = 2;
pub const DEFAULT_LABEL_RVBP: u16 = 3;

/// Structure name -> integer label. Label 0 is reserved for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    entries: BTreeMap<String, u16>,
}

impl Default for LabelMap {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(crate::biomarkers::STRUCTURE_LVBP.to_string(), DEFAULT_LABEL_LVBP);
        entries.insert(crate::biomarkers::STRUCTURE_MYO.to_string(), DEFAULT_LABEL_MYO);
        entries.insert(crate::biomarkers::STRUCTURE_RVBP.to_string(), DEFAULT_LABEL_RVBP);
        Self { entries }
    }
}

impl LabelMap {
    pub fn from_entries(entries: BTreeMap<String, u16>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("label_map must not be empty".into()));
        }
        let mut seen = BTreeMap::new();
        for (name, &label) in &entries {
            if label == 0 {
                return Err(Error::InvalidParameter(format!(
                    "label_map entry {name:?} maps to 0, which is reserved for background"
                )));
            }
            if let Some(prev) = seen.insert(label, name) {
                return Err(Error::InvalidParameter(format!(
                    "label_map entries {prev:?} and {name:?} both map to label {label}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn label_for(&self, structure: &str) -> Result<u16> {
        self.entries.get(structure).copied().ok_or_else(|| {
            Error::InvalidParameter(format!("structure {structure:?} is not in the label map"))
        })
    }

    pub fn structure_for(&self, label: u16) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, &l)| l == label)
            .map(|(name, _)| name.as_str())
    }

    pub fn contains_label(&self, label: u16) -> bool {
        self.entries.values().any(|&l| l == label)
    }

    /// (name, label) pairs in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u16)> {
        self.entries.iter().map(|(n, &l)| (n.as_str(), l))
    }
}

/// Paired ED/ES sample mask paths for one (subject, scan, method);
/// both lists have the same length N >= 2, already resolved to the
/// manifest location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSamples {
    pub ed: Vec<PathBuf>,
    pub es: Vec<PathBuf>,
}

impl MethodSamples {
    pub fn n_samples(&self) -> usize {
        self.ed.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScanEntry {
    pub methods: BTreeMap<Method, MethodSamples>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectEntry {
    pub id: String,
    pub scan_a: ScanEntry,
    pub scan_b: ScanEntry,
}

impl SubjectEntry {
    pub fn scan(&self, scan: Scan) -> &ScanEntry {
        match scan {
            Scan::A => &self.scan_a,
            Scan::B => &self.scan_b,
        }
    }

    /// Methods present (identical across scans by construction).
    pub fn methods(&self) -> impl Iterator<Item = Method> + '_ {
        self.scan_a.methods.keys().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    /// Dataset name, taken from the manifest file stem.
    pub dataset: String,
    pub label_map: LabelMap,
    pub subjects: Vec<SubjectEntry>,
    /// When set, a CSV of precomputed biomarker values that bypasses
    /// volumetry entirely.
    pub precomputed_samples: Option<PathBuf>,
}

// --- raw JSON schema ---

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestJson {
    #[serde(default)]
    label_map: Option<BTreeMap<String, u16>>,
    #[serde(default)]
    precomputed_samples: Option<String>,
    subjects: Vec<SubjectJson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubjectJson {
    id: String,
    scans: BTreeMap<String, ScanJson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanJson {
    #[serde(default)]
    methods: BTreeMap<String, FramesJson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FramesJson {
    #[serde(rename = "ED")]
    ed: Vec<String>,
    #[serde(rename = "ES")]
    es: Vec<String>,
}

fn manifest_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Load and validate a dataset manifest.
///
/// With `strict`, every referenced mask file must already exist; otherwise
/// missing files surface lazily when the masks are parsed.
pub fn load_manifest(path: &Path, strict: bool) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: ManifestJson = serde_json::from_str(&text)
        .map_err(|e| manifest_err(path, format!("invalid JSON: {e}")))?;

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let label_map = match raw.label_map {
        Some(entries) => LabelMap::from_entries(entries)
            .map_err(|e| manifest_err(path, e.to_string()))?,
        None => LabelMap::default(),
    };

    let mut subjects = Vec::with_capacity(raw.subjects.len());
    let mut seen_ids = BTreeSet::new();
    for subject in raw.subjects {
        let id = subject.id;
        if !seen_ids.insert(id.clone()) {
            return Err(manifest_err(path, format!("duplicate subject id {id:?}")));
        }
        for key in subject.scans.keys() {
            if key != "A" && key != "B" {
                return Err(manifest_err(
                    path,
                    format!("subject {id:?} has unknown scan {key:?}, expected \"A\" or \"B\""),
                ));
            }
        }
        let take_scan = |scan: &str| -> Result<ScanEntry> {
            let raw_scan = subject
                .scans
                .get(scan)
                .ok_or_else(|| manifest_err(path, format!("subject {id:?}: missing scan {scan}")))?;
            let mut methods = BTreeMap::new();
            for (method_name, frames) in &raw_scan.methods {
                let method: Method = method_name
                    .parse()
                    .map_err(|_| manifest_err(path, format!("subject {id:?}: unknown method {method_name:?}")))?;
                if frames.ed.len() != frames.es.len() {
                    return Err(manifest_err(
                        path,
                        format!(
                            "subject {id:?} scan {scan} method {method_name}: {} ED samples vs {} ES samples",
                            frames.ed.len(),
                            frames.es.len()
                        ),
                    ));
                }
                if frames.ed.len() < 2 {
                    return Err(manifest_err(
                        path,
                        format!(
                            "subject {id:?} scan {scan} method {method_name}: needs N >= 2 samples, got {}",
                            frames.ed.len()
                        ),
                    ));
                }
                let resolve = |rel: &String| base.join(rel);
                methods.insert(
                    method,
                    MethodSamples {
                        ed: frames.ed.iter().map(resolve).collect(),
                        es: frames.es.iter().map(resolve).collect(),
                    },
                );
            }
            Ok(ScanEntry { methods })
        };
        let scan_a = take_scan("A")?;
        let scan_b = take_scan("B")?;

        // sample pairing across scans needs the same methods and the same N
        let methods_a: Vec<_> = scan_a.methods.keys().copied().collect();
        let methods_b: Vec<_> = scan_b.methods.keys().copied().collect();
        if methods_a != methods_b {
            return Err(manifest_err(
                path,
                format!("subject {id:?}: scans A and B declare different method sets"),
            ));
        }
        for (method, a) in &scan_a.methods {
            let b = &scan_b.methods[method];
            if a.n_samples() != b.n_samples() {
                return Err(manifest_err(
                    path,
                    format!(
                        "subject {id:?} method {method}: scan A has {} samples, scan B has {}",
                        a.n_samples(),
                        b.n_samples()
                    ),
                ));
            }
        }

        subjects.push(SubjectEntry { id, scan_a, scan_b });
    }

    let precomputed_samples = raw.precomputed_samples.map(|rel| base.join(rel));
    if let Some(csv) = &precomputed_samples {
        if !csv.exists() {
            return Err(manifest_err(
                path,
                format!("precomputed_samples file {} does not exist", csv.display()),
            ));
        }
    }

    if strict {
        for subject in &subjects {
            for scan in [Scan::A, Scan::B] {
                for samples in subject.scan(scan).methods.values() {
                    for mask in samples.ed.iter().chain(&samples.es) {
                        if !mask.exists() {
                            return Err(manifest_err(
                                path,
                                format!(
                                    "subject {:?}: referenced file {} does not exist",
                                    subject.id,
                                    mask.display()
                                ),
                            ));
                        }
                    }
                }
            }
        }
    }

    let dataset = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    Ok(DatasetManifest {
        dataset,
        label_map,
        subjects,
        precomputed_samples,
    })
}

/// Key for one precomputed sample set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PrecomputedKey {
    pub subject: String,
    pub scan: Scan,
    pub method: Method,
    pub biomarker: Biomarker,
}

/// Parse a precomputed-samples CSV
/// (`subject,scan,method,biomarker,sample_index,value`) into ordered sample
/// sets. Sample indices per key must be exactly 0..N-1.
pub fn load_precomputed_csv(path: &Path) -> Result<BTreeMap<PrecomputedKey, Vec<f64>>> {
    #[derive(Deserialize)]
    struct Row {
        subject: String,
        scan: Scan,
        method: Method,
        biomarker: Biomarker,
        sample_index: usize,
        value: f64,
    }

    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        detail: format!("cannot open precomputed CSV: {e}"),
    })?;
    let mut grouped: BTreeMap<PrecomputedKey, Vec<(usize, f64)>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: Row = row.map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: format!("bad precomputed CSV row: {e}"),
        })?;
        grouped
            .entry(PrecomputedKey {
                subject: row.subject,
                scan: row.scan,
                method: row.method,
                biomarker: row.biomarker,
            })
            .or_default()
            .push((row.sample_index, row.value));
    }

    let mut out = BTreeMap::new();
    for (key, mut indexed) in grouped {
        indexed.sort_by_key(|(i, _)| *i);
        for (expected, (i, _)) in indexed.iter().enumerate() {
            if *i != expected {
                return Err(Error::Manifest {
                    path: path.to_path_buf(),
                    detail: format!(
                        "subject {:?} {}/{}/{}: sample indices must be 0..N-1, found index {} at position {}",
                        key.subject, key.scan, key.method, key.biomarker, i, expected
                    ),
                });
            }
        }
        out.insert(key, indexed.into_iter().map(|(_, v)| v).collect());
    }
    Ok(out)
}
