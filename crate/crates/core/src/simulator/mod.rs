//! Synthetic scan-rescan dataset generator.
//!
//! Each subject gets a randomized phantom; scan A is the phantom as-is and
//! scan B is the phantom after one between-scan perturbation (the replanning
//! analogue). Every scan then receives N within-scan perturbed samples per
//! uncertainty method at ED and ES, written as CPV1 volumes plus a manifest
//! and an analytic ground-truth sidecar.
//!
//! Randomness is counter-based and splits per subject, so generation order
//! (and thread scheduling) cannot change the output. Stream layout, from the
//! scenario seed:
//!
//! * `subject(i) = root.derive(i)`
//! * phantom geometry: `subject.derive(0)`
//! * between-scan perturbation: `subject.derive(1)`
//! * within-scan draw for (method m, sample j): `subject.derive(2).derive(m).derive(j)`
//!
//! The within-scan stream for sample j is shared by scan A and scan B (and
//! by ED/ES, which see the same rigid motion): sample index j denotes paired
//! draws, so a scenario with zero between-scan perturbation reproduces scan
//! A in scan B sample-for-sample.

pub mod perturb;
pub mod phantom;
pub mod rng;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::biomarkers::{Frame, Method, Scan};
use crate::error::{Error, Result};
use crate::mask_io::{write_volume, LabelVolume};

pub use perturb::{perturb, PerturbationSpec};
pub use phantom::{generate_phantom, PhantomSpec};
pub use rng::StreamRng;

/// One uncertainty method to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub samples_per_scan: usize,
    /// Multiplier on the within-scan perturbation magnitudes; lets one
    /// scenario give methods different draw variability (e.g. the narrow
    /// spread typical of dropout sampling).
    #[serde(default = "default_within_scale")]
    pub within_scale: f64,
}

fn default_within_scale() -> f64 {
    1.0
}

/// Subject-to-subject anatomy variation: a base phantom jittered per
/// subject, with ejection fractions drawn from target ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomTemplate {
    pub dims: (usize, usize, usize),
    pub spacing_mm: f64,
    pub lv_center_mm: [f64; 3],
    pub lv_inner_mm: [f64; 3],
    /// Wall thickness added to each inner semi-axis for the outer boundary.
    pub wall_mm: f64,
    pub rv_semi_axes_mm: [f64; 3],
    /// RV center offset from the LV center along +x.
    pub rv_offset_mm: f64,
    /// Relative per-axis jitter on semi-axes, uniform in ±this.
    pub jitter_frac: f64,
    pub lvef_range: [f64; 2],
    pub rvef_range: [f64; 2],
}

impl Default for PhantomTemplate {
    fn default() -> Self {
        Self {
            dims: (64, 36, 48),
            spacing_mm: 2.0,
            lv_center_mm: [-16.0, 0.0, 0.0],
            lv_inner_mm: [22.0, 22.0, 34.0],
            wall_mm: 6.0,
            rv_semi_axes_mm: [20.0, 18.0, 32.0],
            rv_offset_mm: 36.0,
            jitter_frac: 0.08,
            lvef_range: [52.0, 68.0],
            rvef_range: [48.0, 64.0],
        }
    }
}

impl PhantomTemplate {
    /// Draw one subject's phantom. Consumes a fixed number of draws (8)
    /// regardless of parameters, so streams stay aligned across scenario
    /// variants.
    pub fn draw_subject(&self, rng: &mut StreamRng) -> PhantomSpec {
        let jitter = |rng: &mut StreamRng, v: f64| v * (1.0 + rng.symmetric(self.jitter_frac));
        let lv_inner = [
            jitter(rng, self.lv_inner_mm[0]),
            jitter(rng, self.lv_inner_mm[1]),
            jitter(rng, self.lv_inner_mm[2]),
        ];
        let rv_axes = [
            jitter(rng, self.rv_semi_axes_mm[0]),
            jitter(rng, self.rv_semi_axes_mm[1]),
            jitter(rng, self.rv_semi_axes_mm[2]),
        ];
        let lvef = rng.uniform(self.lvef_range[0], self.lvef_range[1]);
        let rvef = rng.uniform(self.rvef_range[0], self.rvef_range[1]);
        let lv_scale = (1.0 - lvef / 100.0).cbrt();
        let rv_scale = (1.0 - rvef / 100.0).cbrt();
        PhantomSpec {
            dims: self.dims,
            spacing: (self.spacing_mm, self.spacing_mm, self.spacing_mm),
            lv_center_mm: self.lv_center_mm,
            lv_inner_mm: lv_inner,
            lv_outer_mm: [
                lv_inner[0] + self.wall_mm,
                lv_inner[1] + self.wall_mm,
                lv_inner[2] + self.wall_mm,
            ],
            rv_center_mm: [
                self.lv_center_mm[0] + self.rv_offset_mm,
                self.lv_center_mm[1],
                self.lv_center_mm[2],
            ],
            rv_semi_axes_mm: rv_axes,
            es_scale: [lv_scale; 3],
            rv_es_scale: [rv_scale; 3],
        }
    }
}

/// Full scenario description; serializable so scenarios can live in JSON
/// files next to the datasets they generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub n_subjects: usize,
    pub methods: Vec<MethodConfig>,
    pub phantom: PhantomTemplate,
    pub within_scan: PerturbationSpec,
    pub between_scan: PerturbationSpec,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".to_string(),
            n_subjects: 20,
            methods: vec![
                MethodConfig {
                    method: Method::De,
                    samples_per_scan: 5,
                    within_scale: 1.0,
                },
                MethodConfig {
                    method: Method::Tta,
                    samples_per_scan: 10,
                    within_scale: 1.0,
                },
                MethodConfig {
                    method: Method::Mcd,
                    samples_per_scan: 10,
                    within_scale: 0.3,
                },
            ],
            phantom: PhantomTemplate::default(),
            within_scan: PerturbationSpec {
                rotation_deg_max: 2.0,
                crop_fraction_max: 0.02,
                blur_sigma_range: [0.0, 0.6],
                translation_mm_max: [0.5, 0.5, 0.5],
            },
            between_scan: PerturbationSpec {
                rotation_deg_max: 4.0,
                crop_fraction_max: 0.0,
                blur_sigma_range: [0.2, 0.6],
                translation_mm_max: [2.0, 2.0, 1.0],
            },
            seed: 07_2020_26,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::Simulator("n_subjects must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Simulator("at least one method is required".into()));
        }
        for mc in &self.methods {
            if mc.samples_per_scan < 2 {
                return Err(Error::Simulator(format!(
                    "method {} needs samples_per_scan >= 2, got {}",
                    mc.method, mc.samples_per_scan
                )));
            }
            if !(mc.within_scale.is_finite() && mc.within_scale >= 0.0) {
                return Err(Error::Simulator(format!(
                    "method {} within_scale must be >= 0",
                    mc.method
                )));
            }
        }
        self.within_scan.validate()?;
        self.between_scan.validate()?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: format!("invalid scenario JSON: {e}"),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Paths produced by [`generate_scenario`].
#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub manifest_path: PathBuf,
    pub ground_truth_path: PathBuf,
}

/// Analytic ground-truth biomarkers for one subject.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(rename = "LVEF")]
    pub lvef: f64,
    #[serde(rename = "RVEF")]
    pub rvef: f64,
    #[serde(rename = "LVM")]
    pub lvm: f64,
}

struct SubjectOutput {
    subject_id: String,
    ground_truth: GroundTruth,
    /// scan -> method -> frame -> relative paths
    paths: BTreeMap<Scan, BTreeMap<Method, BTreeMap<Frame, Vec<String>>>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Generate the dataset on disk: CPV1 volumes under `volumes/`, a
/// `manifest.json`, and a `ground_truth.json` sidecar. Deterministic for a
/// fixed config (bit-identical trees across runs and thread counts).
pub fn generate_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<GeneratedScenario> {
    cfg.validate()?;
    let volumes_dir = out_dir.join("volumes");
    fs::create_dir_all(&volumes_dir).map_err(io_err(&volumes_dir))?;

    let root = StreamRng::from_seed(cfg.seed);
    let subjects: Vec<SubjectOutput> = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|s_idx| generate_subject(cfg, &root, s_idx, &volumes_dir))
        .collect::<Result<_>>()?;

    // manifest with paths relative to its own location
    let mut manifest_subjects = Vec::with_capacity(subjects.len());
    let mut ground_truth = BTreeMap::new();
    for subject in &subjects {
        let mut scans = serde_json::Map::new();
        for (scan, methods) in &subject.paths {
            let mut method_map = serde_json::Map::new();
            for (method, frames) in methods {
                method_map.insert(
                    method.to_string(),
                    json!({
                        "ED": frames[&Frame::Ed],
                        "ES": frames[&Frame::Es],
                    }),
                );
            }
            scans.insert(scan.to_string(), json!({ "methods": method_map }));
        }
        manifest_subjects.push(json!({ "id": subject.subject_id, "scans": scans }));
        ground_truth.insert(subject.subject_id.clone(), subject.ground_truth.clone());
    }
    let manifest = json!({
        "label_map": { "LVBP": 1, "LV-myocardium": 2, "RVBP": 3 },
        "subjects": manifest_subjects,
    });

    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .map_err(io_err(&manifest_path))?;
    let ground_truth_path = out_dir.join("ground_truth.json");
    fs::write(
        &ground_truth_path,
        serde_json::to_string_pretty(&ground_truth)?,
    )
    .map_err(io_err(&ground_truth_path))?;

    Ok(GeneratedScenario {
        manifest_path,
        ground_truth_path,
    })
}

fn generate_subject(
    cfg: &ScenarioConfig,
    root: &StreamRng,
    s_idx: usize,
    volumes_dir: &Path,
) -> Result<SubjectOutput> {
    let subject_id = format!("S{:03}", s_idx + 1);
    let subject_rng = root.derive(s_idx as u64);

    let spec = cfg.phantom.draw_subject(&mut subject_rng.derive(0));
    let ground_truth = GroundTruth {
        lvef: spec.analytic_lvef(),
        rvef: spec.analytic_rvef(),
        lvm: spec.analytic_lvm_g(),
    };

    let ed_a = generate_phantom(&spec, Frame::Ed)?;
    let es_a = generate_phantom(&spec, Frame::Es)?;
    // one replanning perturbation, applied identically to both frames
    let between_rng = subject_rng.derive(1);
    let ed_b = perturb(&ed_a, &cfg.between_scan, &mut between_rng.clone())?;
    let es_b = perturb(&es_a, &cfg.between_scan, &mut between_rng.clone())?;

    let bases: [(Scan, &LabelVolume, &LabelVolume); 2] =
        [(Scan::A, &ed_a, &es_a), (Scan::B, &ed_b, &es_b)];

    let mut paths: BTreeMap<Scan, BTreeMap<Method, BTreeMap<Frame, Vec<String>>>> =
        BTreeMap::new();
    for (m_idx, mc) in cfg.methods.iter().enumerate() {
        let within = cfg.within_scan.scaled(mc.within_scale);
        for sample in 0..mc.samples_per_scan {
            // the same draw stream for both scans and frames: index-paired draws
            let draw_rng = subject_rng.derive(2).derive(m_idx as u64).derive(sample as u64);
            for (scan, ed_base, es_base) in bases {
                for (frame, base) in [(Frame::Ed, ed_base), (Frame::Es, es_base)] {
                    let out = perturb(base, &within, &mut draw_rng.clone())?;
                    let file = format!(
                        "{subject_id}_{scan}_{method}_{frame}_{sample:03}.cpv",
                        method = mc.method
                    );
                    write_volume(&out, &volumes_dir.join(&file))?;
                    paths
                        .entry(scan)
                        .or_default()
                        .entry(mc.method)
                        .or_default()
                        .entry(frame)
                        .or_default()
                        .push(format!("volumes/{file}"));
                }
            }
        }
    }

    Ok(SubjectOutput {
        subject_id,
        ground_truth,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask_io::load_manifest;

    fn tiny_config() -> ScenarioConfig {
        ScenarioConfig {
            name: "tiny".into(),
            n_subjects: 2,
            methods: vec![MethodConfig {
                method: Method::De,
                samples_per_scan: 2,
                within_scale: 1.0,
            }],
            phantom: PhantomTemplate {
                dims: (32, 20, 24),
                spacing_mm: 4.0,
                lv_center_mm: [-16.0, 0.0, 0.0],
                lv_inner_mm: [20.0, 20.0, 30.0],
                wall_mm: 6.0,
                rv_semi_axes_mm: [18.0, 16.0, 28.0],
                rv_offset_mm: 34.0,
                jitter_frac: 0.05,
                lvef_range: [55.0, 65.0],
                rvef_range: [50.0, 60.0],
            },
            within_scan: PerturbationSpec::identity(),
            between_scan: PerturbationSpec::identity(),
            seed: 11,
        }
    }

    #[test]
    fn generates_a_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = generate_scenario(&tiny_config(), dir.path()).unwrap();
        let manifest = load_manifest(&out.manifest_path, true).unwrap();
        assert_eq!(manifest.subjects.len(), 2);
        assert_eq!(manifest.subjects[0].id, "S001");
        let samples = &manifest.subjects[0].scan_a.methods[&Method::De];
        assert_eq!(samples.n_samples(), 2);

        let gt: BTreeMap<String, GroundTruth> = serde_json::from_str(
            &fs::read_to_string(&out.ground_truth_path).unwrap(),
        )
        .unwrap();
        assert_eq!(gt.len(), 2);
        let g = &gt["S001"];
        assert!((55.0..=65.0).contains(&g.lvef), "{}", g.lvef);
        assert!((50.0..=60.0).contains(&g.rvef), "{}", g.rvef);
        assert!(g.lvm > 0.0);
    }

    #[test]
    fn zero_perturbation_makes_scan_b_identical_to_scan_a() {
        let dir = tempfile::tempdir().unwrap();
        let out = generate_scenario(&tiny_config(), dir.path()).unwrap();
        let manifest = load_manifest(&out.manifest_path, false).unwrap();
        for subject in &manifest.subjects {
            let a = &subject.scan_a.methods[&Method::De];
            let b = &subject.scan_b.methods[&Method::De];
            for (pa, pb) in a.ed.iter().zip(&b.ed) {
                assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
            }
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical_across_runs() {
        let cfg = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_scenario(&cfg, dir_a.path()).unwrap();
        generate_scenario(&cfg, dir_b.path()).unwrap();
        let tree = |dir: &Path| -> Vec<(String, Vec<u8>)> {
            let mut files: Vec<PathBuf> = walk(dir);
            files.sort();
            files
                .into_iter()
                .map(|p| {
                    let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                    (rel, fs::read(&p).unwrap())
                })
                .collect()
        };
        assert_eq!(tree(dir_a.path()), tree(dir_b.path()));
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                out.extend(walk(&path));
            } else {
                out.push(path);
            }
        }
        out
    }

    #[test]
    fn scenario_json_round_trip() {
        let cfg = ScenarioConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_scenario_json_fills_defaults() {
        let cfg: ScenarioConfig =
            serde_json::from_str(r#"{"n_subjects": 3, "seed": 5}"#).unwrap();
        assert_eq!(cfg.n_subjects, 3);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.methods.len(), 3);
    }
}
