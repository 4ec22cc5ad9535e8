//! cardioprec — precision analysis of cardiac functional biomarkers derived
//! from multi-sample segmentations of paired scan/rescan acquisitions.
//!
//! The pipeline stages are:
//!
//! 1. **mask_io** – parse segmentation volumes (CPV1, NIfTI-1 subset) and
//!    dataset manifests into validated structures.
//! 2. **volumetry** – structure volumes by voxel counting; Dice overlap.
//! 3. **biomarkers** – LVEF/RVEF/LVM sample sets from ED/ES segmentations.
//! 4. **stats** – confidence intervals, Shapiro-Wilk normality, paired t and
//!    Wilcoxon signed-rank tests (exact by sign-flip enumeration up to
//!    n = 25).
//! 5. **precision** – per-subject and dataset-level scan-rescan precision
//!    metrics: mean±std of differences, CoV, CPP, CIoU, PDP.
//! 6. **simulator** – synthetic phantom scan-rescan datasets with analytic
//!    ground truth, for end-to-end validation.

pub mod biomarkers;
pub mod error;
pub mod mask_io;
pub mod pipeline;
pub mod precision;
pub mod report;
pub mod simulator;
pub mod stats;
pub mod volumetry;

pub use error::{Error, Result};
