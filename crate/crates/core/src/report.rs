//! Report serialization: per-subject CSV, dataset-level JSON and CSV, and
//! CIoU bar-chart data.
//!
//! Dataset-level numbers are rendered at two decimal places (the precision
//! used by scan-rescan tables in the literature); the JSON report keeps the
//! untruncated values in a `_raw` object per group. The per-subject CSV is
//! full precision throughout since downstream commands re-read it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::biomarkers::{Biomarker, Method};
use crate::error::{Error, Result};
use crate::pipeline::{DiceRow, DiceSummary};
use crate::precision::{PrecisionReport, SubjectPrecision, CIOU_THRESHOLDS};
use crate::stats::{CiMethod, TestKind};

/// Round to two decimal places, half away from zero.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Flat per-subject record, one CSV row. Field order defines the header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerSubjectRow {
    pub subject_id: String,
    pub biomarker: Biomarker,
    pub method: Method,
    pub mean_a: f64,
    pub mean_b: f64,
    pub abs_mean_diff: f64,
    pub pairwise_cov: f64,
    pub ci_level: f64,
    pub ci_method: CiMethod,
    pub ci_a_lo: f64,
    pub ci_a_hi: f64,
    pub ci_b_lo: f64,
    pub ci_b_hi: f64,
    pub cpp_a_in_b: bool,
    pub cpp_b_in_a: bool,
    pub frac_a_values_in_ci_b: f64,
    pub frac_b_values_in_ci_a: f64,
    pub ciou: f64,
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
    pub alpha: f64,
    pub degenerate: bool,
}

impl From<&SubjectPrecision> for PerSubjectRow {
    fn from(row: &SubjectPrecision) -> Self {
        Self {
            subject_id: row.subject_id.clone(),
            biomarker: row.biomarker,
            method: row.method,
            mean_a: row.mean_a,
            mean_b: row.mean_b,
            abs_mean_diff: row.abs_mean_diff,
            pairwise_cov: row.pairwise_cov,
            ci_level: row.ci_a.level,
            ci_method: row.ci_a.method,
            ci_a_lo: row.ci_a.lo,
            ci_a_hi: row.ci_a.hi,
            ci_b_lo: row.ci_b.lo,
            ci_b_hi: row.ci_b.hi,
            cpp_a_in_b: row.cpp_a_in_b,
            cpp_b_in_a: row.cpp_b_in_a,
            frac_a_values_in_ci_b: row.frac_a_values_in_ci_b,
            frac_b_values_in_ci_a: row.frac_b_values_in_ci_a,
            ciou: row.ciou,
            test: row.test.test,
            statistic: row.test.statistic,
            p_value: row.test.p_value,
            rejected: row.test.rejected,
            alpha: row.test.alpha,
            degenerate: row.test.degenerate,
        }
    }
}

pub fn write_per_subject_csv(path: &Path, rows: &[SubjectPrecision]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(Error::from)?;
    for row in rows {
        writer.serialize(PerSubjectRow::from(row))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn read_per_subject_csv(path: &Path) -> Result<Vec<PerSubjectRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        detail: format!("cannot open per-subject CSV: {e}"),
    })?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row.map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: format!("bad per-subject CSV row: {e}"),
        })?);
    }
    Ok(rows)
}

/// The dataset-level report as a JSON value: rounded fields plus a `_raw`
/// object with full precision per group.
pub fn report_json_value(report: &PrecisionReport) -> serde_json::Value {
    let groups: Vec<serde_json::Value> = report
        .groups
        .iter()
        .map(|g| {
            json!({
                "biomarker": g.biomarker,
                "method": g.method,
                "n_subjects": g.n_subjects,
                "diff_mean": round2(g.diff_mean),
                "diff_std": round2(g.diff_std),
                "cov_percent": round2(g.cov_percent),
                "cpp_a_to_b": round2(g.cpp_a_to_b),
                "cpp_b_to_a": round2(g.cpp_b_to_a),
                "ciou_gt_0": round2(g.ciou_gt[0]),
                "ciou_gt_25": round2(g.ciou_gt[1]),
                "ciou_gt_50": round2(g.ciou_gt[2]),
                "ciou_gt_75": round2(g.ciou_gt[3]),
                "pdp": round2(g.pdp),
                "_raw": {
                    "diff_mean": g.diff_mean,
                    "diff_std": g.diff_std,
                    "cov_percent": g.cov_percent,
                    "cpp_a_to_b": g.cpp_a_to_b,
                    "cpp_b_to_a": g.cpp_b_to_a,
                    "ciou_gt_0": g.ciou_gt[0],
                    "ciou_gt_25": g.ciou_gt[1],
                    "ciou_gt_50": g.ciou_gt[2],
                    "ciou_gt_75": g.ciou_gt[3],
                    "pdp": g.pdp,
                },
            })
        })
        .collect();
    json!({
        "dataset": report.dataset,
        "alpha": report.alpha,
        "ci_level": report.ci_level,
        "ci_method": report.ci_method,
        "cpp_mode": report.cpp_mode,
        "cov_mode": report.cov_mode,
        "groups": groups,
    })
}

pub fn write_report_json(path: &Path, report: &PrecisionReport) -> Result<()> {
    let text = serde_json::to_string_pretty(&report_json_value(report))?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub const REPORT_CSV_HEADER: &str = "biomarker,method,n_subjects,diff_mean,diff_std,cov_percent,cpp_a_to_b,cpp_b_to_a,ciou_gt_0,ciou_gt_25,ciou_gt_50,ciou_gt_75,pdp";

/// The dataset-level report as CSV text, same rounded numbers as the JSON.
pub fn report_csv_string(report: &PrecisionReport) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for g in &report.groups {
        out.push_str(&format!(
            "{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            g.biomarker,
            g.method,
            g.n_subjects,
            round2(g.diff_mean),
            round2(g.diff_std),
            round2(g.cov_percent),
            round2(g.cpp_a_to_b),
            round2(g.cpp_b_to_a),
            round2(g.ciou_gt[0]),
            round2(g.ciou_gt[1]),
            round2(g.ciou_gt[2]),
            round2(g.ciou_gt[3]),
            round2(g.pdp),
        ));
    }
    out
}

pub fn write_report_csv(path: &Path, report: &PrecisionReport) -> Result<()> {
    fs::write(path, report_csv_string(report)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Bar-chart data for the CIoU threshold distribution, recomputed from
/// per-subject rows: for each (biomarker, method), the percentage of
/// subjects with CIoU strictly above 0%, 25%, 50%, 75%.
pub fn ciou_chart_data(rows: &[PerSubjectRow]) -> serde_json::Value {
    let mut grouped: BTreeMap<(Biomarker, Method), Vec<f64>> = BTreeMap::new();
    for row in rows {
        grouped
            .entry((row.biomarker, row.method))
            .or_default()
            .push(row.ciou);
    }
    let series: Vec<serde_json::Value> = grouped
        .into_iter()
        .map(|((biomarker, method), cious)| {
            let n = cious.len() as f64;
            let percents: Vec<f64> = CIOU_THRESHOLDS
                .iter()
                .map(|&t| round2(100.0 * cious.iter().filter(|&&c| c > t).count() as f64 / n))
                .collect();
            json!({
                "biomarker": biomarker,
                "method": method,
                "n_subjects": cious.len(),
                "thresholds_percent": [0, 25, 50, 75],
                "percent_subjects_above": percents,
            })
        })
        .collect();
    json!({ "ciou_distribution": series })
}

pub fn write_dice_csv(path: &Path, rows: &[DiceRow], summary: &[DiceSummary]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(Error::from)?;
    writer.write_record([
        "subject",
        "scan",
        "method",
        "frame",
        "sample_index",
        "structure",
        "dice",
    ])?;
    for row in rows {
        writer.write_record([
            row.subject.as_str(),
            row.scan.as_str(),
            row.method.as_str(),
            row.frame.as_str(),
            &row.sample_index.to_string(),
            &row.structure,
            &format!("{:?}", row.dice),
        ])?;
    }
    for s in summary {
        writer.write_record([
            "ALL",
            "ALL",
            "ALL",
            "ALL",
            "",
            &s.structure,
            &format!("{:?}", s.mean_dice),
        ])?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}
