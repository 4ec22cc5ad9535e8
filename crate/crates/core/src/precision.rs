//! Scan-rescan precision metrics: mean±std of differences, coefficient of
//! variation, confidence-interval containment (CPP), confidence-interval
//! overlap (CIoU), and the paired-test rejection rate (PDP), per subject and
//! aggregated per dataset.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::biomarkers::{Biomarker, Method, Scan};
use crate::error::{Error, Result};
use crate::stats::{
    confidence_interval, mean_std, select_paired_test, CiMethod, ConfidenceInterval, TestResult,
};

/// Which per-subject quantity CPP counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CppMode {
    /// Fraction of subjects whose scan-A mean lies inside the scan-B CI
    /// (and vice versa). Default.
    #[serde(rename = "mean")]
    #[default]
    Mean,
    /// Mean over subjects of the fraction of individual scan-A sample
    /// values inside the scan-B CI (and vice versa).
    #[serde(rename = "samples")]
    Samples,
}

/// How per-subject CoV values aggregate to a dataset value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CovMode {
    /// Arithmetic mean of per-subject pairwise CoVs. Default.
    #[serde(rename = "pairwise")]
    #[default]
    Pairwise,
    /// Root-mean-square of per-subject pairwise CoVs.
    #[serde(rename = "rms")]
    Rms,
}

macro_rules! mode_strings {
    ($name:ident { $($variant:ident => $text:literal),+ }) => {
        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
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
                        concat!("unknown ", stringify!($name), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

mode_strings!(CppMode { Mean => "mean", Samples => "samples" });
mode_strings!(CovMode { Pairwise => "pairwise", Rms => "rms" });

/// All sample sets for the two scans of one subject, keyed by biomarker and
/// method. Values at the same index across scans are paired draws.
#[derive(Debug, Clone, Default)]
pub struct SubjectPair {
    pub subject_id: String,
    samples: BTreeMap<(Method, Biomarker), ScanPairValues>,
}

#[derive(Debug, Clone)]
struct ScanPairValues {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl SubjectPair {
    pub fn new(subject_id: impl Into<String>) -> Self {
        Self {
            subject_id: subject_id.into(),
            samples: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, scan: Scan, method: Method, biomarker: Biomarker, values: Vec<f64>) {
        let entry = self
            .samples
            .entry((method, biomarker))
            .or_insert_with(|| ScanPairValues {
                a: Vec::new(),
                b: Vec::new(),
            });
        match scan {
            Scan::A => entry.a = values,
            Scan::B => entry.b = values,
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = (Method, Biomarker)> + '_ {
        self.samples.keys().copied()
    }

    pub fn values(&self, method: Method, biomarker: Biomarker) -> Result<(&[f64], &[f64])> {
        let entry = self.samples.get(&(method, biomarker)).ok_or_else(|| {
            Error::EmptyDataset(format!(
                "subject {}: no samples for {method}/{biomarker}",
                self.subject_id
            ))
        })?;
        if entry.a.is_empty() || entry.b.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "subject {}: {method}/{biomarker} is missing one scan",
                self.subject_id
            )));
        }
        if entry.a.len() != entry.b.len() {
            return Err(Error::LengthMismatch(format!(
                "subject {}: {method}/{biomarker} has {} scan-A samples vs {} scan-B samples",
                self.subject_id,
                entry.a.len(),
                entry.b.len()
            )));
        }
        Ok((&entry.a, &entry.b))
    }
}

/// Per-subject precision record for one (biomarker, method).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectPrecision {
    pub subject_id: String,
    pub biomarker: Biomarker,
    pub method: Method,
    pub mean_a: f64,
    pub mean_b: f64,
    pub abs_mean_diff: f64,
    pub pairwise_cov: f64,
    pub ci_a: ConfidenceInterval,
    pub ci_b: ConfidenceInterval,
    /// Scan-A mean inside the scan-B CI (closed interval).
    pub cpp_a_in_b: bool,
    /// Scan-B mean inside the scan-A CI.
    pub cpp_b_in_a: bool,
    /// Fraction of scan-A sample values inside the scan-B CI.
    pub frac_a_values_in_ci_b: f64,
    /// Fraction of scan-B sample values inside the scan-A CI.
    pub frac_b_values_in_ci_a: f64,
    pub ciou: f64,
    pub test: TestResult,
}

/// Interval intersection length over union length.
///
/// The union length is `len(a) + len(b) - len(intersection)` (length of the
/// set union). A zero-length union means both intervals are points: 1.0 if
/// they are the identical point, 0.0 otherwise.
pub fn ciou(a: &ConfidenceInterval, b: &ConfidenceInterval) -> f64 {
    let inter = (a.hi.min(b.hi) - a.lo.max(b.lo)).max(0.0);
    let union = a.width() + b.width() - inter;
    if union <= 0.0 {
        return if a.lo == b.lo && a.hi == b.hi { 1.0 } else { 0.0 };
    }
    inter / union
}

/// Closed-interval containment of a mean in the opposite scan's CI.
pub fn cpp_direction(mean_src: f64, ci_dst: &ConfidenceInterval) -> bool {
    ci_dst.contains(mean_src)
}

/// Coefficient of variation between a scan-rescan pair of means, percent:
/// the two-point sample std over the two-point mean,
/// `(|a - b|/sqrt(2)) / ((a + b)/2) * 100`.
pub fn pairwise_cov(mean_a: f64, mean_b: f64) -> Result<f64> {
    let pair_mean = (mean_a + mean_b) / 2.0;
    if pair_mean == 0.0 {
        return Err(Error::InvalidParameter(
            "pairwise CoV is undefined for a zero pair mean".into(),
        ));
    }
    Ok((mean_a - mean_b).abs() / std::f64::consts::SQRT_2 / pair_mean * 100.0)
}

/// Compute every per-subject precision field for one (biomarker, method).
pub fn subject_precision(
    pair: &SubjectPair,
    biomarker: Biomarker,
    method: Method,
    ci_method: CiMethod,
    ci_level: f64,
    alpha: f64,
) -> Result<SubjectPrecision> {
    let (values_a, values_b) = pair.values(method, biomarker)?;
    let (mean_a, _) = mean_std(values_a)?;
    let (mean_b, _) = mean_std(values_b)?;
    let ci_a = confidence_interval(values_a, ci_level, ci_method)?;
    let ci_b = confidence_interval(values_b, ci_level, ci_method)?;
    let frac_inside = |values: &[f64], ci: &ConfidenceInterval| {
        values.iter().filter(|&&v| ci.contains(v)).count() as f64 / values.len() as f64
    };
    Ok(SubjectPrecision {
        subject_id: pair.subject_id.clone(),
        biomarker,
        method,
        mean_a,
        mean_b,
        abs_mean_diff: (mean_a - mean_b).abs(),
        pairwise_cov: pairwise_cov(mean_a, mean_b)?,
        cpp_a_in_b: cpp_direction(mean_a, &ci_b),
        cpp_b_in_a: cpp_direction(mean_b, &ci_a),
        frac_a_values_in_ci_b: frac_inside(values_a, &ci_b),
        frac_b_values_in_ci_a: frac_inside(values_b, &ci_a),
        ciou: ciou(&ci_a, &ci_b),
        ci_a,
        ci_b,
        test: select_paired_test(values_a, values_b, alpha)?,
    })
}

/// CIoU bucket thresholds reported by the dataset aggregation.
pub const CIOU_THRESHOLDS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

/// Dataset-level aggregation for one (biomarker, method), full precision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupReport {
    pub biomarker: Biomarker,
    pub method: Method,
    pub n_subjects: usize,
    /// Mean over subjects of |mean_A - mean_B|.
    pub diff_mean: f64,
    /// Sample std over subjects of |mean_A - mean_B| (0 for one subject).
    pub diff_std: f64,
    /// Aggregated per-subject pairwise CoV, percent.
    pub cov_percent: f64,
    /// Percent of subjects passing the A-in-B CPP direction.
    pub cpp_a_to_b: f64,
    pub cpp_b_to_a: f64,
    /// Percent of subjects with CIoU strictly above 0/0.25/0.5/0.75.
    pub ciou_gt: [f64; 4],
    /// Percent of subjects whose paired test rejected the null.
    pub pdp: f64,
}

/// Dataset-level precision report across all (biomarker, method) groups.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub dataset: String,
    pub alpha: f64,
    pub ci_level: f64,
    pub ci_method: CiMethod,
    pub cpp_mode: CppMode,
    pub cov_mode: CovMode,
    pub groups: Vec<GroupReport>,
}

impl PrecisionReport {
    pub fn group(&self, biomarker: Biomarker, method: Method) -> Option<&GroupReport> {
        self.groups
            .iter()
            .find(|g| g.biomarker == biomarker && g.method == method)
    }
}

/// Neumaier compensated summation, so aggregate results do not depend on
/// how the reduction is chunked.
#[derive(Default, Clone, Copy)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn kahan_mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    let mut acc = KahanSum::default();
    let mut count = 0usize;
    for v in values {
        acc.add(v);
        count += 1;
    }
    debug_assert_eq!(count, n);
    acc.value() / n as f64
}

/// Aggregate per-subject records into a [`PrecisionReport`], grouped by
/// (biomarker, method).
pub fn aggregate(
    dataset: impl Into<String>,
    rows: &[SubjectPrecision],
    alpha: f64,
    ci_level: f64,
    ci_method: CiMethod,
    cpp_mode: CppMode,
    cov_mode: CovMode,
) -> Result<PrecisionReport> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset("no per-subject records to aggregate".into()));
    }
    let mut grouped: BTreeMap<(Biomarker, Method), Vec<&SubjectPrecision>> = BTreeMap::new();
    for row in rows {
        grouped.entry((row.biomarker, row.method)).or_default().push(row);
    }

    let mut groups = Vec::with_capacity(grouped.len());
    for ((biomarker, method), members) in grouped {
        let n = members.len();
        let nf = n as f64;
        let percent_where = |pred: &dyn Fn(&SubjectPrecision) -> bool| {
            100.0 * members.iter().filter(|r| pred(r)).count() as f64 / nf
        };

        let diff_mean = kahan_mean(members.iter().map(|r| r.abs_mean_diff), n);
        let diff_std = if n >= 2 {
            let mut ss = KahanSum::default();
            for r in &members {
                let d = r.abs_mean_diff - diff_mean;
                ss.add(d * d);
            }
            (ss.value() / (nf - 1.0)).sqrt()
        } else {
            0.0
        };

        let cov_percent = match cov_mode {
            CovMode::Pairwise => kahan_mean(members.iter().map(|r| r.pairwise_cov), n),
            CovMode::Rms => {
                kahan_mean(members.iter().map(|r| r.pairwise_cov.powi(2)), n).sqrt()
            }
        };

        let (cpp_a_to_b, cpp_b_to_a) = match cpp_mode {
            CppMode::Mean => (
                percent_where(&|r| r.cpp_a_in_b),
                percent_where(&|r| r.cpp_b_in_a),
            ),
            CppMode::Samples => (
                100.0 * kahan_mean(members.iter().map(|r| r.frac_a_values_in_ci_b), n),
                100.0 * kahan_mean(members.iter().map(|r| r.frac_b_values_in_ci_a), n),
            ),
        };

        let ciou_gt =
            CIOU_THRESHOLDS.map(|threshold| percent_where(&|r| r.ciou > threshold));
        let pdp = percent_where(&|r| r.test.rejected);

        groups.push(GroupReport {
            biomarker,
            method,
            n_subjects: n,
            diff_mean,
            diff_std,
            cov_percent,
            cpp_a_to_b,
            cpp_b_to_a,
            ciou_gt,
            pdp,
        });
    }

    Ok(PrecisionReport {
        dataset: dataset.into(),
        alpha,
        ci_level,
        ci_method,
        cpp_mode,
        cov_mode,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ci(lo: f64, hi: f64) -> ConfidenceInterval {
        ConfidenceInterval {
            lo,
            hi,
            level: 0.95,
            method: CiMethod::TMean,
        }
    }

    #[test]
    fn ciou_interval_arithmetic() {
        assert_eq!(ciou(&ci(0.0, 2.0), &ci(1.0, 3.0)), 1.0 / 3.0);
        assert_eq!(ciou(&ci(0.0, 1.0), &ci(0.0, 1.0)), 1.0);
        assert_eq!(ciou(&ci(0.0, 1.0), &ci(2.0, 3.0)), 0.0);
    }

    #[test]
    fn ciou_degenerate_points() {
        assert_eq!(ciou(&ci(5.0, 5.0), &ci(5.0, 5.0)), 1.0);
        assert_eq!(ciou(&ci(5.0, 5.0), &ci(6.0, 6.0)), 0.0);
        // touching intervals: zero-length intersection, positive union
        assert_eq!(ciou(&ci(0.0, 1.0), &ci(1.0, 2.0)), 0.0);
    }

    #[test]
    fn ciou_is_symmetric() {
        let a = ci(0.0, 2.0);
        let b = ci(1.5, 4.0);
        assert_eq!(ciou(&a, &b), ciou(&b, &a));
    }

    #[test]
    fn cpp_closed_endpoints() {
        let interval = ci(58.0, 61.0);
        assert!(cpp_direction(58.0, &interval));
        assert!(cpp_direction(61.0, &interval));
        assert!(cpp_direction(60.0, &interval));
        assert!(!cpp_direction(62.0, &interval));
        assert!(!cpp_direction(57.999, &interval));
    }

    #[test]
    fn pairwise_cov_values() {
        assert_eq!(pairwise_cov(60.0, 60.0).unwrap(), 0.0);
        // (3/sqrt(2)) / 61.5 * 100
        assert_relative_eq!(pairwise_cov(60.0, 63.0).unwrap(), 3.449, max_relative = 1e-3);
        assert_relative_eq!(pairwise_cov(63.0, 60.0).unwrap(), pairwise_cov(60.0, 63.0).unwrap());
        // formula limit check for a pathological pair
        assert_relative_eq!(pairwise_cov(100.0, 0.0).unwrap(), 141.42135623730951, max_relative = 1e-12);
        assert!(pairwise_cov(5.0, -5.0).is_err());
    }

    fn pair_with(values_a: Vec<f64>, values_b: Vec<f64>) -> SubjectPair {
        let mut pair = SubjectPair::new("s1");
        pair.insert(Scan::A, Method::De, Biomarker::Lvef, values_a);
        pair.insert(Scan::B, Method::De, Biomarker::Lvef, values_b);
        pair
    }

    #[test]
    fn identical_scans_are_a_perfect_precision_fixed_point() {
        let values = vec![59.0, 60.0, 61.0, 60.5, 59.5];
        let pair = pair_with(values.clone(), values);
        let row = subject_precision(&pair, Biomarker::Lvef, Method::De, CiMethod::TMean, 0.95, 0.05)
            .unwrap();
        assert_eq!(row.abs_mean_diff, 0.0);
        assert_eq!(row.ciou, 1.0);
        assert!(row.cpp_a_in_b && row.cpp_b_in_a);
        assert!(row.test.degenerate);
        assert!(!row.test.rejected);
    }

    #[test]
    fn large_constant_offset_separates_everything() {
        let values_a = vec![59.0, 60.0, 61.0, 60.5, 59.5];
        let values_b: Vec<f64> = values_a.iter().map(|v| v + 50.0).collect();
        let pair = pair_with(values_a, values_b);
        let row = subject_precision(&pair, Biomarker::Lvef, Method::De, CiMethod::TMean, 0.95, 0.05)
            .unwrap();
        assert_eq!(row.ciou, 0.0);
        assert!(!row.cpp_a_in_b && !row.cpp_b_in_a);
        assert!(row.test.rejected);
        assert_eq!(row.abs_mean_diff, 50.0);
    }

    fn quick_row(id: &str, ciou: f64, rejected: bool, cpp: bool) -> SubjectPrecision {
        SubjectPrecision {
            subject_id: id.to_string(),
            biomarker: Biomarker::Lvef,
            method: Method::De,
            mean_a: 60.0,
            mean_b: 60.0,
            abs_mean_diff: 0.0,
            pairwise_cov: 0.0,
            ci_a: ci(59.0, 61.0),
            ci_b: ci(59.0, 61.0),
            cpp_a_in_b: cpp,
            cpp_b_in_a: cpp,
            frac_a_values_in_ci_b: if cpp { 1.0 } else { 0.0 },
            frac_b_values_in_ci_a: if cpp { 1.0 } else { 0.0 },
            ciou,
            test: TestResult {
                test: crate::stats::TestKind::PairedT,
                statistic: 0.0,
                p_value: if rejected { 0.01 } else { 0.5 },
                rejected,
                alpha: 0.05,
                degenerate: false,
            },
        }
    }

    fn default_aggregate(rows: &[SubjectPrecision]) -> PrecisionReport {
        aggregate(
            "test",
            rows,
            0.05,
            0.95,
            CiMethod::TMean,
            CppMode::Mean,
            CovMode::Pairwise,
        )
        .unwrap()
    }

    #[test]
    fn aggregate_percentages() {
        // 92 subjects, 29 with mean_A inside CI_B -> 31.52%
        let rows: Vec<SubjectPrecision> = (0..92)
            .map(|i| quick_row(&format!("s{i}"), 1.0, false, i < 29))
            .collect();
        let report = default_aggregate(&rows);
        let g = report.group(Biomarker::Lvef, Method::De).unwrap();
        assert_relative_eq!(g.cpp_a_to_b, 31.52, max_relative = 1e-3);
        assert_relative_eq!(g.cpp_a_to_b, 100.0 * 29.0 / 92.0, max_relative = 1e-12);
    }

    #[test]
    fn aggregate_pdp() {
        // 20 subjects, 13 rejections -> 65.00
        let rows: Vec<SubjectPrecision> = (0..20)
            .map(|i| quick_row(&format!("s{i}"), 1.0, i < 13, true))
            .collect();
        let g = default_aggregate(&rows);
        assert_eq!(g.groups[0].pdp, 65.0);
    }

    #[test]
    fn aggregate_perfect_precision() {
        let rows: Vec<SubjectPrecision> =
            (0..10).map(|i| quick_row(&format!("s{i}"), 1.0, false, true)).collect();
        let g = default_aggregate(&rows);
        let group = &g.groups[0];
        assert_eq!(group.pdp, 0.0);
        assert_eq!((group.cpp_a_to_b, group.cpp_b_to_a), (100.0, 100.0));
        assert_eq!(group.ciou_gt, [100.0; 4]);
    }

    #[test]
    fn ciou_thresholds_are_strict_and_monotone() {
        let cious = [0.1, 0.3, 0.6, 0.8];
        let rows: Vec<SubjectPrecision> = cious
            .iter()
            .enumerate()
            .map(|(i, &c)| quick_row(&format!("s{i}"), c, false, true))
            .collect();
        let g = default_aggregate(&rows);
        assert_eq!(g.groups[0].ciou_gt, [100.0, 75.0, 50.0, 25.0]);

        // a 0.25 value must not count in the >0.25 bucket
        let rows = vec![quick_row("s0", 0.25, false, true)];
        let g = default_aggregate(&rows);
        assert_eq!(g.groups[0].ciou_gt, [100.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn aggregate_empty_errors() {
        assert!(default_aggregate_err(&[]));
    }

    fn default_aggregate_err(rows: &[SubjectPrecision]) -> bool {
        aggregate(
            "test",
            rows,
            0.05,
            0.95,
            CiMethod::TMean,
            CppMode::Mean,
            CovMode::Pairwise,
        )
        .is_err()
    }

    #[test]
    fn cov_modes_differ_on_spread() {
        let mut rows = vec![quick_row("s0", 1.0, false, true), quick_row("s1", 1.0, false, true)];
        rows[0].pairwise_cov = 1.0;
        rows[1].pairwise_cov = 3.0;
        let mean_mode = default_aggregate(&rows).groups[0].cov_percent;
        assert_eq!(mean_mode, 2.0);
        let rms = aggregate(
            "test",
            &rows,
            0.05,
            0.95,
            CiMethod::TMean,
            CppMode::Mean,
            CovMode::Rms,
        )
        .unwrap();
        assert_relative_eq!(rms.groups[0].cov_percent, 5.0f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn cpp_samples_mode_averages_fractions() {
        let mut rows = vec![quick_row("s0", 1.0, false, true), quick_row("s1", 1.0, false, true)];
        rows[0].frac_a_values_in_ci_b = 0.2;
        rows[1].frac_a_values_in_ci_b = 0.6;
        let report = aggregate(
            "test",
            &rows,
            0.05,
            0.95,
            CiMethod::TMean,
            CppMode::Samples,
            CovMode::Pairwise,
        )
        .unwrap();
        assert_relative_eq!(report.groups[0].cpp_a_to_b, 40.0, max_relative = 1e-12);
    }
}
