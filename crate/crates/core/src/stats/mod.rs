//! Descriptive statistics, confidence intervals, normality testing, and the
//! paired hypothesis tests backing the precision metrics.
//!
//! All operations are pure and reentrant. The exact Wilcoxon path enumerates
//! sign assignments up to n = 25; beyond that a tie- and continuity-corrected
//! normal approximation takes over.

mod shapiro;
mod t_test;
mod wilcoxon;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};

pub use shapiro::shapiro_wilk;
pub use t_test::paired_t_test;
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, ZeroPolicy};

/// Closed real interval `[lo, hi]` at a given confidence level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    /// Confidence level, e.g. 0.95.
    pub level: f64,
    pub method: CiMethod,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Closed-interval containment.
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// How a confidence interval is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CiMethod {
    /// CI of the mean: `mean ± t_{(1+level)/2, n-1} * s / sqrt(n)`. Default.
    #[serde(rename = "t-mean")]
    TMean,
    /// Normal spread interval: `mean ± z_{(1+level)/2} * s`.
    #[serde(rename = "normal-approx")]
    NormalApprox,
    /// Empirical quantiles at `(1 ± level)/2`, linearly interpolated.
    #[serde(rename = "percentile")]
    Percentile,
}

impl CiMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CiMethod::TMean => "t-mean",
            CiMethod::NormalApprox => "normal-approx",
            CiMethod::Percentile => "percentile",
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t-mean" => Ok(CiMethod::TMean),
            "normal" | "normal-approx" => Ok(CiMethod::NormalApprox),
            "percentile" => Ok(CiMethod::Percentile),
            other => Err(Error::InvalidParameter(format!(
                "unknown CI method {other:?} (expected t-mean, normal, or percentile)"
            ))),
        }
    }
}

/// Which paired test produced a [`TestResult`]. `None` marks degenerate
/// inputs where no distributional test could run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "paired-t")]
    PairedT,
    #[serde(rename = "wilcoxon-signed-rank")]
    WilcoxonSignedRank,
    #[serde(rename = "none")]
    None,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::PairedT => "paired-t",
            TestKind::WilcoxonSignedRank => "wilcoxon-signed-rank",
            TestKind::None => "none",
        })
    }
}

/// Outcome of a paired similarity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    /// `p_value < alpha` when not degenerate; see the degenerate
    /// constructors for the forced cases.
    pub rejected: bool,
    pub alpha: f64,
    pub degenerate: bool,
}

impl TestResult {
    /// All differences are exactly zero: trivially identical distributions.
    pub fn degenerate_identical(alpha: f64) -> Self {
        Self {
            test: TestKind::None,
            statistic: 0.0,
            p_value: 1.0,
            rejected: false,
            alpha,
            degenerate: true,
        }
    }

    /// Differences are a nonzero constant: the shift is deterministic, any
    /// continuous test would reject, and the p-value degenerates to 0.
    pub fn degenerate_shift(direction: f64, alpha: f64) -> Self {
        Self {
            test: TestKind::None,
            statistic: direction.signum() * f64::INFINITY,
            p_value: 0.0,
            rejected: true,
            alpha,
            degenerate: true,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

fn check_paired(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!(
            "paired samples must have equal lengths, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Arithmetic mean and Bessel-corrected sample standard deviation.
/// Needs at least 2 values.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "sample standard deviation needs n >= 2, got {}",
            values.len()
        )));
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((m, (ss / (values.len() - 1) as f64).sqrt()))
}

/// Linearly interpolated empirical quantile (the `h = (n-1)p` convention)
/// over already-sorted values.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Confidence interval over a sample by the requested construction.
/// Needs n >= 2 and a level in (0, 1).
pub fn confidence_interval(values: &[f64], level: f64, method: CiMethod) -> Result<ConfidenceInterval> {
    if values.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "confidence interval needs n >= 2, got {}",
            values.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let (m, s) = mean_std(values)?;
    let (lo, hi) = match method {
        CiMethod::TMean => {
            let n = values.len() as f64;
            let dist = statrs::distribution::StudentsT::new(0.0, 1.0, n - 1.0)
                .expect("valid dof");
            let t = dist.inverse_cdf((1.0 + level) / 2.0);
            let half = t * s / n.sqrt();
            (m - half, m + half)
        }
        CiMethod::NormalApprox => {
            let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
            let z = normal.inverse_cdf((1.0 + level) / 2.0);
            (m - z * s, m + z * s)
        }
        CiMethod::Percentile => {
            let mut sorted = values.to_vec();
            sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
            (
                quantile_sorted(&sorted, (1.0 - level) / 2.0),
                quantile_sorted(&sorted, (1.0 + level) / 2.0),
            )
        }
    };
    Ok(ConfidenceInterval {
        lo,
        hi,
        level,
        method,
    })
}

/// Run the normality-gated paired test on index-paired samples: Shapiro-Wilk
/// on the differences routes to the paired t-test when `p >= alpha` and to
/// the Wilcoxon signed-rank test otherwise.
///
/// Degenerate difference sets skip the tests entirely: all-zero differences
/// are reported as identical (not rejected), a nonzero constant difference
/// as a deterministic shift (rejected).
pub fn select_paired_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TestResult> {
    check_paired(a, b)?;
    check_alpha(alpha)?;
    if a.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "normality-gated selection needs n >= 3, got {}",
            a.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&v| v == 0.0) {
        return Ok(TestResult::degenerate_identical(alpha));
    }
    if d.windows(2).all(|w| w[0] == w[1]) {
        return Ok(TestResult::degenerate_shift(d[0], alpha));
    }
    let (_, p_normal) = shapiro_wilk(&d)?;
    if p_normal >= alpha {
        paired_t_test(a, b, alpha)
    } else {
        wilcoxon_signed_rank(a, b, alpha)
    }
}
