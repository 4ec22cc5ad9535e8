//! Two-sided paired Student t-test on index-paired samples.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats::{check_alpha, check_paired, mean_std, TestKind, TestResult};

/// Paired t-test on the differences `d_i = a_i - b_i`:
/// `t = mean(d) / (s_d / sqrt(n))`, two-sided p from Student t with n-1
/// degrees of freedom.
///
/// Degenerate difference sets short-circuit: all zeros report p = 1 (not
/// rejected), a nonzero constant reports p = 0 (rejected), both flagged.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TestResult> {
    check_paired(a, b)?;
    check_alpha(alpha)?;
    if a.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "paired t-test needs n >= 2, got {}",
            a.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (d_mean, d_std) = mean_std(&d)?;
    if d_std == 0.0 {
        return Ok(if d_mean == 0.0 {
            TestResult::degenerate_identical(alpha)
        } else {
            TestResult::degenerate_shift(d_mean, alpha)
        });
    }
    let n = d.len() as f64;
    let t = d_mean / (d_std / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("valid dof");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TestResult {
        test: TestKind::PairedT,
        statistic: t,
        p_value: p,
        rejected: p < alpha,
        alpha,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hand_computed_case() {
        // d = [1..5]: t = 3/(sqrt(2.5)/sqrt(5)) = 4.2426,
        // two-sided p = 0.013236 (scipy.stats.ttest_rel)
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t_test(&a, &b, 0.05).unwrap();
        assert_eq!(r.test, TestKind::PairedT);
        assert_relative_eq!(r.statistic, 4.242640687119285, max_relative = 1e-12);
        assert_relative_eq!(r.p_value, 0.013235599563682695, max_relative = 1e-9);
        assert!(r.rejected);
        assert!(!r.degenerate);
    }

    #[test]
    fn identical_samples_are_degenerate_not_rejected() {
        let a = [3.0, 1.0, 4.0];
        let r = paired_t_test(&a, &a, 0.05).unwrap();
        assert!(r.degenerate);
        assert!(!r.rejected);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn constant_nonzero_difference_is_degenerate_rejected() {
        let a = [3.0, 1.0, 4.0];
        let b = [4.0, 2.0, 5.0];
        let r = paired_t_test(&a, &b, 0.05).unwrap();
        assert!(r.degenerate);
        assert!(r.rejected);
        assert_eq!(r.p_value, 0.0);
        assert!(r.statistic.is_infinite() && r.statistic < 0.0);
    }

    #[test]
    fn antisymmetric_in_argument_order() {
        let a = [5.0, 7.0, 6.5, 8.0, 5.5];
        let b = [4.8, 7.4, 6.0, 8.3, 5.2];
        let ab = paired_t_test(&a, &b, 0.05).unwrap();
        let ba = paired_t_test(&b, &a, 0.05).unwrap();
        assert_relative_eq!(ab.statistic, -ba.statistic, max_relative = 1e-12);
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn length_mismatch_errors() {
        assert!(paired_t_test(&[1.0, 2.0], &[1.0], 0.05).is_err());
    }

    #[test]
    fn rejected_iff_p_below_alpha() {
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t_test(&a, &b, 0.01).unwrap();
        assert!(!r.rejected); // p = 0.0132 > 0.01
    }
}
