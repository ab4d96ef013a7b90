//! Small statistics helpers shared by the indicators.

use crate::{FriError, Result};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Arithmetic mean. Returns NaN on empty input.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divisor n). Returns NaN on empty input.
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divisor n).
pub fn population_std(xs: &[f64]) -> f64 {
    population_variance(xs).sqrt()
}

/// Sample variance (divisor n-1). Returns NaN for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Result of a one-sided Welch two-sample t-test.
#[derive(Debug, Clone, Copy)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// P(T >= t) under the null of equal means.
    pub p_value: f64,
}

/// Welch's t-test of H1: mean(a) > mean(b), unequal variances.
///
/// Degrees of freedom follow Welch-Satterthwaite. When both sample
/// variances are zero the statistic degenerates: p = 0 if mean(a) >
/// mean(b), else p = 1.
pub fn welch_one_sided_greater(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(FriError::InvalidParameter {
            name: "welch_samples",
            msg: format!(
                "need at least 2 values per side, got {} and {}",
                a.len(),
                b.len()
            ),
        });
    }
    let (ma, mb) = (mean(a), mean(b));
    let va = sample_variance(a) / a.len() as f64;
    let vb = sample_variance(b) / b.len() as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        let p = if ma > mb { 0.0 } else { 1.0 };
        return Ok(WelchTest {
            t: if ma > mb { f64::INFINITY } else { 0.0 },
            df: f64::INFINITY,
            p_value: p,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| FriError::Degenerate(e.to_string()))?;
    let p_value = 1.0 - dist.cdf(t);
    Ok(WelchTest { t, df, p_value })
}
