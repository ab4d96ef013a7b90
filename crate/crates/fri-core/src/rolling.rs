//! Rolling-window Pearson correlation and the correlation-change delta.

use crate::market::Panel;
use crate::{FriError, Result};

/// Trailing rolling correlation of one pair.
///
/// Day indices refer to the graph calendar, where return observation k
/// belongs to day k+1 (day 0 carries no return). `values[j]` is the
/// Pearson correlation of the epsilon return observations on days
/// (t - epsilon, t] with window end t = epsilon + j; missing windows
/// (constant or containing non-finite values) hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingCorrSeries {
    pub pair: (String, String),
    pub epsilon: usize,
    values: Vec<f64>,
}

impl RollingCorrSeries {
    #[cfg(test)]
    pub(crate) fn from_values(pair: (String, String), epsilon: usize, values: Vec<f64>) -> Self {
        Self {
            pair,
            epsilon,
            values,
        }
    }

    /// First window-end day index (= epsilon).
    pub fn first_day(&self) -> usize {
        self.epsilon
    }

    /// Last window-end day index (= T, the number of return observations).
    pub fn last_day(&self) -> usize {
        self.epsilon + self.values.len() - 1
    }

    /// Correlation with window ending at day `t`, if defined.
    pub fn at_day(&self, t: usize) -> Option<f64> {
        if t < self.epsilon {
            return None;
        }
        let v = *self.values.get(t - self.epsilon)?;
        v.is_finite().then_some(v)
    }

    /// Raw slot storage; index j corresponds to day epsilon + j, missing
    /// values are NaN.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All defined correlation values in day order.
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| v.is_finite())
    }
}

fn window_corr(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&a, &b) in x.iter().zip(y) {
        if !a.is_finite() || !b.is_finite() {
            return f64::NAN;
        }
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
        min_x = min_x.min(a);
        max_x = max_x.max(a);
        min_y = min_y.min(b);
        max_y = max_y.max(b);
    }
    // A constant leg has no defined correlation.
    if min_x == max_x || min_y == max_y {
        return f64::NAN;
    }
    let var_x = n * sxx - sx * sx;
    let var_y = n * syy - sy * sy;
    if var_x <= 0.0 || var_y <= 0.0 {
        return f64::NAN;
    }
    ((n * sxy - sx * sy) / (var_x * var_y).sqrt()).clamp(-1.0, 1.0)
}

/// Computes the trailing epsilon-window correlation series for a pair of
/// tickers in a returns panel. The panel's T return observations yield
/// exactly T - epsilon + 1 window slots, ending on days epsilon..=T.
pub fn rolling_corr(
    returns: &Panel,
    a: &str,
    b: &str,
    epsilon: usize,
) -> Result<RollingCorrSeries> {
    if epsilon < 2 {
        return Err(FriError::InvalidParameter {
            name: "epsilon",
            msg: format!("window length {epsilon} < 2"),
        });
    }
    let x = returns.series_of(a)?;
    let y = returns.series_of(b)?;
    if x.len() < epsilon {
        return Err(FriError::InvalidParameter {
            name: "epsilon",
            msg: format!(
                "window length {epsilon} exceeds {} return observations",
                x.len()
            ),
        });
    }
    let values = (0..=x.len() - epsilon)
        .map(|j| window_corr(&x[j..j + epsilon], &y[j..j + epsilon]))
        .collect();
    let pair = if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    };
    Ok(RollingCorrSeries {
        pair,
        epsilon,
        values,
    })
}

/// Correlation change at day t: the correlation of the window after t
/// minus the correlation of the window ending at t. Defined when both
/// adjacent windows are defined, i.e. for t in [epsilon, T - epsilon].
pub fn corr_delta(series: &RollingCorrSeries, t: usize) -> Option<f64> {
    Some(series.at_day(t + series.epsilon)? - series.at_day(t)?)
}
