//! Log-log trend fits for infimum searches.

use serde::{Deserialize, Serialize};

/// Slope threshold separating flat from decaying tails.
pub const FLAT_SLOPE: f64 = 0.05;
/// A vanishing tail must end below this fraction of its first value.
pub const VANISH_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    BoundedBelow,
    Vanishing,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub trend: Trend,
    /// Fitted slope of `ln value` against `ln scale` over the last half.
    pub slope: f64,
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Classifies positive `values` measured at increasing `scales`.
///
/// Growing tails count as bounded below.
pub fn classify_trend(scales: &[f64], values: &[f64]) -> TrendFit {
    assert_eq!(scales.len(), values.len());
    let n = values.len();
    if n < 4 {
        return TrendFit {
            trend: Trend::Inconclusive,
            slope: f64::NAN,
        };
    }
    let first = n / 2;
    let tail = &values[first..];
    if tail.iter().any(|v| !(*v > 0.0)) {
        let trend = if values[n - 1] <= 0.0 && values[0] > 0.0 {
            Trend::Vanishing
        } else {
            Trend::Inconclusive
        };
        return TrendFit {
            trend,
            slope: f64::NEG_INFINITY,
        };
    }
    let xs: Vec<f64> = scales[first..].iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|v| v.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let trend = if slope.abs() < FLAT_SLOPE || slope > FLAT_SLOPE {
        Trend::BoundedBelow
    } else if slope < -FLAT_SLOPE && values[n - 1] < VANISH_FRACTION * values[0] {
        Trend::Vanishing
    } else {
        Trend::Inconclusive
    };
    TrendFit { trend, slope }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geometric(n: usize) -> Vec<f64> {
        (0..n).map(|k| 2f64.powi(k as i32)).collect()
    }

    #[test]
    fn recovers_power_law_slope() {
        let s = geometric(12);
        let v: Vec<f64> = s.iter().map(|x| 3.0 * x.powf(-0.5)).collect();
        let fit = classify_trend(&s, &v);
        assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12);
        assert_eq!(fit.trend, Trend::Vanishing);
    }

    #[test]
    fn flat_and_growing_are_bounded() {
        let s = geometric(10);
        assert_eq!(classify_trend(&s, &[1.0; 10]).trend, Trend::BoundedBelow);
        assert_eq!(classify_trend(&s, &s).trend, Trend::BoundedBelow);
    }

    #[test]
    fn slow_decay_without_drop_is_inconclusive() {
        let s = geometric(8);
        let v: Vec<f64> = s.iter().map(|x| x.powf(-0.1)).collect();
        assert_eq!(classify_trend(&s, &v).trend, Trend::Inconclusive);
    }
}
