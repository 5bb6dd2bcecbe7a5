//! The annulus series ℛ_p(w), its convergence verdict and translated sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{DyadicAnnulus, Region};
use crate::par;
use crate::sampling::{MassEstimate, QuadratureConfig};
use crate::trend::least_squares_slope;
use crate::weights::{dual_mass, inv_ess_sup, mass, WeightSpec};

/// Largest admissible annulus index.
pub const MAX_INDEX: i32 = 60;
/// Annulus indices used when no range is given.
pub const DEFAULT_RANGE: (i32, i32) = (1, 30);
/// Minimum number of terms for a verdict.
pub const MIN_TERMS: usize = 8;
/// Fitted ratios at or below this are geometric decay.
pub const CONVERGED_RATIO: f64 = 0.9;
/// Fitted ratios at or above this (minus rounding slack) are non-decaying.
pub const DIVERGED_RATIO: f64 = 1.0;
const RATIO_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converged,
    Diverged,
    Inconclusive,
}

/// How the terms are aggregated: summed (`p > 1`) or maximized (`p = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    Sum,
    Sup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict {
    pub verdict: Verdict,
    /// Least-squares slope of `log2(term)` per index over the last half.
    pub trend_slope: f64,
    /// `2^trend_slope`
    pub ratio: f64,
    pub note: Option<String>,
}

/// Classifies a series from the geometric trend of its last half.
pub fn classify_series(terms: &[f64], kind: SeriesKind) -> SeriesVerdict {
    let logs: Vec<f64> = terms.iter().map(|t| if *t > 0.0 { t.log2() } else { f64::NAN }).collect();
    classify_log_series(&logs, kind)
}

/// [`classify_series`] on `log2` of the terms, so terms below the
/// floating-point range keep their trend.
pub fn classify_log_series(logs: &[f64], kind: SeriesKind) -> SeriesVerdict {
    let n = logs.len();
    if n < MIN_TERMS {
        return SeriesVerdict {
            verdict: Verdict::Inconclusive,
            trend_slope: f64::NAN,
            ratio: f64::NAN,
            note: Some(format!("{n} terms given, at least {MIN_TERMS} needed")),
        };
    }
    let first = n / 2;
    let tail = &logs[first..];
    if tail.iter().any(|t| !t.is_finite()) {
        return SeriesVerdict {
            verdict: Verdict::Inconclusive,
            trend_slope: f64::NAN,
            ratio: f64::NAN,
            note: Some("non-positive or non-finite term in the tail".into()),
        };
    }
    let xs: Vec<f64> = (first..n).map(|i| i as f64).collect();
    let slope = least_squares_slope(&xs, tail);
    let ratio = slope.exp2();
    let rel = (1.0 + 1e-9f64).log2();
    let verdict = match kind {
        SeriesKind::Sum => {
            let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
            if ratio <= CONVERGED_RATIO {
                Verdict::Converged
            } else if ratio >= DIVERGED_RATIO - RATIO_SLACK && min > max - 1e12f64.log2() {
                Verdict::Diverged
            } else {
                Verdict::Inconclusive
            }
        }
        SeriesKind::Sup => {
            let running = running_max(logs);
            let head = running[first];
            let last = running[n - 1];
            if last - head <= rel {
                Verdict::Converged
            } else if running[first..].windows(2).all(|w| w[1] > w[0] + rel) {
                Verdict::Diverged
            } else {
                Verdict::Inconclusive
            }
        }
    };
    SeriesVerdict {
        verdict,
        trend_slope: slope,
        ratio,
        note: None,
    }
}

fn running_max(terms: &[f64]) -> Vec<f64> {
    terms
        .iter()
        .scan(f64::NEG_INFINITY, |m, t| {
            *m = m.max(*t);
            Some(*m)
        })
        .collect()
}

fn running_sum(terms: &[f64]) -> Vec<f64> {
    terms
        .iter()
        .scan(0.0, |s, t| {
            *s += t;
            Some(*s)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpReport {
    pub p: f64,
    pub i_range: (i32, i32),
    /// Vertical offset `t` of the annulus centers `(0̄, t)`.
    pub shift: f64,
    pub terms: Vec<f64>,
    pub term_errors: Vec<f64>,
    /// Running sums (`p > 1`) or running maxima (`p = 1`).
    pub partial: Vec<f64>,
    pub verdict: Verdict,
    pub trend_slope: f64,
    pub ratio: f64,
    pub note: Option<String>,
    /// Number of annuli whose Monte Carlo budget ran out before the error target.
    pub unconverged_terms: usize,
}

impl RpReport {
    pub fn total(&self) -> f64 {
        *self.partial.last().unwrap_or(&0.0)
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> {
        self.i_range.0..=self.i_range.1
    }

    /// Two-column table `i,term` with round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,term\n");
        for (i, t) in self.indices().zip(&self.terms) {
            out.push_str(&format!("{i},{t}\n"));
        }
        out
    }
}

/// `2^{ip/(p-1)} · M^{1/(1-p)}` evaluated through `log2` when either factor
/// saturates; returns the term and its `log2`.
fn log_space_term(m: &MassEstimate, i: i32, p: f64) -> (MassEstimate, f64) {
    let e = 1.0 / (p - 1.0);
    let log = f64::from(i) * p * e - m.value.log2() * e;
    let value = log.exp2();
    let term = MassEstimate {
        value,
        std_error: value * e * m.std_error / m.value,
        ..m.clone()
    };
    (term, log)
}

/// ℛ_p partial sums over origin-centered annuli `A_i`, `i ∈ i_range`.
pub fn rp_terms(spec: &WeightSpec, p: f64, i_range: (i32, i32), quad: &QuadratureConfig) -> Result<RpReport> {
    rp_translated(spec, p, 0.0, i_range, quad)
}

/// ℛ_p of the translated weight `w_t(x̄, s) = w(x̄, s - t)`.
pub fn rp_translated(
    spec: &WeightSpec,
    p: f64,
    t: f64,
    i_range: (i32, i32),
    quad: &QuadratureConfig,
) -> Result<RpReport> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("p must be at least 1, got {p}"));
    }
    let (i_min, i_max) = i_range;
    if i_min > i_max || i_max > MAX_INDEX || i_min < -MAX_INDEX {
        return invalid(format!(
            "annulus range {i_min}..={i_max} must be ordered and within ±{MAX_INDEX}"
        ));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("translation must be finite and nonnegative, got {t}"));
    }
    quad.validate()?;
    let d = spec.d;
    let mut center = vec![0.0; d];
    center[d - 1] = t;
    let indices: Vec<i32> = (i_min..=i_max).collect();
    let results = par::map_slice(&indices, |&i| {
        let region = Region::Annulus(DyadicAnnulus::centered(center.clone(), i));
        let scale = (i as f64).exp2();
        if p == 1.0 {
            inv_ess_sup(spec, &region, quad).map(|m| {
                let log = m.value.log2() + f64::from(i);
                (m.scaled(scale), log)
            })
        } else {
            let factor = scale.powf(p / (p - 1.0));
            dual_mass(spec, &region, p, quad).map(|m| {
                let term = m.scaled(factor);
                if term.value.is_finite() && term.value > 0.0 {
                    let log = term.value.log2();
                    (term, log)
                } else {
                    log_space_term(&mass(spec, &region, quad), i, p)
                }
            })
        }
    });
    let mut terms = Vec::with_capacity(indices.len());
    let mut errors = Vec::with_capacity(indices.len());
    let mut logs = Vec::with_capacity(indices.len());
    let mut unconverged = 0;
    for r in results {
        let (m, log) = r?;
        if !m.value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ℛ_p term overflowed; reduce i_max below {i_max}"
            )));
        }
        unconverged += usize::from(!m.target_met);
        terms.push(m.value);
        errors.push(m.std_error);
        logs.push(log);
    }
    let kind = if p == 1.0 { SeriesKind::Sup } else { SeriesKind::Sum };
    let partial = match kind {
        SeriesKind::Sum => running_sum(&terms),
        SeriesKind::Sup => running_max(&terms),
    };
    let v = classify_log_series(&logs, kind);
    Ok(RpReport {
        p,
        i_range,
        shift: t,
        terms,
        term_errors: errors,
        partial,
        verdict: v.verdict,
        trend_slope: v.trend_slope,
        ratio: v.ratio,
        note: v.note,
        unconverged_terms: unconverged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVerdict {
    UniformlyBounded,
    Growing,
    Inconclusive,
}

/// Totals grow by at least this factor across the top decade of `t`.
pub const GROWTH_FACTOR: f64 = 2.0;
/// Totals rise by at most this factor across the top decade of `t`.
pub const BOUNDED_FACTOR: f64 = 1.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub p: f64,
    pub t_grid: Vec<f64>,
    pub reports: Vec<RpReport>,
    pub totals: Vec<f64>,
    /// `S(t_max) / S(t_ref)` with `t_ref` the largest grid point at most `t_max / 10`.
    pub top_decade_growth: f64,
    pub verdict: SweepVerdict,
}

/// Evaluates `sup_t ℛ_p(w_t)` on a grid of vertical shifts.
pub fn sup_rp_sweep(
    spec: &WeightSpec,
    p: f64,
    t_grid: &[f64],
    i_range: (i32, i32),
    quad: &QuadratureConfig,
) -> Result<SweepReport> {
    if t_grid.len() < 6 {
        return Err(Error::Precondition(format!(
            "sweep needs at least 6 shifts, got {}",
            t_grid.len()
        )));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] > 0.0) {
        return Err(Error::Precondition("shift grid must be positive and strictly increasing".into()));
    }
    let t_max = t_grid[t_grid.len() - 1];
    if t_max / t_grid[0] < 1e3 {
        return Err(Error::Precondition("shift grid must span at least 3 decades".into()));
    }
    let mut reports = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        reports.push(rp_translated(spec, p, t, i_range, quad)?);
    }
    let totals: Vec<f64> = reports.iter().map(RpReport::total).collect();
    let r = t_grid.partition_point(|t| *t <= t_max / 10.0) - 1;
    let reference = totals[r];
    let top = totals[r..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let growth = totals[totals.len() - 1] / reference;
    let verdict = if growth >= GROWTH_FACTOR {
        SweepVerdict::Growing
    } else if top <= BOUNDED_FACTOR * reference {
        SweepVerdict::UniformlyBounded
    } else {
        SweepVerdict::Inconclusive
    };
    Ok(SweepReport {
        p,
        t_grid: t_grid.to_vec(),
        reports,
        totals,
        top_decade_growth: growth,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_examples() {
        let halves: Vec<f64> = (1..=20).map(|i| 0.5f64.powi(i)).collect();
        assert_eq!(classify_series(&halves, SeriesKind::Sum).verdict, Verdict::Converged);
        assert_eq!(classify_series(&[1.0; 12], SeriesKind::Sum).verdict, Verdict::Diverged);
        let slow: Vec<f64> = (1..=12).map(|i| 0.999f64.powi(i)).collect();
        assert_eq!(classify_series(&slow, SeriesKind::Sum).verdict, Verdict::Inconclusive);
        let short = classify_series(&[1.0; 5], SeriesKind::Sum);
        assert_eq!(short.verdict, Verdict::Inconclusive);
        assert!(short.note.is_some());
    }

    #[test]
    fn sup_series() {
        let bounded: Vec<f64> = (1..=16).map(|i| 1.0 - 0.5f64.powi(i.min(6))).collect();
        assert_eq!(classify_series(&bounded, SeriesKind::Sup).verdict, Verdict::Converged);
        let growing: Vec<f64> = (1..=16).map(|i| i as f64).collect();
        assert_eq!(classify_series(&growing, SeriesKind::Sup).verdict, Verdict::Diverged);
    }

    #[test]
    fn csv_has_one_row_per_term() {
        let w = WeightSpec::constant(3, 1.0).unwrap();
        let r = rp_terms(&w, 2.0, (1, 10), &QuadratureConfig::default()).unwrap();
        assert_eq!(r.to_csv().lines().count(), 11);
        assert_eq!(r.verdict, Verdict::Converged);
    }
}
