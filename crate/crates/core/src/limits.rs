//! Traces of test functions along rays and vertical lines, limit censuses and
//! the averaged decay checks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm, sphere_area, ball_volume, Cube};
use crate::par;
use crate::rp::{rp_terms, Verdict as SeriesVerdict};
use crate::sampling::{
    ball_strata, bits_key, box_strata, integrate, rng_for, shell_strata, unit_vector, QuadratureConfig, SampleMean,
};
use crate::weights::{positive, WeightSpec};
use crate::witnesses::{energy_between, BumpChain, TestFunction};

const TAG_RAYS: u64 = 0x7a75;
const TAG_SPHERE: u64 = 0x5f4e;
const TAG_ANNULUS_AVG: u64 = 0xa7a7;
const TAG_OFFCENTER: u64 = 0x0ff5;
const TAG_CUBE_AVG: u64 = 0xc0be;

/// Geometric schedule `t0 · ratio^j · o` for `j < n` and every offset `o`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t0: f64,
    pub ratio: f64,
    pub n: usize,
    pub offsets: Vec<f64>,
}

impl Default for Schedule {
    /// Dyadic points and their midpoints `1.5 · 2^j`, `j < 30`.
    fn default() -> Self {
        Self {
            t0: 1.0,
            ratio: 2.0,
            n: 30,
            offsets: vec![1.0, 1.5],
        }
    }
}

impl Schedule {
    pub fn geometric(t0: f64, ratio: f64, n: usize) -> Self {
        Self {
            t0,
            ratio,
            n,
            offsets: vec![1.0],
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let mut t: Vec<f64> = (0..self.n)
            .flat_map(|j| {
                let base = self.t0 * self.ratio.powi(j as i32);
                self.offsets.iter().map(move |o| base * o)
            })
            .collect();
        t.sort_by(f64::total_cmp);
        t
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.ratio > 1.0 && self.t0.is_finite() && self.ratio.is_finite()) {
            return invalid("schedule needs t0 > 0 and ratio > 1");
        }
        if self.offsets.is_empty() || self.offsets.iter().any(|o| !(*o >= 1.0 && *o < self.ratio)) {
            return invalid("schedule offsets must lie in [1, ratio)");
        }
        let t = self.points();
        if t.len() < 50 {
            return Err(Error::Precondition(format!("schedule has {} points, need at least 50", t.len())));
        }
        let decades = (t[t.len() - 1] / t[0]).log10();
        if decades < 6.0 {
            return Err(Error::Precondition(format!("schedule spans {decades:.2} decades, need at least 6")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Absolute limit tolerance.
    pub tolerance: f64,
    /// Fraction of trailing samples forming the convergence window.
    pub window_fraction: f64,
    /// Spacing of the three divergence levels above the first sample.
    pub level_step: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            window_fraction: 0.25,
            level_step: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum TraceVerdict {
    Converged { c: f64, residual: f64 },
    Oscillating { amplitude: f64 },
    DivergentToInfinity,
    Inconclusive,
}

impl TraceVerdict {
    pub fn label(&self) -> String {
        match self {
            Self::Converged { c, residual } => format!("converged c={c} residual={residual}"),
            Self::Oscillating { amplitude } => format!("oscillating amplitude={amplitude}"),
            Self::DivergentToInfinity => "divergent-to-infinity".into(),
            Self::Inconclusive => "inconclusive".into(),
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, Self::Converged { .. })
    }

    pub fn limit(&self) -> Option<f64> {
        match self {
            Self::Converged { c, .. } => Some(*c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "line", rename_all = "kebab-case")]
pub enum Line {
    /// `base + t ξ`
    Ray { direction: Vec<f64>, base: Vec<f64> },
    /// `(x̄, t)`
    Vertical { base: Vec<f64> },
}

impl Line {
    fn point(&self, t: f64) -> Vec<f64> {
        match self {
            Line::Ray { direction, base } => base.iter().zip(direction).map(|(b, v)| b + t * v).collect(),
            Line::Vertical { base } => {
                let mut x = base.clone();
                x.push(t);
                x
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub line: Line,
    pub schedule: Schedule,
    pub config: TraceConfig,
    pub t: Vec<f64>,
    /// `u(t_j)`; `None` at singular points.
    pub u: Vec<Option<f64>>,
    pub singular: usize,
    pub verdict: TraceVerdict,
}

impl TraceReport {
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let k = self.t.iter().position(|s| *s == t)?;
        self.u[k]
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# verdict: {}\nt,u\n", self.verdict.label());
        for (t, u) in self.t.iter().zip(&self.u) {
            match u {
                Some(v) => out.push_str(&format!("{t},{v}\n")),
                None => out.push_str(&format!("{t},\n")),
            }
        }
        out
    }
}

/// Verdict for a sequence of samples at increasing parameters.
pub fn classify_samples(values: &[f64], config: &TraceConfig) -> TraceVerdict {
    let n = values.len();
    if n < 8 {
        return TraceVerdict::Inconclusive;
    }
    let tol = config.tolerance;
    let w = ((n as f64 * config.window_fraction).ceil() as usize).clamp(4, n);
    let window = &values[n - w..];
    let c = values[n - 1];
    let residual = window.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
    if residual < tol {
        return TraceVerdict::Converged { c, residual };
    }
    let first = values[0];
    let levels = [1.0, 2.0, 3.0].map(|k| first + k * config.level_step);
    let start = values.iter().position(|v| *v > levels[0]);
    if let Some(s) = start {
        let monotone = values[s..].windows(2).all(|p| p[1] >= p[0] - tol);
        if monotone && c > levels[2] {
            return TraceVerdict::DivergentToInfinity;
        }
    }
    let tail = &values[n / 2..];
    let chunk = tail.len() / 3;
    if chunk >= 2 {
        let amps: Vec<f64> = tail
            .chunks(chunk)
            .take(3)
            .map(|c| {
                let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                hi - lo
            })
            .collect();
        if amps.iter().all(|a| *a >= 10.0 * tol) {
            return TraceVerdict::Oscillating {
                amplitude: amps.iter().cloned().fold(f64::INFINITY, f64::min),
            };
        }
    }
    TraceVerdict::Inconclusive
}

fn trace_line(f: &TestFunction, line: Line, schedule: &Schedule, config: &TraceConfig) -> Result<TraceReport> {
    schedule.validate()?;
    if !(config.tolerance > 0.0 && config.window_fraction > 0.0 && config.window_fraction <= 1.0) {
        return invalid("trace tolerance and window fraction must be positive");
    }
    let t = schedule.points();
    let u: Vec<Option<f64>> = t.iter().map(|s| f.eval(&line.point(*s))).collect();
    let valid: Vec<f64> = u.iter().flatten().copied().collect();
    let singular = u.len() - valid.len();
    let verdict = classify_samples(&valid, config);
    Ok(TraceReport {
        line,
        schedule: schedule.clone(),
        config: config.clone(),
        t,
        u,
        singular,
        verdict,
    })
}

/// Samples `u(t ξ)` along the schedule.
pub fn trace_ray(f: &TestFunction, direction: &[f64], schedule: &Schedule, config: &TraceConfig) -> Result<TraceReport> {
    if direction.len() != f.d {
        return Err(Error::DimensionMismatch {
            expected: f.d,
            got: direction.len(),
        });
    }
    let r = norm(direction);
    if !(r > 0.0) {
        return invalid("ray direction must be nonzero");
    }
    let direction = direction.iter().map(|v| v / r).collect();
    let line = Line::Ray {
        direction,
        base: vec![0.0; f.d],
    };
    trace_line(f, line, schedule, config)
}

/// The ray in direction `-ξ`, for the two-sided variant.
pub fn trace_ray_negated(f: &TestFunction, direction: &[f64], schedule: &Schedule, config: &TraceConfig) -> Result<TraceReport> {
    let neg: Vec<f64> = direction.iter().map(|v| -v).collect();
    trace_ray(f, &neg, schedule, config)
}

/// Samples `u(x̄, t)` along the schedule.
pub fn trace_vertical(f: &TestFunction, base: &[f64], schedule: &Schedule, config: &TraceConfig) -> Result<TraceReport> {
    if base.len() + 1 != f.d {
        return Err(Error::DimensionMismatch {
            expected: f.d - 1,
            got: base.len(),
        });
    }
    trace_line(f, Line::Vertical { base: base.to_vec() }, schedule, config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCensus {
    pub n: usize,
    pub lines: Vec<Line>,
    pub verdicts: Vec<TraceVerdict>,
    pub converged_fraction: f64,
    pub oscillating_fraction: f64,
    pub divergent_fraction: f64,
    /// Most common limit, defined when at least half the lines converge.
    pub modal_value: Option<f64>,
    /// Fraction of all lines converging to the modal value within tolerance.
    pub agreeing_fraction: f64,
}

impl LimitCensus {
    fn from_reports(reports: Vec<TraceReport>, tol: f64) -> Self {
        let n = reports.len();
        let frac = |k: usize| k as f64 / n as f64;
        let limits: Vec<f64> = reports.iter().filter_map(|r| r.verdict.limit()).collect();
        let osc = reports
            .iter()
            .filter(|r| matches!(r.verdict, TraceVerdict::Oscillating { .. }))
            .count();
        let div = reports
            .iter()
            .filter(|r| r.verdict == TraceVerdict::DivergentToInfinity)
            .count();
        let mut modal_value = None;
        let mut agreeing = 0;
        if 2 * limits.len() >= n && !limits.is_empty() {
            for c in &limits {
                let k = limits.iter().filter(|v| (*v - c).abs() <= tol).count();
                if k > agreeing {
                    agreeing = k;
                    modal_value = Some(*c);
                }
            }
        }
        let (lines, verdicts) = reports.into_iter().map(|r| (r.line, r.verdict)).unzip();
        Self {
            n,
            lines,
            verdicts,
            converged_fraction: frac(limits.len()),
            oscillating_fraction: frac(osc),
            divergent_fraction: frac(div),
            modal_value,
            agreeing_fraction: frac(agreeing),
        }
    }

    /// Fraction of lines not converging to `c` within `tol`.
    pub fn exception_fraction(&self, c: f64, tol: f64) -> f64 {
        let bad = self
            .verdicts
            .iter()
            .filter(|v| v.limit().is_none_or(|l| (l - c).abs() > tol))
            .count();
        bad as f64 / self.n as f64
    }

    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                Line::Ray { direction, .. } => Some(direction.clone()),
                Line::Vertical { .. } => None,
            })
            .collect()
    }
}

/// Uniform directions on the sphere drawn from `seed`.
pub fn sample_directions(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, &[TAG_RAYS, d as u64]);
    (0..n)
        .map(|_| {
            let mut v = vec![0.0; d];
            unit_vector(&mut rng, &mut v);
            v
        })
        .collect()
}

/// Census of ray traces over given directions.
pub fn ray_census(f: &TestFunction, directions: &[Vec<f64>], schedule: &Schedule, config: &TraceConfig) -> Result<LimitCensus> {
    let reports = par::map_slice(directions, |xi| trace_ray(f, xi, schedule, config));
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LimitCensus::from_reports(reports, config.tolerance))
}

/// Census of ray traces over `n_rays` uniform directions.
pub fn radial_census(f: &TestFunction, n_rays: usize, schedule: &Schedule, seed: u64, config: &TraceConfig) -> Result<LimitCensus> {
    if n_rays < 16 {
        return Err(Error::Precondition(format!("census needs at least 16 rays, got {n_rays}")));
    }
    ray_census(f, &sample_directions(f.d, n_rays, seed), schedule, config)
}

/// Census of vertical traces over the given base points.
pub fn vertical_census(f: &TestFunction, bases: &[Vec<f64>], schedule: &Schedule, config: &TraceConfig) -> Result<LimitCensus> {
    if bases.is_empty() {
        return invalid("vertical census needs base points");
    }
    let reports = par::map_slice(bases, |b| trace_vertical(f, b, schedule, config));
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LimitCensus::from_reports(reports, config.tolerance))
}

/// Parameter interval `(t_in, t_out)` where the ray `t ξ` is inside the open cube.
pub fn ray_cube_interval(direction: &[f64], cube: &Cube) -> Option<(f64, f64)> {
    let h = 0.5 * cube.edge;
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    for (v, c) in direction.iter().zip(&cube.center) {
        let (a, b) = (c - h, c + h);
        if *v == 0.0 {
            if !(a < 0.0 && 0.0 < b) {
                return None;
            }
            continue;
        }
        let (s, e) = if *v > 0.0 { (a / v, b / v) } else { (b / v, a / v) };
        lo = lo.max(s);
        hi = hi.min(e);
    }
    (lo < hi).then_some((lo, hi))
}

/// Whether the ray meets any chain cube inside the parameter range `[t_lo, t_hi]`.
pub fn ray_meets_chain(direction: &[f64], chain: &BumpChain, t_lo: f64, t_hi: f64) -> bool {
    chain
        .cubes
        .iter()
        .filter_map(|q| ray_cube_interval(direction, q))
        .any(|(a, b)| b > t_lo && a < t_hi)
}

/// Average of `|u(rξ) - c|` over uniform directions `ξ`.
pub fn sphere_average(f: &TestFunction, r: f64, c: f64, n_dirs: usize, seed: u64) -> Result<SampleMean> {
    if !(r > 0.0) || n_dirs < 2 {
        return invalid("sphere average needs r > 0 and at least two directions");
    }
    const CHUNK: usize = 4096;
    let chunks = n_dirs.div_ceil(CHUNK);
    let parts = par::map_indexed(chunks, |k| {
        let mut rng = rng_for(seed, &[TAG_SPHERE, r.to_bits(), k as u64]);
        let mut x = vec![0.0; f.d];
        let count = CHUNK.min(n_dirs - k * CHUNK);
        let mut vals = Vec::with_capacity(count);
        for _ in 0..count {
            unit_vector(&mut rng, &mut x);
            x.iter_mut().for_each(|v| *v *= r);
            if let Some(u) = f.eval(&x) {
                vals.push((u - c).abs());
            }
        }
        vals
    });
    let vals: Vec<f64> = parts.into_iter().flatten().collect();
    let n = vals.len() as u64;
    if n < 2 {
        return Err(Error::Precondition("sphere average hit the singular set everywhere".into()));
    }
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Ok(SampleMean {
        value: mean,
        std_error: (var / n as f64).sqrt(),
        n_samples: n,
    })
}

fn region_average<F>(f: &TestFunction, strata: &[crate::sampling::Stratum], key: &[u64], c: f64, quad: &QuadratureConfig, volume: F) -> SampleMean
where
    F: FnOnce() -> f64,
{
    let [m] = integrate(strata, key, quad, |x| f.eval(x).map(|u| [(u - c).abs()]));
    let vol = volume();
    SampleMean {
        value: m.value / vol,
        std_error: m.std_error / vol,
        n_samples: m.n_samples,
    }
}

/// Lebesgue average of `|u - c|` over `B(0,t) ∖ B(0,t/2)`.
pub fn annulus_average(f: &TestFunction, t: f64, c: f64, quad: &QuadratureConfig) -> Result<SampleMean> {
    if !(t > 0.0) {
        return invalid("annulus radius must be positive");
    }
    quad.validate()?;
    let strata = shell_strata(&vec![0.0; f.d], 0.5 * t, t, quad.radial_strata);
    Ok(region_average(f, &strata, &[TAG_ANNULUS_AVG, t.to_bits(), c.to_bits()], c, quad, || {
        ball_volume(f.d, t) - ball_volume(f.d, 0.5 * t)
    }))
}

/// Lebesgue average of `|u - c|` over `B(x, |x|/2)`.
pub fn offcenter_average(f: &TestFunction, x: &[f64], c: f64, quad: &QuadratureConfig) -> Result<SampleMean> {
    if x.len() != f.d {
        return Err(Error::DimensionMismatch {
            expected: f.d,
            got: x.len(),
        });
    }
    let r = 0.5 * norm(x);
    if !(r > 0.0) {
        return invalid("off-center ball needs x != 0");
    }
    quad.validate()?;
    let strata = ball_strata(x, r, quad.radial_strata as u32);
    Ok(region_average(f, &strata, &[TAG_OFFCENTER, bits_key(x), c.to_bits()], c, quad, || {
        ball_volume(f.d, r)
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeAverage {
    pub cube: Cube,
    /// `∫_Q u w / w(Q)`; `None` when the mass vanishes.
    pub value: Option<f64>,
    pub mass: f64,
    pub mass_std_error: f64,
}

/// Weighted averages `u_{Q_i}` with numerator and mass from shared samples.
pub fn cube_average_sequence(f: &TestFunction, spec: &WeightSpec, cubes: &[Cube], quad: &QuadratureConfig) -> Result<Vec<CubeAverage>> {
    quad.validate()?;
    if f.d != spec.d || cubes.iter().any(|q| q.dim() != spec.d) {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got: f.d,
        });
    }
    Ok(par::map_slice(cubes, |q| {
        let strata = box_strata(&q.to_box(), quad.radial_strata.max(1 << q.dim()));
        let key = [TAG_CUBE_AVG, bits_key(&q.center), q.edge.to_bits()];
        let [num, mass] = integrate(&strata, &key, quad, |x| {
            let w = positive(spec.value(x))?;
            Some([f.eval(x)? * w, w])
        });
        let value = (mass.value > 2.0 * mass.std_error && mass.value > 0.0).then(|| num.value / mass.value);
        CubeAverage {
            cube: q.clone(),
            value,
            mass: mass.value,
            mass_std_error: mass.std_error,
        }
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub rows: Vec<DecayRow>,
    /// Largest ratio divided by the first positive ratio.
    pub spread: f64,
    pub bounded: bool,
}

/// Compares `∫_{𝕊} |u(rξ) - c|` with the tail energy `‖∇u‖_{L^p(B(0,R)∖B(0,r), w)}`.
#[allow(clippy::too_many_arguments)]
pub fn decay_ratio_check(
    f: &TestFunction,
    spec: &WeightSpec,
    p: f64,
    r_grid: &[f64],
    c: f64,
    r_max: f64,
    n_dirs: usize,
    quad: &QuadratureConfig,
) -> Result<DecayCheck> {
    let rp = rp_terms(spec, p, (0, 40), quad)?;
    if rp.verdict != SeriesVerdict::Converged {
        return Err(Error::Precondition(format!(
            "decay check needs a convergent ℛ_p series, verdict is {:?}",
            rp.verdict
        )));
    }
    if r_grid.iter().any(|r| !(*r > 0.0 && *r < r_max)) {
        return invalid("grid radii must lie in (0, r_max)");
    }
    let area = sphere_area(f.d);
    let rows = r_grid
        .iter()
        .map(|&r| {
            let lhs = sphere_average(f, r, c, n_dirs, quad.seed)?.value * area;
            let rhs = energy_between(f, spec, p, quad, r, r_max)?.value.max(0.0).powf(1.0 / p);
            let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
            Ok(DecayRow { r, lhs, rhs, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    let first = rows.iter().map(|r| r.ratio).find(|v| *v > 0.0);
    let max = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let spread = first.map_or(0.0, |f| max / f);
    Ok(DecayCheck {
        bounded: max.is_finite() && spread <= 10.0,
        rows,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witnesses::{axis_chain, loglog_function};
    use approx::assert_relative_eq;

    #[test]
    fn default_schedule_is_admissible() {
        let s = Schedule::default();
        s.validate().unwrap();
        assert_eq!(s.points().len(), 60);
        assert!(Schedule::geometric(1.0, 2.0, 10).validate().is_err());
    }

    #[test]
    fn constant_converges() {
        let f = TestFunction::constant(3, 2.5);
        let r = trace_ray(&f, &[1.0, 1.0, 0.0], &Schedule::default(), &TraceConfig::default()).unwrap();
        assert_eq!(r.verdict, TraceVerdict::Converged { c: 2.5, residual: 0.0 });
    }

    #[test]
    fn loglog_diverges() {
        let f = loglog_function(3);
        let r = trace_ray(&f, &[0.0, 1.0, 0.0], &Schedule::default(), &TraceConfig::default()).unwrap();
        assert_eq!(r.verdict, TraceVerdict::DivergentToInfinity);
    }

    #[test]
    fn axis_chain_oscillates_vertically() {
        let f = axis_chain(3, 40).unwrap();
        let r = trace_vertical(&f, &[0.0, 0.0], &Schedule::default(), &TraceConfig::default()).unwrap();
        assert!(matches!(r.verdict, TraceVerdict::Oscillating { .. }));
        assert_eq!(r.value_at(8.0), Some(1.0));
        assert_eq!(r.value_at(12.0), Some(0.0));
    }

    #[test]
    fn inverse_norm_averages() {
        let f = TestFunction::inverse_norm(3);
        let s = sphere_average(&f, 10.0, 0.0, 100, 1).unwrap();
        assert_relative_eq!(s.value, 0.1, max_relative = 1e-14);
        assert!(s.std_error < 1e-14);
        let q = QuadratureConfig::default();
        let a = annulus_average(&f, 8.0, 0.0, &q).unwrap();
        assert!((a.value - 24.0 / (448.0 / 3.0)).abs() < 3.0 * a.std_error + 1e-9);
    }

    #[test]
    fn ray_cube_interval_on_axis() {
        let q = Cube::new(vec![0.0, 0.0, 8.0], 2.0).unwrap();
        assert_eq!(ray_cube_interval(&[0.0, 0.0, 1.0], &q), Some((7.0, 9.0)));
        assert_eq!(ray_cube_interval(&[1.0, 0.0, 0.0], &q), None);
    }
}
