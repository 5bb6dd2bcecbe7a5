//! A_p and doubling constants, and infimum searches over cubes, strips and windows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{AxisBox, Cube};
use crate::par;
use crate::profile::PiecewiseProfile;
use crate::quadrature;
use crate::sampling::{ball_strata, integrate, rng_for, QuadratureConfig, Stratum};
use crate::trend::{classify_trend, least_squares_slope, Trend};
use crate::weights::{box_mass, positive, WeightSpec};

const TAG_BALL: u64 = 0xba11;
const TAG_BIG_BALL: u64 = 0xba12;
const MAX_DEPTH: u32 = 60;
/// Minimum number of sampled points per ball for the `p = 1` extrema.
pub const EXTREMA_POINTS: usize = 10_000;

/// A seeded family of balls: log-uniform radii, uniform centers in a cube,
/// and every `anchored_every`-th ball centered at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub n_balls: usize,
    pub radius_range: (f64, f64),
    pub center_box: Cube,
    pub anchored_every: usize,
}

impl BallFamily {
    pub fn new(n_balls: usize, radius_range: (f64, f64), center_box: Cube) -> Self {
        Self {
            n_balls,
            radius_range,
            center_box,
            anchored_every: 4,
        }
    }

    pub fn anchored_every(mut self, k: usize) -> Self {
        self.anchored_every = k;
        self
    }

    fn validate(&self, d: usize) -> Result<()> {
        let (a, b) = self.radius_range;
        if self.n_balls == 0 || self.anchored_every == 0 {
            return invalid("ball family needs n_balls >= 1 and anchored_every >= 1");
        }
        if !(a > 0.0 && b >= a && b.is_finite()) {
            return invalid(format!("radius range ({a}, {b}) must satisfy 0 < r_min <= r_max"));
        }
        if self.center_box.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.center_box.dim(),
            });
        }
        Ok(())
    }

    /// Center and radius of ball `k`; independent of `n_balls`.
    pub fn ball(&self, seed: u64, k: usize) -> (Vec<f64>, f64) {
        let mut rng = rng_for(seed, &[TAG_BALL, k as u64, 0]);
        let (a, b) = self.radius_range;
        let u: f64 = rng.random();
        let r = a * ((b / a).ln() * u).exp();
        let d = self.center_box.dim();
        let center = if k.is_multiple_of(self.anchored_every) {
            vec![0.0; d]
        } else {
            let h = 0.5 * self.center_box.edge;
            self.center_box
                .center
                .iter()
                .map(|c| c - h + rng.random::<f64>() * 2.0 * h)
                .collect()
        };
        (center, r)
    }

    fn depth(&self, quad: &QuadratureConfig, r: f64) -> u32 {
        let extra = (r / self.radius_range.0).log2().ceil().max(0.0) as u32;
        (quad.radial_strata as u32 + extra).min(MAX_DEPTH)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApEstimate {
    pub p: f64,
    /// Largest ball product found.
    pub value: f64,
    pub n_balls: usize,
    pub radius_range: (f64, f64),
    pub center_box: Cube,
    pub argmax_center: Vec<f64>,
    pub argmax_radius: f64,
    pub caveat: Option<String>,
}

/// Ball product `(avg w)(avg w^{-1/(p-1)})^{p-1}`, or `avg w / min w` for `p = 1`.
fn ball_product(spec: &WeightSpec, p: f64, strata: &[Stratum], key: &[u64], quad: &QuadratureConfig) -> f64 {
    let volume: f64 = strata.iter().map(Stratum::volume).sum();
    if p == 1.0 {
        let per = quad
            .samples_per_stratum(strata.len())
            .max(EXTREMA_POINTS.div_ceil(strata.len()));
        let d = spec.d;
        let mut x = vec![0.0; d];
        let mut total = 0.0;
        let mut min = f64::INFINITY;
        for (k, s) in strata.iter().enumerate() {
            let mut path = key.to_vec();
            path.push(k as u64);
            let mut rng = rng_for(quad.seed, &path);
            let mut sum = 0.0;
            let mut n = 0;
            while n < per {
                s.sample(&mut rng, &mut x);
                if let Some(v) = positive(spec.value(&x)) {
                    sum += v;
                    min = min.min(v);
                    n += 1;
                }
            }
            total += s.volume() * sum / per as f64;
        }
        return total / volume / min;
    }
    let s = -1.0 / (p - 1.0);
    let [a, b] = integrate(strata, key, quad, |x| {
        positive(spec.value(x)).map(|v| [v, v.powf(s)])
    });
    (a.value / volume) * (b.value / volume).powf(p - 1.0)
}

/// Largest A_p ball product over a seeded family of balls.
pub fn estimate_ap_constant(spec: &WeightSpec, p: f64, quad: &QuadratureConfig, family: &BallFamily) -> Result<ApEstimate> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("p must be at least 1, got {p}"));
    }
    quad.validate()?;
    family.validate(spec.d)?;
    let values = par::map_indexed(family.n_balls, |k| {
        let (center, r) = family.ball(quad.seed, k);
        let strata = ball_strata(&center, r, family.depth(quad, r));
        ball_product(spec, p, &strata, &[TAG_BALL, k as u64], quad)
    });
    let (best, value) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if *v > acc.1 { (k, *v) } else { acc });
    let (argmax_center, argmax_radius) = family.ball(quad.seed, best);
    Ok(ApEstimate {
        p,
        value,
        n_balls: family.n_balls,
        radius_range: family.radius_range,
        center_box: family.center_box.clone(),
        argmax_center,
        argmax_radius,
        caveat: (p == 1.0).then(|| {
            format!("essential infimum replaced by the minimum over at least {EXTREMA_POINTS} sampled points per ball")
        }),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Bounded,
    Growing,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipTrend {
    pub p: f64,
    /// Radius ranges `[2^{-L}, 2^L]` for each level `L`.
    pub levels: Vec<u32>,
    pub estimates: Vec<f64>,
    /// Fitted slope of `log2(estimate)` per level over the last half.
    pub slope: f64,
    pub verdict: Membership,
}

/// Growth per level (in `log2` units) above which the estimates are unbounded.
pub const GROWTH_SLOPE: f64 = 0.25;
/// Growth per level below which the estimates count as bounded.
pub const BOUNDED_SLOPE: f64 = 0.05;

/// A_p estimates over nested radius ranges `[2^{-L}, 2^L]`, centers in `Q(0, 2^L)`.
pub fn ap_membership_trend(
    spec: &WeightSpec,
    p: f64,
    quad: &QuadratureConfig,
    levels: &[u32],
    n_balls: usize,
) -> Result<MembershipTrend> {
    if levels.len() < 3 {
        return invalid("membership trend needs at least 3 levels");
    }
    let mut estimates = Vec::with_capacity(levels.len());
    for &l in levels {
        let s = (l as f64).exp2();
        let family = BallFamily::new(n_balls, (1.0 / s, s), Cube::new(vec![0.0; spec.d], s)?);
        estimates.push(estimate_ap_constant(spec, p, quad, &family)?.value);
    }
    let first = levels.len() / 2;
    let xs: Vec<f64> = levels[first..].iter().map(|l| *l as f64).collect();
    let ys: Vec<f64> = estimates[first..].iter().map(|v| v.log2()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let verdict = if slope >= GROWTH_SLOPE {
        Membership::Growing
    } else if slope.abs() < BOUNDED_SLOPE {
        Membership::Bounded
    } else {
        Membership::Inconclusive
    };
    Ok(MembershipTrend {
        p,
        levels: levels.to_vec(),
        estimates,
        slope,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingEstimate {
    pub value: f64,
    pub n_balls: usize,
    /// Balls whose inner mass was indistinguishable from zero.
    pub skipped: usize,
}

/// Largest `w(B(x, 2r)) / w(B(x, r))` over a seeded family of balls.
pub fn estimate_doubling(spec: &WeightSpec, quad: &QuadratureConfig, family: &BallFamily) -> Result<DoublingEstimate> {
    quad.validate()?;
    family.validate(spec.d)?;
    let radial = spec.radial_profile();
    let ratios = par::map_indexed(family.n_balls, |k| {
        let (center, r) = family.ball(quad.seed, k);
        let depth = family.depth(quad, r);
        if let (Some(v), true) = (&radial, center.iter().all(|c| *c == 0.0)) {
            let m = (spec.d - 1) as u32;
            return Some(v.moment(0.0, 2.0 * r, m) / v.moment(0.0, r, m));
        }
        let integrand = |x: &[f64]| positive(spec.value(x)).map(|v| [v]);
        let [small] = integrate(&ball_strata(&center, r, depth), &[TAG_BALL, k as u64], quad, integrand);
        let [big] = integrate(&ball_strata(&center, 2.0 * r, depth), &[TAG_BIG_BALL, k as u64], quad, integrand);
        if !(small.value > 2.0 * small.std_error) {
            None
        } else {
            Some(big.value / small.value)
        }
    });
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    let value = ratios.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    if skipped == ratios.len() {
        return Err(Error::ZeroMass {
            region: "every sampled ball".into(),
            value: 0.0,
            std_error: 0.0,
        });
    }
    Ok(DoublingEstimate {
        value,
        n_balls: family.n_balls,
        skipped,
    })
}

/// Where an infimum was attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Argmin {
    Cube(Cube),
    Box(AxisBox),
    Window { r: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfimumReport {
    pub value: f64,
    pub argmin: Argmin,
    pub trend: Trend,
    pub slope: f64,
    /// Scales at which the per-scale minima were taken.
    pub scales: Vec<f64>,
    pub minima: Vec<f64>,
}

fn lattice_in_shell(d: usize, step: f64, r_in: f64, r_out: f64) -> Vec<Vec<f64>> {
    let n = (r_out / step).floor() as i64;
    let mut out = Vec::new();
    let mut idx = vec![-n; d];
    loop {
        let c: Vec<f64> = idx.iter().map(|k| *k as f64 * step).collect();
        let r = crate::geometry::norm(&c);
        if r >= r_in && r < r_out {
            out.push(c);
        }
        let mut k = 0;
        loop {
            if k == d {
                return out;
            }
            idx[k] += 1;
            if idx[k] <= n {
                break;
            }
            idx[k] = -n;
            k += 1;
        }
    }
}

/// Minimum unit-cube mass over cube centers inside `B(0, R)`.
///
/// Centers are taken shell by shell on `{2^{k-1} <= |c| < 2^k}` with lattice
/// spacing `max(grid_step, 2^{k-2})`; the trend is fitted to the per-shell minima.
pub fn unit_cube_infimum(spec: &WeightSpec, search_radius: f64, grid_step: f64, quad: &QuadratureConfig) -> Result<InfimumReport> {
    if !(search_radius >= 1.0) {
        return invalid(format!("search radius must be at least 1, got {search_radius}"));
    }
    if !(grid_step > 0.0) {
        return invalid("grid step must be positive");
    }
    let d = spec.d;
    let shells = search_radius.log2().ceil() as i32;
    let mut centers: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut scales = Vec::new();
    for k in 0..=shells {
        let (r_in, r_out) = if k == 0 { (0.0, 1.0) } else { ((k as f64 - 1.0).exp2(), (k as f64).exp2()) };
        let step = grid_step.max((k as f64 - 2.0).exp2());
        let shell: Vec<Vec<f64>> = lattice_in_shell(d, step, r_in, r_out.min(search_radius + 1e-9));
        if shell.is_empty() {
            continue;
        }
        let slot = scales.len();
        scales.push(r_out);
        centers.extend(shell.into_iter().map(|c| (slot, c)));
    }
    let masses = par::map_slice(&centers, |(_, c)| {
        box_mass(spec, &Cube { center: c.clone(), edge: 1.0 }.to_box(), quad).value
    });
    let mut minima = vec![f64::INFINITY; scales.len()];
    let mut best = 0;
    for (j, ((slot, _), m)) in centers.iter().zip(&masses).enumerate() {
        minima[*slot] = minima[*slot].min(*m);
        if *m < masses[best] {
            best = j;
        }
    }
    let fit = classify_trend(&scales, &minima);
    Ok(InfimumReport {
        value: masses[best],
        argmin: Argmin::Cube(Cube {
            center: centers[best].1.clone(),
            edge: 1.0,
        }),
        trend: fit.trend,
        slope: fit.slope,
        scales,
        minima,
    })
}

/// Minimum of `w(Q × [z, z+1])` over `z = 1..=z_max`.
pub fn strip_infimum(spec: &WeightSpec, base: &Cube, z_max: u32, quad: &QuadratureConfig) -> Result<InfimumReport> {
    if base.dim() + 1 != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d - 1,
            got: base.dim(),
        });
    }
    if z_max < 4 {
        return invalid("strip search needs z_max >= 4");
    }
    let zs: Vec<f64> = (1..=z_max).map(f64::from).collect();
    let minima = par::map_slice(&zs, |z| box_mass(spec, &base.extrude(*z, z + 1.0), quad).value);
    let best = (0..minima.len())
        .min_by(|a, b| minima[*a].total_cmp(&minima[*b]))
        .unwrap();
    let fit = classify_trend(&zs, &minima);
    Ok(InfimumReport {
        value: minima[best],
        argmin: Argmin::Box(base.extrude(zs[best], zs[best] + 1.0)),
        trend: fit.trend,
        slope: fit.slope,
        scales: zs,
        minima,
    })
}

/// Grid spacing for window searches.
pub const WINDOW_STEP: f64 = 0.125;

fn window_integral(v: &PiecewiseProfile, r: f64) -> f64 {
    let mut cuts: Vec<f64> = std::iter::once(r)
        .chain(v.breakpoints_in(r, r + 1.0))
        .chain(std::iter::once(r + 1.0))
        .collect();
    cuts.dedup();
    cuts.windows(2)
        .map(|w| quadrature::adaptive(w[0], w[1], 1e-12, |s| v.eval(s)))
        .sum()
}

/// Minimum of `∫_r^{r+1} v(s) ds` over `r ∈ [0, r_max]`.
///
/// The grid minimum is refined by golden-section search; the trend is fitted
/// to minima over the dyadic blocks `[2^{k-1}, 2^k)`.
pub fn radial_window_infimum(spec: &WeightSpec, r_max: f64) -> Result<InfimumReport> {
    let v = spec
        .radial_profile()
        .ok_or_else(|| Error::InvalidParameter("window infimum needs a radial weight".into()))?;
    if let Some(crate::profile::Piece::Power { exponent, .. }) = v.segments.first().map(|s| &s.piece) {
        if *exponent <= -1.0 {
            return invalid("profile is not integrable on windows touching 0");
        }
    }
    if !(r_max >= 4.0) {
        return invalid("window search needs r_max >= 4");
    }
    let n = (r_max / WINDOW_STEP).floor() as usize;
    let rs: Vec<f64> = (0..=n).map(|k| k as f64 * WINDOW_STEP).collect();
    let vals = par::map_slice(&rs, |r| window_integral(&v, *r));
    let blocks = r_max.log2().floor() as i32;
    let mut scales = Vec::new();
    let mut minima = Vec::new();
    for k in 0..=blocks {
        let (lo, hi) = if k == 0 { (0.0, 1.0) } else { ((k as f64 - 1.0).exp2(), (k as f64).exp2()) };
        let m = rs
            .iter()
            .zip(&vals)
            .filter(|(r, _)| **r >= lo && **r < hi)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            scales.push(hi);
            minima.push(m);
        }
    }
    let best = (0..vals.len()).min_by(|a, b| vals[*a].total_cmp(&vals[*b])).unwrap();
    let lo = (rs[best] - WINDOW_STEP).max(0.0);
    let hi = (rs[best] + WINDOW_STEP).min(r_max);
    let (r_star, refined) = golden_min(lo, hi, |r| window_integral(&v, r));
    let (value, at) = if refined < vals[best] { (refined, r_star) } else { (vals[best], rs[best]) };
    let fit = classify_trend(&scales, &minima);
    Ok(InfimumReport {
        value,
        argmin: Argmin::Window { r: at },
        trend: fit.trend,
        slope: fit.slope,
        scales,
        minima,
    })
}

fn golden_min<F: Fn(f64) -> f64>(mut a: f64, mut b: f64, f: F) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if b - a < 1e-12 {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
