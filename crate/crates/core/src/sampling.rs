//! Seeded stratified Monte Carlo over shells, balls and boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{pow_diff, sphere_area, AxisBox};
use crate::par;

/// Sampling budget and seed shared by every estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub seed: u64,
    /// Samples drawn per region in the first refinement round.
    pub samples_per_region: usize,
    /// Number of strata per region (radial shells or box cells).
    pub radial_strata: usize,
    /// Refinement stops once `std_error <= target * value`.
    pub relative_error_target: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed_1e55,
            samples_per_region: 4096,
            radial_strata: 16,
            relative_error_target: 1e-2,
        }
    }
}

impl QuadratureConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples_per_region = samples;
        self
    }

    pub fn with_strata(mut self, strata: usize) -> Self {
        self.radial_strata = strata;
        self
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.relative_error_target = target;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_region == 0 || self.radial_strata == 0 {
            return invalid("samples_per_region and radial_strata must be positive");
        }
        if !(self.relative_error_target > 0.0) {
            return invalid("relative_error_target must be positive");
        }
        Ok(())
    }

    pub(crate) fn samples_per_stratum(&self, strata: usize) -> usize {
        (self.samples_per_region / strata.max(1)).max(4)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    StratifiedMc,
}

/// A numerical integral with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub method: Method,
    /// False when the sample budget ran out before the relative error target.
    pub target_met: bool,
    /// Samples that landed on a singular set and were redrawn.
    pub defects: u64,
}

impl MassEstimate {
    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_samples: 0,
            method: Method::ClosedForm,
            target_met: true,
            defects: 0,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        self.method == Method::ClosedForm
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.std_error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.std_error / self.value.abs()
        }
    }

    /// Whether `other` lies within `k` combined standard errors.
    pub fn agrees_with(&self, other: f64, k: f64) -> bool {
        (self.value - other).abs() <= k * self.std_error
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            std_error: self.std_error * factor.abs(),
            ..self.clone()
        }
    }

    /// Sum of independent estimates.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a MassEstimate>) -> Self {
        let mut value = 0.0;
        let mut var = 0.0;
        let mut n = 0;
        let mut defects = 0;
        let mut closed = true;
        let mut met = true;
        for m in items {
            value += m.value;
            var += m.std_error * m.std_error;
            n += m.n_samples;
            defects += m.defects;
            closed &= m.is_closed_form();
            met &= m.target_met;
        }
        Self {
            value,
            std_error: var.sqrt(),
            n_samples: n,
            method: if closed {
                Method::ClosedForm
            } else {
                Method::StratifiedMc
            },
            target_met: met,
            defects,
        }
    }
}

/// Mean of sampled values, used for the average-type limit diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMean {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a key path.
pub fn stream_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

pub fn rng_for(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(base, parts))
}

pub(crate) fn bits_key(xs: &[f64]) -> u64 {
    xs.iter()
        .fold(0x1234_5678_u64, |acc, v| splitmix64(acc ^ v.to_bits()))
}

/// Uniform direction on 𝕊^{d-1} from a normalized Gaussian vector.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
            n2 += *v * *v;
        }
        if n2 > 0.0 {
            let inv = n2.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// One stratum of a stratified sampling plan.
#[derive(Clone, Debug)]
pub(crate) enum Stratum {
    /// `{a <= |x - center| < b}` with `a > 0`.
    Shell { center: Vec<f64>, a: f64, b: f64 },
    /// `B(center, r)`.
    Core { center: Vec<f64>, r: f64 },
    Cell { lo: Vec<f64>, hi: Vec<f64> },
}

impl Stratum {
    pub(crate) fn volume(&self) -> f64 {
        match self {
            Stratum::Shell { center, a, b } => {
                let d = center.len();
                sphere_area(d) / d as f64 * pow_diff(*a, *b, d as f64)
            }
            Stratum::Core { center, r } => {
                let d = center.len();
                sphere_area(d) / d as f64 * r.powi(d as i32)
            }
            Stratum::Cell { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
        }
    }

    /// Draws a point uniformly (w.r.t. Lebesgue measure) from the stratum.
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Stratum::Shell { center, a, b } => {
                let d = center.len() as f64;
                unit_vector(rng, out);
                let u: f64 = rng.random();
                let growth = (d * (b / a).ln()).exp_m1();
                let r = a * (1.0 + u * growth).powf(1.0 / d);
                let r = r.clamp(*a, *b);
                for (o, c) in out.iter_mut().zip(center) {
                    *o = c + r * *o;
                }
            }
            Stratum::Core { center, r } => {
                let d = center.len() as f64;
                unit_vector(rng, out);
                let u: f64 = rng.random();
                let rho = r * u.powf(1.0 / d);
                for (o, c) in out.iter_mut().zip(center) {
                    *o = c + rho * *o;
                }
            }
            Stratum::Cell { lo, hi } => {
                for (o, (l, h)) in out.iter_mut().zip(lo.iter().zip(hi)) {
                    let u: f64 = rng.random();
                    *o = l + u * (h - l);
                }
            }
        }
    }
}

/// Log-uniform radial strata covering `{r_in <= |x - center| < r_out}`.
pub(crate) fn shell_strata(center: &[f64], r_in: f64, r_out: f64, count: usize) -> Vec<Stratum> {
    debug_assert!(r_in > 0.0 && r_out > r_in);
    let ratio = (r_out / r_in).ln();
    (0..count)
        .map(|k| {
            let a = if k == 0 {
                r_in
            } else {
                r_in * (ratio * k as f64 / count as f64).exp()
            };
            let b = if k + 1 == count {
                r_out
            } else {
                r_in * (ratio * (k + 1) as f64 / count as f64).exp()
            };
            Stratum::Shell {
                center: center.to_vec(),
                a,
                b,
            }
        })
        .collect()
}

/// `B(center, r)` as a core ball of radius `r 2^{-depth}` plus dyadic shells.
pub(crate) fn ball_strata(center: &[f64], r: f64, depth: u32) -> Vec<Stratum> {
    let mut out = Vec::with_capacity(depth as usize + 1);
    let core = r * 2f64.powi(-(depth as i32));
    out.push(Stratum::Core {
        center: center.to_vec(),
        r: core,
    });
    for k in (0..depth).rev() {
        out.push(Stratum::Shell {
            center: center.to_vec(),
            a: r * 2f64.powi(-(k as i32) - 1),
            b: r * 2f64.powi(-(k as i32)),
        });
    }
    out
}

/// Splits a box into at least `min_cells` cells by halving its longest cell axis.
pub(crate) fn box_strata(b: &AxisBox, min_cells: usize) -> Vec<Stratum> {
    let d = b.dim();
    let mut splits = vec![1usize; d];
    while splits.iter().product::<usize>() < min_cells {
        let k = (0..d)
            .max_by(|&i, &j| {
                let wi = (b.hi[i] - b.lo[i]) / splits[i] as f64;
                let wj = (b.hi[j] - b.lo[j]) / splits[j] as f64;
                wi.total_cmp(&wj).then(j.cmp(&i))
            })
            .unwrap();
        splits[k] *= 2;
    }
    let total: usize = splits.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut lo = Vec::with_capacity(d);
            let mut hi = Vec::with_capacity(d);
            for k in 0..d {
                let j = idx % splits[k];
                idx /= splits[k];
                let w = (b.hi[k] - b.lo[k]) / splits[k] as f64;
                lo.push(b.lo[k] + w * j as f64);
                hi.push(if j + 1 == splits[k] {
                    b.hi[k]
                } else {
                    b.lo[k] + w * (j + 1) as f64
                });
            }
            Stratum::Cell { lo, hi }
        })
        .collect()
}

const MAX_ROUNDS: u32 = 5;
const MAX_REDRAWS: u32 = 64;

struct Accumulator<const N: usize> {
    rng: ChaCha8Rng,
    n: u64,
    mean: [f64; N],
    m2: [f64; N],
    defects: u64,
}

/// Integrates a vector-valued integrand over the union of `strata`.
///
/// Component 0 drives refinement. The integrand returns `None` on its singular
/// set; such samples are redrawn and counted as defects.
pub(crate) fn integrate<const N: usize, F>(
    strata: &[Stratum],
    key: &[u64],
    quad: &QuadratureConfig,
    f: F,
) -> [MassEstimate; N]
where
    F: Fn(&[f64]) -> Option<[f64; N]> + Sync,
{
    let d = match &strata[0] {
        Stratum::Shell { center, .. } | Stratum::Core { center, .. } => center.len(),
        Stratum::Cell { lo, .. } => lo.len(),
    };
    let volumes: Vec<f64> = strata.iter().map(Stratum::volume).collect();
    let mut accs: Vec<(usize, Accumulator<N>)> = strata
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let mut path = key.to_vec();
            path.push(k as u64);
            (
                k,
                Accumulator {
                    rng: rng_for(quad.seed, &path),
                    n: 0,
                    mean: [0.0; N],
                    m2: [0.0; N],
                    defects: 0,
                },
            )
        })
        .collect();

    let base = quad.samples_per_stratum(strata.len()) as u64;
    let mut round = 0;
    loop {
        let batch = if round == 0 { base } else { base << (round - 1) };
        par::for_each_mut(&mut accs, |(k, acc)| {
            let stratum = &strata[*k];
            let mut x = vec![0.0; d];
            for _ in 0..batch {
                let mut redraws = 0;
                let values = loop {
                    stratum.sample(&mut acc.rng, &mut x);
                    match f(&x) {
                        Some(v) if v.iter().all(|c| c.is_finite()) => break v,
                        _ => {
                            acc.defects += 1;
                            redraws += 1;
                            if redraws >= MAX_REDRAWS {
                                break [0.0; N];
                            }
                        }
                    }
                };
                acc.n += 1;
                let n = acc.n as f64;
                for c in 0..N {
                    let delta = values[c] - acc.mean[c];
                    acc.mean[c] += delta / n;
                    acc.m2[c] += delta * (values[c] - acc.mean[c]);
                }
            }
        });
        round += 1;

        let estimates = assemble(&accs, &volumes);
        let lead = &estimates[0];
        let met = lead.std_error <= quad.relative_error_target * lead.value.abs()
            || (lead.value == 0.0 && lead.std_error == 0.0);
        if met || round >= MAX_ROUNDS {
            return estimates.map(|mut e| {
                e.target_met = met;
                e
            });
        }
    }
}

fn assemble<const N: usize>(accs: &[(usize, Accumulator<N>)], volumes: &[f64]) -> [MassEstimate; N] {
    std::array::from_fn(|c| {
        let mut value = 0.0;
        let mut var = 0.0;
        let mut n = 0;
        let mut defects = 0;
        for (k, acc) in accs {
            let v = volumes[*k];
            value += v * acc.mean[c];
            if acc.n > 1 {
                let s2 = acc.m2[c] / (acc.n - 1) as f64;
                var += v * v * s2 / acc.n as f64;
            }
            n += acc.n;
            defects += acc.defects;
        }
        MassEstimate {
            value,
            std_error: var.sqrt(),
            n_samples: n,
            method: Method::StratifiedMc,
            target_met: true,
            defects,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_volume, norm};
    use approx::assert_relative_eq;

    #[test]
    fn stream_seeds_differ_by_path() {
        assert_ne!(stream_seed(1, &[0, 1]), stream_seed(1, &[1, 0]));
        assert_eq!(stream_seed(7, &[3]), stream_seed(7, &[3]));
    }

    #[test]
    fn unit_vectors_are_normalized() {
        let mut rng = rng_for(3, &[]);
        let mut v = [0.0; 5];
        for _ in 0..100 {
            unit_vector(&mut rng, &mut v);
            assert_relative_eq!(norm(&v), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn shell_strata_tile_the_shell() {
        let s = shell_strata(&[0.0, 0.0, 0.0], 2.0, 4.0, 7);
        let total: f64 = s.iter().map(Stratum::volume).sum();
        assert_relative_eq!(total, ball_volume(3, 4.0) - ball_volume(3, 2.0), max_relative = 1e-13);
    }

    #[test]
    fn ball_strata_tile_the_ball() {
        let s = ball_strata(&[1.0, -1.0], 3.0, 12);
        let total: f64 = s.iter().map(Stratum::volume).sum();
        assert_relative_eq!(total, ball_volume(2, 3.0), max_relative = 1e-13);
    }

    #[test]
    fn shell_samples_stay_in_shell() {
        let s = shell_strata(&[1.0, 2.0], 0.5, 8.0, 4);
        let mut rng = rng_for(11, &[]);
        let mut x = [0.0; 2];
        for st in &s {
            let Stratum::Shell { a, b, .. } = st else { unreachable!() };
            for _ in 0..200 {
                st.sample(&mut rng, &mut x);
                let r = crate::geometry::distance(&x, &[1.0, 2.0]);
                assert!(r >= a * (1.0 - 1e-12) && r <= b * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn box_strata_cover_requested_cells() {
        let b = AxisBox::new(vec![0.0, 0.0], vec![1.0, 5.0]).unwrap();
        let cells = box_strata(&b, 10);
        assert!(cells.len() >= 10);
        let total: f64 = cells.iter().map(Stratum::volume).sum();
        assert_relative_eq!(total, 5.0, max_relative = 1e-14);
    }

    #[test]
    fn integrating_one_gives_volume_with_zero_error() {
        let quad = QuadratureConfig::default();
        let s = shell_strata(&[0.0; 3], 1.0, 2.0, 8);
        let [m] = integrate(&s, &[1], &quad, |_| Some([1.0]));
        assert_relative_eq!(m.value, ball_volume(3, 2.0) - ball_volume(3, 1.0), max_relative = 1e-13);
        assert_eq!(m.std_error, 0.0);
        assert!(m.target_met);
    }

    #[test]
    fn singular_samples_are_redrawn_and_counted() {
        let quad = QuadratureConfig::default().with_samples(256);
        let b = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let s = box_strata(&b, 2);
        let [m] = integrate(&s, &[2], &quad, |x| if x[0] < 0.01 { None } else { Some([1.0]) });
        assert!(m.defects > 0);
        assert_relative_eq!(m.value, 1.0, max_relative = 1e-12);
    }
}
