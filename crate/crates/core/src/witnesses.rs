//! Explicit test functions with closed-form gradients and their weighted energies.

use petgraph::graph::{NodeIndex, UnGraph};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm, sphere_area, Cube, DyadicAnnulus, Region};
use crate::par;
use crate::quadrature;
use crate::rp::{rp_terms, Verdict};
use crate::sampling::{
    ball_strata, bits_key, box_strata, integrate, rng_for, shell_strata, MassEstimate, QuadratureConfig, Stratum,
};
use crate::weights::{annulus_mass, positive, WeightSpec};

const TAG_CUBE_ENERGY: u64 = 0xe1;
const TAG_BALL_ENERGY: u64 = 0xe2;
const TAG_SHELL_ENERGY: u64 = 0xe3;
const TAG_GAUSS: u64 = 0x6a55;

/// `ψ(s) = min(1, max(0, 1 - 2|s|))`
pub fn hat(s: f64) -> f64 {
    (1.0 - 2.0 * s.abs()).clamp(0.0, 1.0)
}

fn hat_slope(s: f64) -> f64 {
    if s.abs() < 0.5 {
        -2.0 * s.signum()
    } else {
        0.0
    }
}

/// `ψ_Q` and `|∇ψ_Q|` at `x`.
fn bump_and_gradient(q: &Cube, x: &[f64]) -> (f64, f64) {
    let l = q.edge;
    let s: Vec<f64> = x.iter().zip(&q.center).map(|(y, c)| (y - c) / l).collect();
    let vals: Vec<f64> = s.iter().map(|v| hat(*v)).collect();
    let u: f64 = vals.iter().product();
    if u == 0.0 && vals.iter().filter(|v| **v == 0.0).count() > 1 {
        return (0.0, 0.0);
    }
    let mut g2 = 0.0;
    for i in 0..s.len() {
        let slope = hat_slope(s[i]);
        if slope == 0.0 {
            continue;
        }
        let others: f64 = vals
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v)
            .product();
        g2 += (slope / l * others).powi(2);
    }
    (u, g2.sqrt())
}

/// Disjoint hat bumps `Σ a_i ψ_{Q_i}`, sorted by the last coordinate of the centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpChain {
    pub cubes: Vec<Cube>,
    pub amplitudes: Vec<f64>,
    /// Half of the largest edge, for range lookups.
    reach: f64,
}

impl BumpChain {
    pub fn new(cubes: Vec<Cube>, amplitudes: Vec<f64>) -> Result<Self> {
        if cubes.len() != amplitudes.len() {
            return invalid("one amplitude per cube required");
        }
        if amplitudes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return invalid("bump amplitudes must be positive");
        }
        if let Some(d) = cubes.first().map(Cube::dim) {
            if cubes.iter().any(|q| q.dim() != d) {
                return invalid("all cubes must have the same dimension");
            }
        }
        let mut pairs: Vec<(Cube, f64)> = cubes.into_iter().zip(amplitudes).collect();
        pairs.sort_by(|a, b| a.0.center.last().unwrap().total_cmp(b.0.center.last().unwrap()));
        let reach = pairs.iter().map(|(q, _)| 0.5 * q.edge).fold(0.0, f64::max);
        let (cubes, amplitudes): (Vec<Cube>, Vec<f64>) = pairs.into_iter().unzip();
        let chain = Self {
            cubes,
            amplitudes,
            reach,
        };
        chain.check_disjoint()?;
        Ok(chain)
    }

    fn check_disjoint(&self) -> Result<()> {
        let n = self.cubes.len();
        for i in 0..n {
            let top = self.cubes[i].center.last().unwrap() + 2.0 * self.reach;
            for j in i + 1..n {
                if *self.cubes[j].center.last().unwrap() > top {
                    break;
                }
                if !self.cubes[i].interiors_disjoint(&self.cubes[j]) {
                    return invalid(format!("cubes {i} and {j} of the chain overlap"));
                }
            }
        }
        Ok(())
    }

    fn candidates(&self, x: &[f64]) -> impl Iterator<Item = usize> + '_ {
        let y = *x.last().unwrap();
        let lo = self
            .cubes
            .partition_point(|q| *q.center.last().unwrap() < y - self.reach);
        let hi = self
            .cubes
            .partition_point(|q| *q.center.last().unwrap() <= y + self.reach);
        lo..hi
    }

    fn eval(&self, x: &[f64]) -> (f64, f64) {
        let mut u = 0.0;
        let mut g = 0.0;
        for i in self.candidates(x) {
            let (b, gb) = bump_and_gradient(&self.cubes[i], x);
            u += self.amplitudes[i] * b;
            g += self.amplitudes[i] * gb;
        }
        (u, g)
    }
}

/// Annulus-constant density and its radial primitive, built when ℛ_p(w) diverges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub p: f64,
    pub d: usize,
    /// First annulus index scanned.
    pub i_min: i32,
    pub blocks: Vec<Block>,
    /// `w(A_i)` for `i = i_min..=i_top`.
    pub masses: Vec<f64>,
    /// Density on `A_i` for `i = i_min..=i_top`; zero outside the blocks.
    pub density: Vec<f64>,
    /// `u(2^i)` for `i = i_min..=i_top + 1`.
    pub cumulative: Vec<f64>,
    /// `u(2^m) / 2^m` with `2^m` the outer radius of the last completed block.
    pub kappa: f64,
    /// `m` above.
    pub top_index: i32,
}

/// One greedy block `[start, end]` of consecutive annuli.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub k: u32,
    pub start: i32,
    pub end: i32,
    /// Sum of the ℛ_p terms over the block (`p > 1`), or the single term (`p = 1`).
    pub sum: f64,
    /// `2^k`, which `sum` exceeds.
    pub threshold: f64,
}

impl DivergenceWitness {
    fn slot(&self, i: i32) -> Option<usize> {
        let k = i - self.i_min;
        (k >= 0 && (k as usize) < self.density.len()).then_some(k as usize)
    }

    /// `g` at radius `r`.
    pub fn density_at(&self, r: f64) -> f64 {
        if !(r >= 1.0) {
            return if r > 0.0 && self.i_min < 0 { self.density_at_index(r) } else { 0.0 };
        }
        self.density_at_index(r)
    }

    fn density_at_index(&self, r: f64) -> f64 {
        let i = r.log2().floor() as i32;
        self.slot(i).map_or(0.0, |k| self.density[k])
    }

    /// `u` at radius `r`: the integral of `g` along the radius.
    pub fn u_at(&self, r: f64) -> f64 {
        let inner = (self.i_min as f64).exp2();
        if r <= inner {
            return 0.0;
        }
        let i = r.log2().floor() as i32;
        match self.slot(i) {
            Some(k) => self.cumulative[k] + self.density[k] * (r - (i as f64).exp2()),
            None => *self.cumulative.last().unwrap(),
        }
    }

    /// `∫ g^p w` over the blocks computed from the stored masses.
    pub fn block_energy(&self) -> f64 {
        self.density
            .iter()
            .zip(&self.masses)
            .map(|(c, m)| c.powf(self.p) * m)
            .sum()
    }

    /// `Σ_k 2^{-k(p-1)}` over the completed blocks (`Σ 2^{-k}` for `p = 1`).
    pub fn energy_bound(&self) -> f64 {
        let e = if self.p == 1.0 { 1.0 } else { self.p - 1.0 };
        self.blocks.iter().map(|b| (-(b.k as f64) * e).exp2()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum FunctionKind {
    Constant { c: f64 },
    /// `log log(2 + |x|^2)`
    LogLog,
    /// `1 / |x|`
    InverseNorm,
    HatBump { cube: Cube },
    BumpChain(BumpChain),
    RadialWitness(DivergenceWitness),
}

/// A scalar field `u` with an upper gradient `g >= |∇u|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub d: usize,
    #[serde(flatten)]
    pub kind: FunctionKind,
}

impl TestFunction {
    pub fn constant(d: usize, c: f64) -> Self {
        Self {
            d,
            kind: FunctionKind::Constant { c },
        }
    }

    pub fn inverse_norm(d: usize) -> Self {
        Self {
            d,
            kind: FunctionKind::InverseNorm,
        }
    }

    /// `u` and `g` at `x`, or `None` on the singular set.
    pub fn eval_both(&self, x: &[f64]) -> Option<(f64, f64)> {
        match &self.kind {
            FunctionKind::Constant { c } => Some((*c, 0.0)),
            FunctionKind::LogLog => {
                let r2 = x.iter().map(|v| v * v).sum::<f64>();
                let l = (2.0 + r2).ln();
                Some((l.ln(), 2.0 * r2.sqrt() / ((2.0 + r2) * l)))
            }
            FunctionKind::InverseNorm => {
                let r = norm(x);
                (r > 0.0).then(|| (1.0 / r, 1.0 / (r * r)))
            }
            FunctionKind::HatBump { cube } => Some(bump_and_gradient(cube, x)),
            FunctionKind::BumpChain(chain) => Some(chain.eval(x)),
            FunctionKind::RadialWitness(w) => {
                let r = norm(x);
                Some((w.u_at(r), w.density_at(r)))
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        self.eval_both(x).map(|v| v.0)
    }

    pub fn grad_norm(&self, x: &[f64]) -> Option<f64> {
        self.eval_both(x).map(|v| v.1)
    }

    pub fn eval_checked(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        self.eval(x).ok_or_else(|| Error::SingularPoint(x.to_vec()))
    }

    /// Radial profile `r ↦ (u, g)` for functions of `|x|` alone.
    fn radial(&self, r: f64) -> Option<(f64, f64)> {
        let mut x = vec![0.0; self.d];
        x[0] = r;
        match self.kind {
            FunctionKind::LogLog | FunctionKind::InverseNorm | FunctionKind::RadialWitness(_) => self.eval_both(&x),
            _ => None,
        }
    }

    pub fn as_chain(&self) -> Option<&BumpChain> {
        match &self.kind {
            FunctionKind::BumpChain(c) => Some(c),
            _ => None,
        }
    }
}

pub fn loglog_function(d: usize) -> TestFunction {
    TestFunction {
        d,
        kind: FunctionKind::LogLog,
    }
}

pub fn hat_bump(cube: Cube) -> Result<TestFunction> {
    let cube = Cube::new(cube.center, cube.edge)?;
    Ok(TestFunction {
        d: cube.dim(),
        kind: FunctionKind::HatBump { cube },
    })
}

pub fn bump_chain(d: usize, cubes: Vec<Cube>, amplitudes: Vec<f64>) -> Result<TestFunction> {
    if cubes.iter().any(|q| q.dim() != d) {
        return invalid(format!("chain cubes must live in ℝ^{d}"));
    }
    Ok(TestFunction {
        d,
        kind: FunctionKind::BumpChain(BumpChain::new(cubes, amplitudes)?),
    })
}

/// The chain `Σ_{i=2}^{k} ψ_{Q(2^i e_d, 2)}` of unit-height bumps along the last axis.
pub fn axis_chain(d: usize, k: i32) -> Result<TestFunction> {
    let cubes = (2..=k)
        .map(|i| {
            let mut c = vec![0.0; d];
            c[d - 1] = (i as f64).exp2();
            Cube::new(c, 2.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = cubes.len();
    bump_chain(d, cubes, vec![1.0; n])
}

fn validate_energy_args(f: &TestFunction, spec: &WeightSpec, p: f64) -> Result<()> {
    if f.d != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got: f.d,
        });
    }
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("p must be at least 1, got {p}"));
    }
    Ok(())
}

/// Energy `∫_Q |∇ψ_Q|^p w` of one unit-amplitude bump.
pub fn cube_energy(cube: &Cube, spec: &WeightSpec, p: f64, quad: &QuadratureConfig) -> MassEstimate {
    if let (Some(c), true) = (spec.as_constant(), p == 2.0) {
        let d = cube.dim() as f64;
        let l = cube.edge;
        return MassEstimate::closed_form(c * d * (4.0 / l) * (l / 3.0).powf(d - 1.0));
    }
    let strata = box_strata(&cube.to_box(), quad.radial_strata.max(1 << cube.dim()));
    let key = [TAG_CUBE_ENERGY, bits_key(&cube.center), cube.edge.to_bits()];
    let [m] = integrate(&strata, &key, quad, |x| {
        let w = positive(spec.value(x))?;
        let (_, g) = bump_and_gradient(cube, x);
        Some([g.powf(p) * w])
    });
    m
}

/// Per-cube energies `a_i^p ∫ |∇ψ_{Q_i}|^p w` of a chain, in chain order.
pub fn chain_energies(chain: &BumpChain, spec: &WeightSpec, p: f64, quad: &QuadratureConfig) -> Vec<MassEstimate> {
    let idx: Vec<usize> = (0..chain.cubes.len()).collect();
    par::map_slice(&idx, |&i| {
        cube_energy(&chain.cubes[i], spec, p, quad).scaled(chain.amplitudes[i].powf(p))
    })
}

/// `∫_{B(0,R)} g^p w`.
///
/// Bump chains are summed cube by cube; radial functions with radial weights
/// reduce to one-dimensional integrals.
pub fn energy(f: &TestFunction, spec: &WeightSpec, p: f64, quad: &QuadratureConfig, radius: f64) -> Result<MassEstimate> {
    energy_between(f, spec, p, quad, 0.0, radius)
}

/// `∫_{B(0,R)∖B(0,r)} g^p w`.
pub fn energy_between(
    f: &TestFunction,
    spec: &WeightSpec,
    p: f64,
    quad: &QuadratureConfig,
    r_in: f64,
    radius: f64,
) -> Result<MassEstimate> {
    validate_energy_args(f, spec, p)?;
    quad.validate()?;
    if !(radius > 0.0 && r_in >= 0.0 && r_in < radius) {
        return invalid("need 0 <= inner radius < outer radius");
    }
    let est = match &f.kind {
        FunctionKind::Constant { .. } => MassEstimate::closed_form(0.0),
        FunctionKind::HatBump { cube } => {
            let chain = BumpChain::new(vec![cube.clone()], vec![1.0])?;
            chain_energy_within(&chain, spec, p, quad, r_in, radius)
        }
        FunctionKind::BumpChain(chain) => chain_energy_within(chain, spec, p, quad, r_in, radius),
        FunctionKind::RadialWitness(w) => witness_energy(w, spec, quad, r_in, radius),
        FunctionKind::LogLog | FunctionKind::InverseNorm => match spec.radial_profile() {
            Some(v) => {
                let d = f.d;
                let integrand = |r: f64| {
                    let (_, g) = f.radial(r).unwrap_or((0.0, f64::INFINITY));
                    g.powf(p) * v.eval(r) * r.powi(d as i32 - 1)
                };
                let mut total = 0.0;
                if r_in < 1.0 {
                    total += quadrature::adaptive(r_in, radius.min(1.0), 1e-12, integrand);
                }
                if radius > 1.0 {
                    total += quadrature::adaptive_log(r_in.max(1.0), radius, 1e-12, integrand);
                }
                MassEstimate::closed_form(sphere_area(d) * total)
            }
            None => {
                let depth = quad.radial_strata as u32 + radius.log2().max(0.0).ceil() as u32;
                let origin = vec![0.0; f.d];
                let strata = if r_in > 0.0 {
                    shell_strata(&origin, r_in, radius, depth.min(60) as usize)
                } else {
                    ball_strata(&origin, radius, depth.min(60))
                };
                let [m] = integrate(&strata, &[TAG_BALL_ENERGY, r_in.to_bits(), radius.to_bits()], quad, |x| {
                    let w = positive(spec.value(x))?;
                    let g = f.grad_norm(x)?;
                    Some([g.powf(p) * w])
                });
                m
            }
        },
    };
    Ok(est)
}

fn chain_energy_within(
    chain: &BumpChain,
    spec: &WeightSpec,
    p: f64,
    quad: &QuadratureConfig,
    r_in: f64,
    radius: f64,
) -> MassEstimate {
    let idx: Vec<usize> = (0..chain.cubes.len()).collect();
    let parts = par::map_slice(&idx, |&i| {
        let q = &chain.cubes[i];
        let a = chain.amplitudes[i].powf(p);
        let h = 0.5 * q.edge;
        let far: f64 = q.center.iter().map(|c| (c.abs() + h).powi(2)).sum::<f64>().sqrt();
        let near: f64 = q.center.iter().map(|c| (c.abs() - h).max(0.0).powi(2)).sum::<f64>().sqrt();
        if near >= radius || far <= r_in {
            None
        } else if far <= radius && near >= r_in {
            Some(cube_energy(q, spec, p, quad).scaled(a))
        } else {
            let strata = box_strata(&q.to_box(), quad.radial_strata.max(1 << q.dim()));
            let key = [
                TAG_CUBE_ENERGY,
                bits_key(&q.center),
                q.edge.to_bits(),
                bits_key(&[r_in, radius]),
            ];
            let [m] = integrate(&strata, &key, quad, |x| {
                let r = norm(x);
                if r >= radius || r < r_in {
                    return Some([0.0]);
                }
                let w = positive(spec.value(x))?;
                Some([bump_and_gradient(q, x).1.powf(p) * w])
            });
            Some(m.scaled(a))
        }
    });
    MassEstimate::sum(parts.iter().flatten())
}

/// Monte Carlo energy of a divergence witness over its annuli inside `B(0, R)`.
fn witness_energy(w: &DivergenceWitness, spec: &WeightSpec, quad: &QuadratureConfig, r_in: f64, radius: f64) -> MassEstimate {
    let d = spec.d;
    let center = vec![0.0; d];
    let active: Vec<(i32, f64)> = w
        .density
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0.0)
        .map(|(k, c)| (w.i_min + k as i32, *c))
        .filter(|(i, _)| (*i as f64).exp2() < radius && (*i as f64 + 1.0).exp2() > r_in)
        .collect();
    let parts = par::map_slice(&active, |&(i, c)| {
        let a = (i as f64).exp2().max(r_in);
        let b = (2.0 * (i as f64).exp2()).min(radius);
        let strata: Vec<Stratum> = shell_strata(&center, a, b, quad.radial_strata);
        let [m] = integrate(&strata, &[TAG_SHELL_ENERGY, i as i64 as u64, bits_key(&[a, b])], quad, |x| {
            positive(spec.value(x)).map(|v| [v])
        });
        m.scaled(c.powf(w.p))
    });
    MassEstimate::sum(parts.iter())
}

/// Energies inside each of the nested radii.
pub fn energy_profile(
    f: &TestFunction,
    spec: &WeightSpec,
    p: f64,
    radii: &[f64],
    quad: &QuadratureConfig,
) -> Result<Vec<MassEstimate>> {
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("radii must be strictly increasing");
    }
    radii.iter().map(|r| energy(f, spec, p, quad, *r)).collect()
}

/// Builds the radial witness `u` with `u(x) → ∞` and finite energy when ℛ_p(w) = ∞.
///
/// Blocks `[a_k, a_{k+1} - 1]` close at the first index where the block sum of
/// ℛ_p terms exceeds `2^k`; consecutive blocks do not share annuli.
pub fn divergence_witness(spec: &WeightSpec, p: f64, i_max: i32, quad: &QuadratureConfig) -> Result<DivergenceWitness> {
    if spec.radial_profile().is_none() {
        return Err(Error::Precondition("divergence witness needs a radial weight".into()));
    }
    let i_min = 1;
    let report = rp_terms(spec, p, (i_min, i_max), quad)?;
    if report.verdict != Verdict::Diverged {
        return Err(Error::Precondition(format!(
            "ℛ_p verdict is {:?}; the witness needs a divergent series",
            report.verdict
        )));
    }
    let masses: Vec<f64> = (i_min..=i_max)
        .map(|i| annulus_mass(spec, &DyadicAnnulus::at_origin(spec.d, i), quad).value)
        .collect();
    let terms = &report.terms;
    let mut blocks = Vec::new();
    let mut density = vec![0.0; masses.len()];
    let mut start = 0usize;
    let mut k = 1u32;
    let mut acc = 0.0;
    for j in 0..terms.len() {
        let threshold = (k as f64).exp2();
        if p == 1.0 {
            if terms[j] > threshold {
                let i = i_min + j as i32;
                density[j] = (-(i as f64)).exp2();
                blocks.push(Block {
                    k,
                    start: i,
                    end: i,
                    sum: terms[j],
                    threshold,
                });
                k += 1;
            }
            continue;
        }
        acc += terms[j];
        if acc > threshold {
            for (m, slot) in density.iter_mut().enumerate().take(j + 1).skip(start) {
                let i = i_min + m as i32;
                let scale = (i as f64).exp2();
                *slot = scale.powf(1.0 / (p - 1.0)) * masses[m].powf(1.0 / (1.0 - p)) / acc;
            }
            blocks.push(Block {
                k,
                start: i_min + start as i32,
                end: i_min + j as i32,
                sum: acc,
                threshold,
            });
            k += 1;
            start = j + 1;
            acc = 0.0;
        }
    }
    if blocks.len() < 3 {
        return Err(Error::InsufficientDivergence {
            blocks: blocks.len(),
            i_max,
        });
    }
    let top = blocks.last().unwrap().end;
    let n = (top - i_min + 1) as usize;
    density.truncate(n);
    let masses = masses[..n].to_vec();
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    for (m, c) in density.iter().enumerate() {
        let width = ((i_min + m as i32) as f64).exp2();
        let prev = cumulative[m];
        cumulative.push(prev + c * width);
    }
    let top_index = top + 1;
    let kappa = cumulative[n] / (top_index as f64).exp2();
    Ok(DivergenceWitness {
        p,
        d: spec.d,
        i_min,
        blocks,
        masses,
        density,
        cumulative,
        kappa,
        top_index,
    })
}

impl DivergenceWitness {
    pub fn function(&self) -> TestFunction {
        TestFunction {
            d: self.d,
            kind: FunctionKind::RadialWitness(self.clone()),
        }
    }
}

/// Integral of the radial density along the segment from `a` to `b`.
pub fn segment_integral(w: &DivergenceWitness, a: &[f64], b: &[f64]) -> f64 {
    let dir: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len = norm(&dir);
    if len == 0.0 {
        return 0.0;
    }
    // |a + s·dir|^2 = A s^2 + B s + C
    let qa: f64 = dir.iter().map(|v| v * v).sum();
    let qb: f64 = 2.0 * a.iter().zip(&dir).map(|(x, v)| x * v).sum::<f64>();
    let qc: f64 = a.iter().map(|x| x * x).sum();
    let mut cuts = vec![0.0, 1.0];
    let hi = w.top_index;
    for i in w.i_min..=hi {
        let rr = (2.0 * i as f64).exp2();
        let disc = qb * qb - 4.0 * qa * (qc - rr);
        if disc <= 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        for s in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
            if s > 0.0 && s < 1.0 {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for c in cuts.windows(2) {
        let mid = 0.5 * (c[0] + c[1]);
        let r = (qa * mid * mid + qb * mid + qc).max(0.0).sqrt();
        total += w.density_at(r) * (c[1] - c[0]) * len;
    }
    total
}

/// Stencil offsets with coprime entries of absolute value at most 3 (32 directions).
fn stencil() -> Vec<(i64, i64)> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut out = Vec::new();
    for dx in -3i64..=3 {
        for dy in -3i64..=3 {
            if (dx, dy) != (0, 0) && gcd(dx, dy) == 1 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Shortest-path distances on a planar grid with segment costs `∫ g ds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeodesic {
    pub spacing: f64,
    pub extent: f64,
    /// `(point, grid distance, radial value u(|point|))`
    pub targets: Vec<(Vec<f64>, f64, f64)>,
    /// Largest `|grid / radial - 1|` over the targets.
    pub max_relative_gap: f64,
}

/// Grid Dijkstra from the origin over `[0, extent]^2`, compared with the radial
/// primitive at grid points near the circle of radius `target_radius`.
pub fn grid_geodesic(w: &DivergenceWitness, spacing: f64, extent: f64, target_radius: f64) -> Result<GridGeodesic> {
    if w.d != 2 {
        return invalid("the grid geodesic check runs in the plane");
    }
    if !(spacing > 0.0 && extent >= target_radius && target_radius > 0.0) {
        return invalid("grid needs spacing > 0 and extent >= target radius > 0");
    }
    let n = (extent / spacing).round() as i64;
    let side = (n + 1) as usize;
    let mut graph = UnGraph::<(), f64>::with_capacity(side * side, side * side * 16);
    for _ in 0..side * side {
        graph.add_node(());
    }
    let at = |i: i64, j: i64| NodeIndex::new((i as usize) * side + j as usize);
    let offsets: Vec<(i64, i64)> = stencil()
        .into_iter()
        .filter(|(dx, dy)| (*dx, *dy) > (0, 0))
        .collect();
    let edges: Vec<Vec<(i64, i64, f64)>> = par::map_indexed(side, |i| {
        let i = i as i64;
        let mut out = Vec::new();
        for j in 0..=n {
            for &(dx, dy) in &offsets {
                let (a, b) = (i + dx, j + dy);
                if a < 0 || b < 0 || a > n || b > n {
                    continue;
                }
                let p0 = [i as f64 * spacing, j as f64 * spacing];
                let p1 = [a as f64 * spacing, b as f64 * spacing];
                out.push((j, a * (n + 1) + b, segment_integral(w, &p0, &p1)));
            }
        }
        out
    });
    for (i, row) in edges.into_iter().enumerate() {
        for (j, other, cost) in row {
            graph.add_edge(at(i as i64, j), NodeIndex::new(other as usize), cost);
        }
    }
    let dist = petgraph::algo::dijkstra(&graph, at(0, 0), None, |e| *e.weight());
    let k = 16;
    let mut targets = Vec::with_capacity(k + 1);
    let mut worst: f64 = 0.0;
    for s in 0..=k {
        let theta = std::f64::consts::FRAC_PI_2 * s as f64 / k as f64;
        let i = (target_radius * theta.cos() / spacing).round() as i64;
        let j = (target_radius * theta.sin() / spacing).round() as i64;
        let point = vec![i as f64 * spacing, j as f64 * spacing];
        let grid = dist[&at(i, j)];
        let radial = w.u_at(norm(&point));
        worst = worst.max((grid / radial - 1.0).abs());
        targets.push((point, grid, radial));
    }
    Ok(GridGeodesic {
        spacing,
        extent,
        targets,
        max_relative_gap: worst,
    })
}

/// Cubes `Q((x̄_i, 4i), ℓ_i)`, `ℓ_i = 1/(2 i^{1/(d-1)})`, with Gaussian `x̄_i`, and
/// the depression weight around their centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFamily {
    pub cubes: Vec<Cube>,
    pub weight: WeightSpec,
    pub alpha: f64,
}

/// Edge `ℓ_n = 1 / (2 n^{1/(d-1)})`.
pub fn gaussian_edge(n: usize, d: usize) -> f64 {
    0.5 / (n as f64).powf(1.0 / (d as f64 - 1.0))
}

pub fn gaussian_cube_family(seed: u64, n: usize, d: usize, p: f64, q: f64, alpha: f64) -> Result<GaussianFamily> {
    let df = d as f64;
    if d < 2 || n == 0 {
        return invalid("gaussian family needs d >= 2 and n >= 1");
    }
    if !(p > 1.0 && p < df && q > 1.0 && q <= p && q > (p + df - 1.0) / df) {
        return invalid(format!(
            "need 1 < p < d, (p+d-1)/d < q <= p; got p = {p}, q = {q}, d = {d}"
        ));
    }
    if !(alpha > p - 1.0 && alpha < df * (q - 1.0)) {
        return invalid(format!(
            "alpha = {alpha} outside the admissible interval ({}, {})",
            p - 1.0,
            df * (q - 1.0)
        ));
    }
    let mut rng = rng_for(seed, &[TAG_GAUSS]);
    let mut cubes = Vec::with_capacity(n);
    for i in 1..=n {
        let mut c: Vec<f64> = (0..d - 1).map(|_| StandardNormal.sample(&mut rng)).collect();
        c.push(4.0 * i as f64);
        cubes.push(Cube::new(c, gaussian_edge(i, d))?);
    }
    for i in 0..n {
        for j in i + 1..n {
            if cubes[i].gap(&cubes[j]) < 2.0 {
                return Err(Error::Precondition(format!("cubes {i} and {j} closer than 2")));
            }
        }
    }
    let centers = cubes.iter().map(|q| q.center.clone()).collect();
    let weight = WeightSpec::bump_depression(d, centers, alpha)?;
    Ok(GaussianFamily { cubes, weight, alpha })
}

impl GaussianFamily {
    /// Partial sums of `w(2Q_i) ℓ_i^{-p}`.
    pub fn sum_partials(&self, p: f64, quad: &QuadratureConfig) -> Vec<f64> {
        let masses = par::map_slice(&self.cubes, |q| {
            crate::weights::mass(&self.weight, &Region::from(q.dilate(2.0)), quad).value * q.edge.powf(-p)
        });
        masses
            .iter()
            .scan(0.0, |s, m| {
                *s += m;
                Some(*s)
            })
            .collect()
    }

    /// The witness `Σ ψ_{2Q_i}`.
    pub fn function(&self) -> Result<TestFunction> {
        let d = self.weight.d;
        let cubes: Vec<Cube> = self.cubes.iter().map(|q| q.dilate(2.0)).collect();
        let n = cubes.len();
        bump_chain(d, cubes, vec![1.0; n])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayKind {
    Product,
    Radial,
}

/// The capped decay weight (product or radial) and the chain `Σ_{i=2}^{n} ψ_{2Q_i}`,
/// `Q_i = Q((0̄, 2^i), 2^{βi})`.
pub fn decaying_weight_family(
    kind: DecayKind,
    d: usize,
    p: f64,
    alpha: f64,
    beta: f64,
    n_last: i32,
) -> Result<(WeightSpec, TestFunction)> {
    let df = d as f64;
    if !(p >= 1.0 && p < df) {
        return invalid(format!("need 1 <= p < d, got p = {p}, d = {d}"));
    }
    let alpha_max = match kind {
        DecayKind::Product => (df - p).min(1.0),
        DecayKind::Radial => df - p,
    };
    if !(alpha > 0.0 && alpha < alpha_max) {
        return invalid(format!("alpha = {alpha} outside (0, {alpha_max})"));
    }
    let beta_max = (alpha / (df + p)).min(1.0);
    if !(beta > 0.0 && beta < beta_max) {
        return invalid(format!("beta = {beta} outside (0, {beta_max})"));
    }
    if n_last < 2 {
        return invalid("chain needs at least one cube");
    }
    let weight = match kind {
        DecayKind::Product => WeightSpec::half_line_power(d, alpha)?,
        DecayKind::Radial => WeightSpec::radial(d, crate::profile::PiecewiseProfile::capped_decay(alpha))?,
    };
    let cubes = (2..=n_last)
        .map(|i| {
            let mut c = vec![0.0; d];
            c[d - 1] = (i as f64).exp2();
            Cube::new(c, 2.0 * (beta * i as f64).exp2())
        })
        .collect::<Result<Vec<_>>>()?;
    let n = cubes.len();
    Ok((weight, bump_chain(d, cubes, vec![1.0; n])?))
}

/// The corridor weight with parameters checked against the admissible ranges.
pub fn corridor_counterexample(d: usize, p: f64, q: f64, alpha: f64, beta: f64) -> Result<WeightSpec> {
    let df = d as f64;
    if !(q >= 1.0 && p >= q && p < df) {
        return invalid(format!("need 1 <= q <= p < d, got q = {q}, p = {p}, d = {d}"));
    }
    if q > 1.0 {
        if !(alpha >= 0.0 && alpha < (df - 1.0) * (q - 1.0)) {
            return invalid(format!("alpha = {alpha} outside [0, {})", (df - 1.0) * (q - 1.0)));
        }
        if !(beta >= 0.0 && beta < df - p) {
            return invalid(format!("beta = {beta} outside [0, {})", df - p));
        }
    } else {
        if alpha != 0.0 {
            return invalid("q = 1 requires alpha = 0");
        }
        if !(beta >= 0.0 && beta < df - 1.0) {
            return invalid(format!("beta = {beta} outside [0, {})", df - 1.0));
        }
    }
    WeightSpec::corridor(d, alpha, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loglog_values() {
        let f = loglog_function(3);
        assert_relative_eq!(f.eval(&[0.0; 3]).unwrap(), -0.366513, epsilon = 1e-6);
        assert_relative_eq!(f.grad_norm(&[1.0, 0.0, 0.0]).unwrap(), 0.606826, epsilon = 1e-6);
    }

    #[test]
    fn hat_bump_shape() {
        let q = Cube::new(vec![1.0, 2.0], 2.0).unwrap();
        let f = hat_bump(q).unwrap();
        assert_eq!(f.eval(&[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(f.eval(&[2.5, 2.0]).unwrap(), 0.0);
        assert_eq!(f.grad_norm(&[2.5, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn stencil_has_32_directions() {
        assert_eq!(stencil().len(), 32);
    }

    #[test]
    fn chain_rejects_overlaps() {
        let a = Cube::new(vec![0.0, 0.0], 2.0).unwrap();
        let b = Cube::new(vec![0.0, 1.0], 2.0).unwrap();
        assert!(bump_chain(2, vec![a, b], vec![1.0, 1.0]).is_err());
        let empty = bump_chain(2, vec![], vec![]).unwrap();
        assert_eq!(empty.eval(&[3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn unit_cube_energy_closed_form() {
        let w = WeightSpec::constant(2, 1.0).unwrap();
        let e = cube_energy(&Cube::unit(2), &w, 2.0, &QuadratureConfig::default());
        assert_relative_eq!(e.value, 8.0 / 3.0, max_relative = 1e-14);
    }
}
