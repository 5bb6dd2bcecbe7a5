//! Parametric weight families, their pointwise values and their masses.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm, pow_diff, sphere_area, AxisBox, Cube, DyadicAnnulus, Region};
use crate::profile::PiecewiseProfile;
use crate::sampling::{bits_key, box_strata, integrate, shell_strata, MassEstimate, QuadratureConfig};

const TAG_ANNULUS: u64 = 0xa11;
const TAG_BOX: u64 = 0xb0c;

/// A weight `w` on ℝ^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub d: usize,
    #[serde(flatten)]
    pub kind: WeightKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum WeightKind {
    Constant { c: f64 },
    /// `|x|^alpha`
    Power { alpha: f64 },
    /// `v(|x|)`
    RadialProfile { profile: PiecewiseProfile },
    /// `w1(x̄) · w2(t)` with `x̄ ∈ ℝ^{d-1}`, `t ∈ ℝ`.
    Product {
        w1: Box<WeightSpec>,
        w2: Box<WeightSpec>,
    },
    /// Weight that is small along the vertical corridors `2^i <= t <= 2^{i+1}`, `|x̄| <= 2^i`.
    Corridor { alpha: f64, beta: f64 },
    /// `min{1, min_i |x - c_i|^alpha}`
    BumpDepression { centers: Vec<Vec<f64>>, alpha: f64 },
    /// `min(1, y^{-alpha})` for `y > 0` and 1 otherwise, `y` the last coordinate.
    HalfLinePower { alpha: f64 },
}

impl WeightSpec {
    /// Builds and validates a weight; `d = 1` is accepted for product factors.
    pub fn new(d: usize, kind: WeightKind) -> Result<Self> {
        let mut spec = Self { d, kind };
        spec.normalize();
        spec.validate_factor()?;
        Ok(spec)
    }

    pub fn constant(d: usize, c: f64) -> Result<Self> {
        Self::new(d, WeightKind::Constant { c })
    }

    pub fn power(d: usize, alpha: f64) -> Result<Self> {
        Self::new(d, WeightKind::Power { alpha })
    }

    pub fn radial(d: usize, profile: PiecewiseProfile) -> Result<Self> {
        Self::new(d, WeightKind::RadialProfile { profile })
    }

    pub fn product(w1: WeightSpec, w2: WeightSpec) -> Result<Self> {
        Self::new(
            w1.d + w2.d,
            WeightKind::Product {
                w1: Box::new(w1),
                w2: Box::new(w2),
            },
        )
    }

    pub fn corridor(d: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(d, WeightKind::Corridor { alpha, beta })
    }

    pub fn bump_depression(d: usize, centers: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        Self::new(d, WeightKind::BumpDepression { centers, alpha })
    }

    pub fn half_line_power(d: usize, alpha: f64) -> Result<Self> {
        Self::new(d, WeightKind::HalfLinePower { alpha })
    }

    /// Parses a `{kind, d, params}` JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut spec: WeightSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("malformed weight document: {e}")))?;
        spec.normalize();
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weight specs always serialize")
    }

    fn normalize(&mut self) {
        if let WeightKind::BumpDepression { centers, .. } = &mut self.kind {
            centers.sort_by(|a, b| {
                let (x, y) = (a.last().copied(), b.last().copied());
                x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal)
            });
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return invalid(format!("weights live on ℝ^d with d >= 2, got d = {}", self.d));
        }
        self.validate_factor()
    }

    fn validate_factor(&self) -> Result<()> {
        let d = self.d;
        if d == 0 || d > crate::geometry::MAX_DIM {
            return invalid(format!("dimension {d} outside 1..={}", crate::geometry::MAX_DIM));
        }
        let df = d as f64;
        match &self.kind {
            WeightKind::Constant { c } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return invalid("constant weight must be positive and finite");
                }
            }
            WeightKind::Power { alpha } => {
                if !alpha.is_finite() || *alpha <= -df {
                    return invalid(format!(
                        "|x|^{alpha} is not locally integrable on ℝ^{d}; need alpha > -{d}"
                    ));
                }
            }
            WeightKind::RadialProfile { profile } => profile.validate_in(d)?,
            WeightKind::Product { w1, w2 } => {
                if w1.d + w2.d != d || w2.d != 1 {
                    return invalid(format!(
                        "product factors must live on ℝ^{} and ℝ, got ℝ^{} and ℝ^{}",
                        d - 1,
                        w1.d,
                        w2.d
                    ));
                }
                w1.validate_factor()?;
                w2.validate_factor()?;
            }
            WeightKind::Corridor { alpha, beta } => {
                if d < 2 || !(*alpha >= 0.0 && *beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return invalid("corridor weight needs d >= 2, alpha >= 0 and beta >= 0");
                }
            }
            WeightKind::BumpDepression { centers, alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return invalid("depression exponent must be positive");
                }
                if let Some(c) = centers.iter().find(|c| c.len() != d) {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: c.len(),
                    });
                }
            }
            WeightKind::HalfLinePower { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return invalid("half-line power exponent must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }

    /// The constant value if the weight is constant.
    pub fn as_constant(&self) -> Option<f64> {
        match &self.kind {
            WeightKind::Constant { c } => Some(*c),
            WeightKind::Power { alpha } if *alpha == 0.0 => Some(1.0),
            WeightKind::Product { w1, w2 } => Some(w1.as_constant()? * w2.as_constant()?),
            _ => None,
        }
    }

    /// The radial profile `v` with `w(x) = v(|x|)`, if the weight is radial.
    pub fn radial_profile(&self) -> Option<PiecewiseProfile> {
        match &self.kind {
            WeightKind::Constant { c } => Some(PiecewiseProfile::constant(*c)),
            WeightKind::Power { alpha } => Some(PiecewiseProfile::power(*alpha)),
            WeightKind::RadialProfile { profile } => Some(profile.clone()),
            _ => None,
        }
    }

    /// Pointwise value without checks; may be 0 or infinite on the singular set.
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            WeightKind::Constant { c } => *c,
            WeightKind::Power { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    norm(x).powf(*alpha)
                }
            }
            WeightKind::RadialProfile { profile } => profile.eval(norm(x)),
            WeightKind::Product { w1, w2 } => {
                let (xb, t) = x.split_at(self.d - 1);
                w1.value(xb) * w2.value(t)
            }
            WeightKind::Corridor { alpha, beta } => corridor_value(x, *alpha, *beta),
            WeightKind::BumpDepression { centers, alpha } => depression_value(centers, x, *alpha),
            WeightKind::HalfLinePower { alpha } => {
                let y = x[x.len() - 1];
                if y > 1.0 {
                    y.powf(-alpha)
                } else {
                    1.0
                }
            }
        }
    }

    /// Returns `λw`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        WeightSpec::product_scale(self.clone(), lambda)
    }

    fn product_scale(spec: WeightSpec, lambda: f64) -> Result<Self> {
        let kind = match spec.kind {
            WeightKind::Constant { c } => WeightKind::Constant { c: c * lambda },
            WeightKind::Product { w1, w2 } => WeightKind::Product {
                w1: Box::new(WeightSpec::product_scale(*w1, lambda)?),
                w2,
            },
            WeightKind::RadialProfile { profile } => WeightKind::RadialProfile {
                profile: scale_profile(profile, lambda),
            },
            WeightKind::Power { alpha } => WeightKind::RadialProfile {
                profile: scale_profile(PiecewiseProfile::power(alpha), lambda),
            },
            _ => return invalid("scaling is only represented for constant, radial and product weights"),
        };
        WeightSpec::new(spec.d, kind)
    }
}

fn scale_profile(mut p: PiecewiseProfile, lambda: f64) -> PiecewiseProfile {
    use crate::profile::Piece;
    for seg in &mut p.segments {
        match &mut seg.piece {
            Piece::Constant { value } => *value *= lambda,
            Piece::Power { coef, .. } => *coef *= lambda,
            Piece::Sinusoid {
                offset, amplitude, ..
            } => {
                *offset *= lambda;
                *amplitude *= lambda;
            }
        }
    }
    p
}

fn corridor_value(x: &[f64], alpha: f64, beta: f64) -> f64 {
    let d = x.len();
    let t = x[d - 1];
    let xb = norm(&x[..d - 1]);
    if t >= 1.0 {
        let i = t.log2().floor();
        if xb <= i.exp2() {
            return (-(alpha + beta) * i - 1.0).exp2() * (1.0 + xb.powf(alpha));
        }
    }
    let r = norm(x);
    if r <= 1.0 || beta == 0.0 {
        1.0
    } else {
        r.powf(-beta)
    }
}

fn depression_value(centers: &[Vec<f64>], x: &[f64], alpha: f64) -> f64 {
    let d = x.len();
    let y = x[d - 1];
    let lo = centers.partition_point(|c| c[d - 1] < y - 1.0);
    let mut best = 1.0f64;
    for c in &centers[lo..] {
        if c[d - 1] > y + 1.0 {
            break;
        }
        let r = crate::geometry::distance(x, c);
        if r < 1.0 {
            best = best.min(r.powf(alpha));
        }
    }
    best
}

fn check_dim(spec: &WeightSpec, got: usize) -> Result<()> {
    if spec.d != got {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got,
        });
    }
    Ok(())
}

/// `w(x)`, or a singular-point error where `w` is 0, infinite or undefined.
pub fn eval_weight(spec: &WeightSpec, x: &[f64]) -> Result<f64> {
    check_dim(spec, x.len())?;
    let v = spec.value(x);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::SingularPoint(x.to_vec()))
    }
}

pub(crate) fn positive(v: f64) -> Option<f64> {
    (v > 0.0 && v.is_finite()).then_some(v)
}

/// `∫_{A} w` over a dyadic annulus.
pub fn annulus_mass(spec: &WeightSpec, annulus: &DyadicAnnulus, quad: &QuadratureConfig) -> MassEstimate {
    debug_assert_eq!(spec.d, annulus.dim());
    if let Some(c) = spec.as_constant() {
        return MassEstimate::closed_form(c * annulus.volume());
    }
    if annulus.is_origin_centered() {
        if let Some(v) = spec.radial_profile() {
            let d = spec.d;
            let m = v.moment(annulus.inner_radius(), annulus.outer_radius(), d as u32 - 1);
            return MassEstimate::closed_form(sphere_area(d) * m);
        }
    }
    annulus_mass_mc(spec, annulus, quad)
}

/// Stratified Monte Carlo estimate of the annulus mass, bypassing closed forms.
///
/// The sample stream depends on the annulus index only, so translating the
/// center moves the same points rigidly.
pub fn annulus_mass_mc(spec: &WeightSpec, annulus: &DyadicAnnulus, quad: &QuadratureConfig) -> MassEstimate {
    let strata = shell_strata(
        &annulus.center,
        annulus.inner_radius(),
        annulus.outer_radius(),
        quad.radial_strata,
    );
    let [m] = integrate(&strata, &[TAG_ANNULUS, annulus.index as i64 as u64], quad, |x| {
        positive(spec.value(x)).map(|v| [v])
    });
    m
}

/// `∫_Q w` over a cube.
pub fn region_mass(spec: &WeightSpec, cube: &Cube, quad: &QuadratureConfig) -> MassEstimate {
    if let Some(c) = spec.as_constant() {
        return MassEstimate::closed_form(c * cube.volume());
    }
    box_mass(spec, &cube.to_box(), quad)
}

/// `∫_B w` over an axis-aligned box.
pub fn box_mass(spec: &WeightSpec, b: &AxisBox, quad: &QuadratureConfig) -> MassEstimate {
    debug_assert_eq!(spec.d, b.dim());
    box_mass_factor(spec, b, quad)
}

fn box_mass_factor(spec: &WeightSpec, b: &AxisBox, quad: &QuadratureConfig) -> MassEstimate {
    if let Some(c) = spec.as_constant() {
        return MassEstimate::closed_form(c * b.volume());
    }
    match &spec.kind {
        WeightKind::HalfLinePower { alpha } => {
            let (base, (lo, hi)) = b.split_last();
            let base_vol = if spec.d == 1 { 1.0 } else { base.volume() };
            MassEstimate::closed_form(base_vol * capped_decay_integral(*alpha, lo, hi))
        }
        WeightKind::Product { w1, w2 } => {
            let (base, (lo, hi)) = b.split_last();
            let m1 = box_mass_factor(w1, &base, quad);
            let m2 = box_mass_factor(w2, &AxisBox { lo: vec![lo], hi: vec![hi] }, quad);
            product_estimate(&m1, &m2)
        }
        WeightKind::Power { .. } | WeightKind::RadialProfile { .. } if spec.d == 1 => {
            let v = spec.radial_profile().unwrap();
            let (lo, hi) = (b.lo[0], b.hi[0]);
            let m = if lo >= 0.0 {
                v.integral(lo, hi)
            } else if hi <= 0.0 {
                v.integral(-hi, -lo)
            } else {
                v.integral(0.0, -lo) + v.integral(0.0, hi)
            };
            MassEstimate::closed_form(m)
        }
        _ => box_mass_mc(spec, b, quad),
    }
}

/// Stratified Monte Carlo estimate of the box mass, bypassing closed forms.
pub fn box_mass_mc(spec: &WeightSpec, b: &AxisBox, quad: &QuadratureConfig) -> MassEstimate {
    let strata = box_strata(b, quad.radial_strata);
    let [m] = integrate(&strata, &[TAG_BOX, bits_key(&b.lo), bits_key(&b.hi)], quad, |x| {
        positive(spec.value(x)).map(|v| [v])
    });
    m
}

/// `∫_lo^hi min(1, y^{-alpha}) dy` with the weight equal to 1 for `y <= 1`.
fn capped_decay_integral(alpha: f64, lo: f64, hi: f64) -> f64 {
    let flat = (hi.min(1.0) - lo).max(0.0);
    let a = lo.max(1.0);
    let tail = if hi > a {
        pow_diff(a, hi, 1.0 - alpha) / (1.0 - alpha)
    } else {
        0.0
    };
    flat + tail
}

fn product_estimate(m1: &MassEstimate, m2: &MassEstimate) -> MassEstimate {
    let mut out = MassEstimate::sum([m1, m2]);
    out.value = m1.value * m2.value;
    out.std_error = ((m2.value * m1.std_error).powi(2) + (m1.value * m2.std_error).powi(2)).sqrt();
    out
}

/// `∫_R w` over any supported region.
pub fn mass(spec: &WeightSpec, region: &Region, quad: &QuadratureConfig) -> MassEstimate {
    match region {
        Region::Annulus(a) => annulus_mass(spec, a, quad),
        Region::Box(b) => box_mass(spec, b, quad),
    }
}

fn check_region(spec: &WeightSpec, region: &Region) -> Result<()> {
    check_dim(spec, region.dim())
}

fn nonzero(region: &Region, m: &MassEstimate) -> Result<()> {
    let zero = if m.is_closed_form() {
        !(m.value > 0.0)
    } else {
        !(m.value > 0.0) || m.value < 2.0 * m.std_error
    };
    if zero || !m.value.is_finite() {
        return Err(Error::ZeroMass {
            region: region.describe(),
            value: m.value,
            std_error: m.std_error,
        });
    }
    Ok(())
}

/// `(∫_R w)^{1/(1-p)}` with first-order error propagation.
pub fn dual_mass(spec: &WeightSpec, region: &Region, p: f64, quad: &QuadratureConfig) -> Result<MassEstimate> {
    if !(p > 1.0) {
        return invalid(format!("dual mass needs p > 1, got {p}"));
    }
    check_region(spec, region)?;
    let m = mass(spec, region, quad);
    nonzero(region, &m)?;
    Ok(power_of(&m, 1.0 / (1.0 - p)))
}

/// `(∫_R w)^{-1}`, the `p = 1` counterpart of [`dual_mass`].
pub fn inv_ess_sup(spec: &WeightSpec, region: &Region, quad: &QuadratureConfig) -> Result<MassEstimate> {
    check_region(spec, region)?;
    let m = mass(spec, region, quad);
    nonzero(region, &m)?;
    Ok(power_of(&m, -1.0))
}

fn power_of(m: &MassEstimate, s: f64) -> MassEstimate {
    let value = if s == -1.0 { m.value.recip() } else { m.value.powf(s) };
    let std_error = if m.std_error == 0.0 {
        0.0
    } else {
        (s * value / m.value).abs() * m.std_error
    };
    MassEstimate {
        value,
        std_error,
        ..m.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn pointwise_examples() {
        let c = WeightSpec::constant(2, 1.0).unwrap();
        assert_eq!(eval_weight(&c, &[3.0, 7.0]).unwrap(), 1.0);
        let p = WeightSpec::power(3, 2.0).unwrap();
        assert_relative_eq!(eval_weight(&p, &[0.0, 0.0, 2.0]).unwrap(), 4.0);
        let w = WeightSpec::corridor(2, 1.0, 0.5).unwrap();
        assert_relative_eq!(eval_weight(&w, &[0.0, 3.0]).unwrap(), 0.176777, epsilon = 1e-6);
    }

    #[test]
    fn singular_points_and_dimensions_are_signaled() {
        let p = WeightSpec::power(2, -1.0).unwrap();
        assert!(matches!(eval_weight(&p, &[0.0, 0.0]), Err(Error::SingularPoint(_))));
        assert!(matches!(eval_weight(&p, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(WeightSpec::power(3, -3.0).is_err());
        assert!(WeightSpec::half_line_power(2, 1.0).is_err());
    }

    #[test]
    fn closed_form_annulus_masses() {
        let c = WeightSpec::constant(2, 1.0).unwrap();
        let m = annulus_mass(&c, &DyadicAnnulus::at_origin(2, 0), &quad());
        assert_relative_eq!(m.value, 9.42478, epsilon = 1e-5);
        assert_eq!(m.std_error, 0.0);
        let prod = WeightSpec::product(WeightSpec::constant(1, 1.0).unwrap(), WeightSpec::constant(1, 1.0).unwrap()).unwrap();
        let m = annulus_mass(&prod, &DyadicAnnulus::at_origin(2, 1), &quad());
        assert_relative_eq!(m.value, 12.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn half_line_box_mass() {
        let w = WeightSpec::half_line_power(2, 0.5).unwrap();
        let b = AxisBox::new(vec![0.0, 4.0], vec![1.0, 9.0]).unwrap();
        let m = box_mass(&w, &b, &quad());
        assert!(m.is_closed_form());
        assert_relative_eq!(m.value, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn dual_mass_examples() {
        let c = WeightSpec::constant(2, 1.0).unwrap();
        let r = Region::from(DyadicAnnulus::at_origin(2, 0));
        let m = dual_mass(&c, &r, 2.0, &quad()).unwrap();
        assert_relative_eq!(m.value, 0.106103, epsilon = 1e-6);
        let inv = inv_ess_sup(&WeightSpec::constant(3, 2.0).unwrap(), &Cube::unit(3).into(), &quad()).unwrap();
        assert_eq!(inv.value, 0.5);
    }

    #[test]
    fn json_round_trip() {
        let w = WeightSpec::product(
            WeightSpec::power(2, 0.3).unwrap(),
            WeightSpec::constant(1, 1.0).unwrap(),
        )
        .unwrap();
        let back = WeightSpec::from_json(&w.to_json()).unwrap();
        assert_eq!(w, back);
        let doc = r#"{"kind": "power", "d": 3, "params": {"alpha": -0.5}}"#;
        assert_eq!(WeightSpec::from_json(doc).unwrap(), WeightSpec::power(3, -0.5).unwrap());
        assert!(WeightSpec::from_json(r#"{"kind": "power", "d": 3, "params": {"alpha": -4}}"#).is_err());
    }

    #[test]
    fn depression_uses_nearest_center() {
        let w = WeightSpec::bump_depression(2, vec![vec![0.0, 8.0], vec![0.0, 4.0]], 2.0).unwrap();
        assert_relative_eq!(w.value(&[0.5, 4.0]), 0.25);
        assert_relative_eq!(w.value(&[0.0, 7.9]), 0.01, max_relative = 1e-12);
        assert_eq!(w.value(&[3.0, 6.0]), 1.0);
        assert!(eval_weight(&w, &[0.0, 8.0]).is_err());
    }
}
