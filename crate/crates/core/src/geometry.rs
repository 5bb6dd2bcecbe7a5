//! Regions of integration: dyadic annuli, axis-aligned cubes and boxes.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Largest ambient dimension supported by the closed forms.
pub const MAX_DIM: usize = 6;

/// Surface measure of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        5 => 8.0 * PI * PI / 3.0,
        6 => PI * PI * PI,
        // 2π^{d/2}/Γ(d/2) via the recursion |S^{d+1}| = 2π/d |S^{d-1}|
        _ => 2.0 * PI / (d - 2) as f64 * sphere_area(d - 2),
    }
}

/// Lebesgue measure of the ball B(0, r) in ℝ^d.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    sphere_area(d) / d as f64 * r.powi(d as i32)
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `b^k - a^k` for `0 <= a < b`, without cancellation when `a` is close to `b`.
pub(crate) fn pow_diff(a: f64, b: f64, k: f64) -> f64 {
    if a == 0.0 {
        return b.powf(k);
    }
    a.powf(k) * (k * (b / a).ln()).exp_m1()
}

/// The shell `{2^i <= |x - center| < 2^{i+1}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicAnnulus {
    pub index: i32,
    pub center: Vec<f64>,
}

impl DyadicAnnulus {
    pub fn at_origin(d: usize, index: i32) -> Self {
        Self {
            index,
            center: vec![0.0; d],
        }
    }

    pub fn centered(center: Vec<f64>, index: i32) -> Self {
        Self { index, center }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn inner_radius(&self) -> f64 {
        2f64.powi(self.index)
    }

    pub fn outer_radius(&self) -> f64 {
        2f64.powi(self.index + 1)
    }

    pub fn is_origin_centered(&self) -> bool {
        self.center.iter().all(|c| *c == 0.0)
    }

    pub fn volume(&self) -> f64 {
        let d = self.dim();
        sphere_area(d) / d as f64 * pow_diff(self.inner_radius(), self.outer_radius(), d as f64)
    }
}

/// Axis-aligned closed cube `Q(center, edge)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub edge: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, edge: f64) -> Result<Self> {
        if !(edge > 0.0 && edge.is_finite()) {
            return invalid(format!("cube edge must be positive, got {edge}"));
        }
        if center.is_empty() {
            return invalid("cube center must have at least one coordinate");
        }
        Ok(Self { center, edge })
    }

    /// Unit cube `[0,1]^d`.
    pub fn unit(d: usize) -> Self {
        Self {
            center: vec![0.5; d],
            edge: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `aQ`: same center, edge scaled by `a`.
    pub fn dilate(&self, a: f64) -> Self {
        Self {
            center: self.center.clone(),
            edge: self.edge * a,
        }
    }

    pub fn volume(&self) -> f64 {
        self.edge.powi(self.dim() as i32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let h = 0.5 * self.edge;
        self.center
            .iter()
            .zip(x)
            .all(|(c, v)| (v - c).abs() <= h)
    }

    pub fn to_box(&self) -> AxisBox {
        let h = 0.5 * self.edge;
        AxisBox {
            lo: self.center.iter().map(|c| c - h).collect(),
            hi: self.center.iter().map(|c| c + h).collect(),
        }
    }

    /// `Q × [lo, hi]`: extends a cube of ℝ^{d-1} by a vertical interval.
    pub fn extrude(&self, lo: f64, hi: f64) -> AxisBox {
        let mut b = self.to_box();
        b.lo.push(lo);
        b.hi.push(hi);
        b
    }

    /// Whether the interiors of two cubes are disjoint.
    pub fn interiors_disjoint(&self, other: &Cube) -> bool {
        let reach = 0.5 * (self.edge + other.edge);
        self.center
            .iter()
            .zip(&other.center)
            .any(|(a, b)| (a - b).abs() >= reach)
    }

    /// Euclidean distance between the two closed cubes.
    pub fn gap(&self, other: &Cube) -> f64 {
        let reach = 0.5 * (self.edge + other.edge);
        self.center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| ((a - b).abs() - reach).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Axis-aligned box `Π [lo_k, hi_k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return invalid("box bounds must satisfy lo < hi on every axis");
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Splits into the leading `d-1` axes and the last one.
    pub fn split_last(&self) -> (AxisBox, (f64, f64)) {
        let d = self.dim();
        (
            AxisBox {
                lo: self.lo[..d - 1].to_vec(),
                hi: self.hi[..d - 1].to_vec(),
            },
            (self.lo[d - 1], self.hi[d - 1]),
        )
    }

    /// The `2^d` dyadic children.
    pub fn children(&self) -> Vec<AxisBox> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                let mut lo = Vec::with_capacity(d);
                let mut hi = Vec::with_capacity(d);
                for k in 0..d {
                    let mid = 0.5 * (self.lo[k] + self.hi[k]);
                    if mask >> k & 1 == 0 {
                        lo.push(self.lo[k]);
                        hi.push(mid);
                    } else {
                        lo.push(mid);
                        hi.push(self.hi[k]);
                    }
                }
                AxisBox { lo, hi }
            })
            .collect()
    }
}

/// Region over which masses are taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Region {
    Annulus(DyadicAnnulus),
    Box(AxisBox),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Annulus(a) => a.dim(),
            Region::Box(b) => b.dim(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Region::Annulus(a) => a.volume(),
            Region::Box(b) => b.volume(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Region::Annulus(a) => format!("annulus A_{} centered at {:?}", a.index, a.center),
            Region::Box(b) => format!("box {:?}..{:?}", b.lo, b.hi),
        }
    }
}

impl From<DyadicAnnulus> for Region {
    fn from(a: DyadicAnnulus) -> Self {
        Region::Annulus(a)
    }
}

impl From<AxisBox> for Region {
    fn from(b: AxisBox) -> Self {
        Region::Box(b)
    }
}

impl From<Cube> for Region {
    fn from(c: Cube) -> Self {
        Region::Box(c.to_box())
    }
}

impl From<&Cube> for Region {
    fn from(c: &Cube) -> Self {
        Region::Box(c.to_box())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas_match_gamma_formula() {
        assert_relative_eq!(sphere_area(3), 4.0 * PI);
        assert_relative_eq!(sphere_area(7), 16.0 * PI.powi(3) / 15.0, max_relative = 1e-14);
        assert_relative_eq!(ball_volume(3, 2.0), 4.0 / 3.0 * PI * 8.0, max_relative = 1e-14);
    }

    #[test]
    fn annulus_volume_is_disk_difference() {
        let a = DyadicAnnulus::at_origin(2, 0);
        assert_relative_eq!(a.volume(), 3.0 * PI, max_relative = 1e-14);
        assert!(a.inner_radius() < a.outer_radius());
    }

    #[test]
    fn cube_rejects_nonpositive_edge() {
        assert!(Cube::new(vec![0.0, 0.0], 0.0).is_err());
        assert!(Cube::new(vec![0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn children_partition_the_box() {
        let b = AxisBox::new(vec![0.0, 1.0, -2.0], vec![1.0, 3.0, 2.0]).unwrap();
        let kids = b.children();
        assert_eq!(kids.len(), 8);
        let total: f64 = kids.iter().map(AxisBox::volume).sum();
        assert_relative_eq!(total, b.volume());
    }

    #[test]
    fn cube_gap_and_disjointness() {
        let a = Cube::new(vec![0.0, 4.0], 2.0).unwrap();
        let b = Cube::new(vec![0.0, 8.0], 2.0).unwrap();
        assert!(a.interiors_disjoint(&b));
        assert_relative_eq!(a.gap(&b), 2.0);
        let c = Cube::new(vec![0.5, 5.0], 2.0).unwrap();
        assert!(!a.interiors_disjoint(&c));
    }

    #[test]
    fn pow_diff_is_accurate_near_equality() {
        let a = 1.0e6;
        let b = a * (1.0 + 1e-12);
        let exact = 3.0 * a * a * (b - a);
        assert_relative_eq!(pow_diff(a, b, 3.0), exact, max_relative = 1e-3);
    }
}
