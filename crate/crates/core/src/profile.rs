//! Piecewise radial profiles `v: [0, ∞) → (0, ∞)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Shape of one profile segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Piece {
    Constant { value: f64 },
    /// `coef · s^exponent`
    Power { coef: f64, exponent: f64 },
    /// `offset + amplitude · sin(freq · s + phase)`
    Sinusoid {
        offset: f64,
        amplitude: f64,
        freq: f64,
        phase: f64,
    },
}

impl Piece {
    fn eval(&self, s: f64) -> f64 {
        match *self {
            Piece::Constant { value } => value,
            Piece::Power { coef, exponent } => coef * s.powf(exponent),
            Piece::Sinusoid {
                offset,
                amplitude,
                freq,
                phase,
            } => offset + amplitude * (freq * s + phase).sin(),
        }
    }

    /// `∫_a^b piece(s) s^m ds`.
    fn moment(&self, a: f64, b: f64, m: u32) -> f64 {
        let k = m as f64 + 1.0;
        match *self {
            Piece::Constant { value } => value * power_moment(a, b, k),
            Piece::Power { coef, exponent } => coef * power_moment(a, b, exponent + k),
            Piece::Sinusoid {
                offset,
                amplitude,
                freq,
                phase,
            } => {
                let osc = sin_moment(b, m, freq, phase) - sin_moment(a, m, freq, phase);
                offset * power_moment(a, b, k) + amplitude * osc
            }
        }
    }
}

/// `∫_a^b s^{k-1} ds`.
fn power_moment(a: f64, b: f64, k: f64) -> f64 {
    if k == 0.0 {
        (b / a).ln()
    } else if a == 0.0 {
        b.powf(k) / k
    } else {
        crate::geometry::pow_diff(a, b, k) / k
    }
}

/// Antiderivative of `s^m sin(f s + φ)`.
fn sin_moment(s: f64, m: u32, f: f64, phase: f64) -> f64 {
    let (sn, cs) = (f * s + phase).sin_cos();
    // S_m = -s^m cos/f + (m/f) C_{m-1},  C_m = s^m sin/f - (m/f) S_{m-1}
    let mut sin_prev = -cs / f;
    let mut cos_prev = sn / f;
    for j in 1..=m {
        let sj = s.powi(j as i32);
        let jf = j as f64 / f;
        let sin_j = -sj * cs / f + jf * cos_prev;
        let cos_j = sj * sn / f - jf * sin_prev;
        sin_prev = sin_j;
        cos_prev = cos_j;
    }
    sin_prev
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Left breakpoint; the segment extends to the next one.
    pub start: f64,
    #[serde(flatten)]
    pub piece: Piece,
}

/// Profile given by consecutive segments; the first starts at 0, the last is unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseProfile {
    pub segments: Vec<Segment>,
}

impl PiecewiseProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let p = Self { segments };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(value: f64) -> Self {
        Self::single(Piece::Constant { value })
    }

    /// `s^alpha`.
    pub fn power(alpha: f64) -> Self {
        Self::single(Piece::Power {
            coef: 1.0,
            exponent: alpha,
        })
    }

    /// `min(1, s^{-alpha})` for `alpha > 0`.
    pub fn capped_decay(alpha: f64) -> Self {
        Self {
            segments: vec![
                Segment {
                    start: 0.0,
                    piece: Piece::Constant { value: 1.0 },
                },
                Segment {
                    start: 1.0,
                    piece: Piece::Power {
                        coef: 1.0,
                        exponent: -alpha,
                    },
                },
            ],
        }
    }

    pub fn sinusoid(offset: f64, amplitude: f64, freq: f64, phase: f64) -> Self {
        Self::single(Piece::Sinusoid {
            offset,
            amplitude,
            freq,
            phase,
        })
    }

    fn single(piece: Piece) -> Self {
        Self {
            segments: vec![Segment { start: 0.0, piece }],
        }
    }

    /// Checks breakpoints, positivity and local integrability against `s^{d-1} ds`.
    pub fn validate_in(&self, d: usize) -> Result<()> {
        self.validate()?;
        if let Piece::Power { exponent, .. } = self.segments[0].piece {
            if exponent <= -(d as f64) {
                return invalid(format!(
                    "profile s^{exponent} near 0 is not locally integrable in dimension {d}"
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return invalid("profile needs at least one segment");
        }
        if self.segments[0].start != 0.0 {
            return invalid("first profile segment must start at 0");
        }
        for w in self.segments.windows(2) {
            if !(w[1].start > w[0].start) || !w[1].start.is_finite() {
                return invalid("profile breakpoints must be finite and strictly increasing");
            }
        }
        for (k, seg) in self.segments.iter().enumerate() {
            let ok = match seg.piece {
                Piece::Constant { value } => value > 0.0 && value.is_finite(),
                Piece::Power { coef, exponent } => {
                    coef > 0.0 && coef.is_finite() && exponent.is_finite()
                }
                Piece::Sinusoid {
                    offset,
                    amplitude,
                    freq,
                    phase,
                } => {
                    offset > amplitude.abs()
                        && freq > 0.0
                        && offset.is_finite()
                        && freq.is_finite()
                        && phase.is_finite()
                }
            };
            if !ok {
                return invalid(format!("profile segment {k} is not positive and finite"));
            }
        }
        Ok(())
    }

    fn segment_at(&self, s: f64) -> usize {
        self.segments.partition_point(|seg| seg.start <= s).max(1) - 1
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.segments[self.segment_at(s)].piece.eval(s)
    }

    /// Breakpoints strictly inside `(a, b)`.
    pub fn breakpoints_in(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.segments
            .iter()
            .map(|s| s.start)
            .filter(move |s| *s > a && *s < b)
    }

    /// `∫_a^b v(s) s^m ds` in closed form.
    pub fn moment(&self, a: f64, b: f64, m: u32) -> f64 {
        let mut total = 0.0;
        let mut lo = a;
        let mut k = self.segment_at(a);
        while lo < b {
            let hi = self
                .segments
                .get(k + 1)
                .map_or(b, |s| s.start.min(b));
            if hi > lo {
                total += self.segments[k].piece.moment(lo, hi, m);
            }
            lo = hi;
            k += 1;
        }
        total
    }

    /// `∫_a^b v(s) ds` in closed form.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.moment(a, b, 0)
    }
}
