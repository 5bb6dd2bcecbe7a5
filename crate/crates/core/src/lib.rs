//! Numerical laboratory for limits at infinity of Sobolev functions with
//! Muckenhoupt weights.
//!
//! The crate evaluates the annulus series ℛ_p(w), estimates A_p and doubling
//! constants, builds explicit witness functions and traces them along rays
//! and vertical lines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod limits;
mod par;
pub mod profile;
pub mod quadrature;
pub mod rp;
pub mod sampling;
pub mod suites;
pub mod trend;
pub mod weights;
pub mod witnesses;

pub use error::{Error, Result};
pub use geometry::{AxisBox, Cube, DyadicAnnulus, Region};
pub use profile::{Piece, PiecewiseProfile, Segment};
pub use sampling::{MassEstimate, Method, QuadratureConfig};
pub use weights::{WeightKind, WeightSpec};
