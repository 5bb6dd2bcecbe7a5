//! One-dimensional adaptive Gauss–Legendre integration.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

const NODES: usize = 16;
const MAX_DEPTH: u32 = 40;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(NODES).unwrap()))
}

/// `∫_a^b f` by recursive bisection until the two-half estimate agrees with
/// the whole-interval estimate to `tol` (relative, with an absolute floor).
pub fn adaptive<F: Fn(f64) -> f64>(a: f64, b: f64, tol: f64, f: F) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = rule().integrate(a, b, &f);
    refine(a, b, whole, tol, 0, &f)
}

fn refine<F: Fn(f64) -> f64>(a: f64, b: f64, whole: f64, tol: f64, depth: u32, f: &F) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule().integrate(a, m, f);
    let right = rule().integrate(m, b, f);
    let split = left + right;
    if depth >= MAX_DEPTH || (split - whole).abs() <= tol * split.abs().max(1e-300) {
        return split;
    }
    refine(a, m, left, tol, depth + 1, f) + refine(m, b, right, tol, depth + 1, f)
}

/// `∫_a^b f(r) dr` for `0 < a < b` on a logarithmic scale, suited to
/// integrands that behave like powers of `r`.
pub fn adaptive_log<F: Fn(f64) -> f64>(a: f64, b: f64, tol: f64, f: F) -> f64 {
    debug_assert!(a > 0.0 && b > a);
    adaptive(a.ln(), b.ln(), tol, |s| {
        let r = s.exp();
        f(r) * r
    })
}
