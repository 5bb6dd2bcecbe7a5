use limlab::diagnostics::unit_cube_infimum;
use limlab::geometry::sphere_area;
use limlab::rp::{rp_terms, rp_translated, sup_rp_sweep, SweepVerdict, Verdict, DEFAULT_RANGE};
use limlab::trend::Trend;
use limlab::{QuadratureConfig, WeightSpec};
use proptest::prelude::*;

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn dyadic_grid(n: i32) -> Vec<f64> {
    (0..=n).map(|k| (k as f64).exp2()).collect()
}

#[test]
fn lebesgue_terms_match_closed_form() {
    let w = WeightSpec::constant(3, 1.0).unwrap();
    let r = rp_terms(&w, 2.0, (1, 30), &quad()).unwrap();
    for (i, t) in r.indices().zip(&r.terms) {
        let i = i as f64;
        let vol = sphere_area(3) / 3.0 * ((3.0 * (i + 1.0)).exp2() - (3.0 * i).exp2());
        let exact = (2.0 * i).exp2() / vol;
        assert!((t - exact).abs() <= 1e-12 * exact);
    }
    assert_eq!(r.verdict, Verdict::Converged);
}

#[test]
fn exponents_near_one_do_not_overflow() {
    let w = WeightSpec::constant(3, 1.0).unwrap();
    for p in [1.001, 1.01] {
        let r = rp_terms(&w, p, (1, 30), &quad()).unwrap();
        assert!(r.terms.iter().all(|t| t.is_finite() && *t >= 0.0));
        for (i, t) in r.indices().zip(&r.terms).filter(|(_, t)| **t > 0.0) {
            let i = i as f64;
            let vol = sphere_area(3) / 3.0 * ((3.0 * (i + 1.0)).exp2() - (3.0 * i).exp2());
            let log_exact = (i * p - vol.log2()) / (p - 1.0);
            assert!((t.log2() - log_exact).abs() < 1e-9 * log_exact.abs().max(1.0));
        }
        assert_eq!(r.verdict, Verdict::Converged, "p={p}");
    }
}

#[test]
fn power_weight_examples() {
    let crit = rp_terms(&WeightSpec::power(3, -1.0).unwrap(), 2.0, DEFAULT_RANGE, &quad()).unwrap();
    assert_eq!(crit.verdict, Verdict::Diverged);
    let sub = rp_terms(&WeightSpec::power(3, 0.5).unwrap(), 2.0, DEFAULT_RANGE, &quad()).unwrap();
    assert_eq!(sub.verdict, Verdict::Converged);
    assert!((sub.ratio - (-1.5f64).exp2()).abs() < 1e-9);
}

#[test]
fn translation_by_zero_is_identity_and_constants_are_invariant() {
    let w = WeightSpec::power(3, -0.5).unwrap();
    assert_eq!(rp_translated(&w, 2.0, 0.0, DEFAULT_RANGE, &quad()).unwrap(), rp_terms(&w, 2.0, DEFAULT_RANGE, &quad()).unwrap());
    let c = WeightSpec::constant(3, 2.0).unwrap();
    let base = rp_terms(&c, 2.0, DEFAULT_RANGE, &quad()).unwrap();
    for t in [1.0, 37.5, 1e6] {
        assert_eq!(rp_translated(&c, 2.0, t, DEFAULT_RANGE, &quad()).unwrap().terms, base.terms);
    }
    let sweep = sup_rp_sweep(&c, 2.0, &dyadic_grid(12), DEFAULT_RANGE, &quad()).unwrap();
    assert_eq!(sweep.verdict, SweepVerdict::UniformlyBounded);
}

#[test]
fn half_line_translates_increase() {
    let w = WeightSpec::half_line_power(3, 0.5).unwrap();
    let totals: Vec<f64> = (4..=12)
        .map(|m| rp_translated(&w, 2.0, (m as f64).exp2(), DEFAULT_RANGE, &quad()).unwrap().total())
        .collect();
    assert!(totals.windows(2).all(|t| t[1] > t[0]), "{totals:?}");
    let sweep = sup_rp_sweep(&w, 2.0, &dyadic_grid(12), DEFAULT_RANGE, &quad()).unwrap();
    assert_eq!(sweep.verdict, SweepVerdict::Growing);
}

#[test]
fn radial_power_sweep_is_bounded() {
    let w = WeightSpec::power(3, 0.5).unwrap();
    let sweep = sup_rp_sweep(&w, 2.0, &dyadic_grid(12), DEFAULT_RANGE, &quad()).unwrap();
    assert_eq!(sweep.verdict, SweepVerdict::UniformlyBounded, "{:?}", sweep.totals);
}

#[test]
fn verdicts_are_stable_when_the_range_grows() {
    let weights = [
        WeightSpec::power(3, -1.5).unwrap(),
        WeightSpec::power(3, -1.0).unwrap(),
        WeightSpec::power(3, -0.5).unwrap(),
        WeightSpec::power(3, 0.5).unwrap(),
        WeightSpec::half_line_power(3, 0.5).unwrap(),
        WeightSpec::product(WeightSpec::power(2, 0.3).unwrap(), WeightSpec::constant(1, 1.0).unwrap()).unwrap(),
    ];
    for w in &weights {
        let a = rp_terms(w, 2.0, (1, 30), &quad()).unwrap();
        let b = rp_terms(w, 2.0, (1, 35), &quad()).unwrap();
        assert_eq!(a.verdict, b.verdict, "{w:?}");
        assert!(b.partial[..a.partial.len()].iter().zip(&a.partial).all(|(x, y)| x == y));
    }
}

#[test]
fn bounded_unit_cubes_imply_convergence_below_dimension() {
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        let w = WeightSpec::power(3, alpha).unwrap();
        for p in [1.5, 2.0, 2.5] {
            let inf = unit_cube_infimum(&w, 256.0, 1.0, &quad()).unwrap();
            if inf.trend == Trend::BoundedBelow {
                assert_eq!(rp_terms(&w, p, DEFAULT_RANGE, &quad()).unwrap().verdict, Verdict::Converged);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partial_sums_are_monotone(alpha in -2.5f64..3.0, p in 1.0f64..4.0, hi in 10i32..40) {
        let w = WeightSpec::power(3, alpha).unwrap();
        let r = rp_terms(&w, p, (1, hi), &quad()).unwrap();
        prop_assert!(r.terms.iter().all(|t| *t >= 0.0));
        prop_assert!(r.partial.windows(2).all(|s| s[1] >= s[0]));
    }

    #[test]
    fn translated_sums_are_comparable(alpha in -1.5f64..1.5, m in 0i32..4) {
        let w = WeightSpec::power(3, alpha).unwrap();
        let q = quad().with_samples(1024);
        let i_range = (4, 20);
        let t = (m as f64).exp2().min(16.0);
        let a = rp_terms(&w, 2.0, i_range, &q).unwrap().total();
        let b = rp_translated(&w, 2.0, t, i_range, &q).unwrap().total();
        prop_assert!(b / a <= 10.0 && a / b <= 10.0, "{} vs {}", a, b);
    }
}
