use limlab::diagnostics::{
    ap_membership_trend, estimate_ap_constant, estimate_doubling, radial_window_infimum, strip_infimum, unit_cube_infimum,
    Argmin, BallFamily, Membership,
};
use limlab::trend::Trend;
use limlab::weights::region_mass;
use limlab::{Cube, PiecewiseProfile, QuadratureConfig, WeightSpec};
use proptest::prelude::*;

fn family(d: usize, n: usize) -> BallFamily {
    BallFamily::new(n, (0.01, 100.0), Cube::new(vec![0.0; d], 50.0).unwrap())
}

#[test]
fn constant_weight_is_a1_with_doubling_2_to_the_d() {
    let q = QuadratureConfig::default();
    for d in [2, 3] {
        let w = WeightSpec::constant(d, 1.0).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let ap = estimate_ap_constant(&w, p, &q, &family(d, 16)).unwrap();
            assert!((ap.value - 1.0).abs() <= 1e-9);
        }
        let dbl = estimate_doubling(&w, &q, &family(d, 16)).unwrap();
        assert!((dbl.value - f64::from(1u32 << d)).abs() < 1e-9);
    }
}

#[test]
fn power_weight_a2_estimate_is_stable() {
    let w = WeightSpec::power(2, 1.0).unwrap();
    let q = QuadratureConfig::default().with_seed(3);
    let base = estimate_ap_constant(&w, 2.0, &q, &family(2, 32)).unwrap().value;
    let more = estimate_ap_constant(&w, 2.0, &q.clone().with_samples(8192), &family(2, 64)).unwrap().value;
    assert!(base >= 1.0 - 1e-2);
    assert!((more / base - 1.0).abs() < 0.1, "{base} vs {more}");
}

#[test]
fn power_weight_a1_estimate_grows_with_the_radius_range() {
    let w = WeightSpec::power(2, 1.0).unwrap();
    let m = ap_membership_trend(&w, 1.0, &QuadratureConfig::default(), &[1, 2, 3, 4, 5, 6], 16).unwrap();
    assert_eq!(m.verdict, Membership::Growing);
    assert!(m.estimates.windows(2).all(|e| e[1] > e[0]));
}

#[test]
fn origin_doubling_of_linear_weight_is_eight() {
    let w = WeightSpec::power(2, 1.0).unwrap();
    let fam = BallFamily::new(8, (0.1, 10.0), Cube::unit(2)).anchored_every(1);
    let dbl = estimate_doubling(&w, &QuadratureConfig::default(), &fam).unwrap();
    assert!((dbl.value - 8.0).abs() < 0.02 * 8.0, "{}", dbl.value);
}

#[test]
fn membership_matches_power_weight_ranges() {
    let q = QuadratureConfig::default();
    let levels = [1, 2, 3, 4, 5, 6];
    let cases: [(usize, f64, &[f64], &[f64]); 4] = [
        (2, 1.0, &[-0.5], &[0.5, 1.5]),
        (2, 2.0, &[-0.5, 0.5], &[2.5, 4.0]),
        (3, 1.0, &[-1.5, -0.5], &[0.5, 1.5]),
        (3, 2.0, &[-1.5, -0.5, 0.5, 1.5], &[4.0, 7.0]),
    ];
    for (d, p, inside, outside) in cases {
        for &a in inside {
            let m = ap_membership_trend(&WeightSpec::power(d, a).unwrap(), p, &q, &levels, 32).unwrap();
            assert_eq!(m.verdict, Membership::Bounded, "d={d} p={p} alpha={a}: {m:?}");
        }
        for &a in outside {
            let m = ap_membership_trend(&WeightSpec::power(d, a).unwrap(), p, &q, &levels, 32).unwrap();
            assert_eq!(m.verdict, Membership::Growing, "d={d} p={p} alpha={a}: {m:?}");
        }
    }
}

#[test]
fn unit_cube_infimum_examples() {
    let q = QuadratureConfig::default();
    let c = unit_cube_infimum(&WeightSpec::constant(2, 1.0).unwrap(), 64.0, 0.5, &q).unwrap();
    assert_eq!(c.value, 1.0);
    assert_eq!(c.trend, Trend::BoundedBelow);

    let h = unit_cube_infimum(&WeightSpec::half_line_power(2, 0.5).unwrap(), 4096.0, 0.5, &q).unwrap();
    assert_eq!(h.trend, Trend::Vanishing);
    assert!((h.slope + 0.5).abs() < 0.1, "{}", h.slope);

    let w = WeightSpec::power(2, 1.0).unwrap();
    let p = unit_cube_infimum(&w, 256.0, 0.5, &q).unwrap();
    assert_eq!(p.trend, Trend::BoundedBelow);
    match &p.argmin {
        Argmin::Cube(cube) => assert!(cube.center.iter().all(|x| *x == 0.0), "{cube:?}"),
        other => panic!("unexpected argmin {other:?}"),
    }
    let origin = region_mass(&w, &Cube::new(vec![0.0; 2], 1.0).unwrap(), &q);
    assert!((p.value - origin.value).abs() <= 3.0 * origin.std_error);
}

#[test]
fn strip_infimum_examples() {
    let q = QuadratureConfig::default();
    let base = Cube::unit(2);
    let c = strip_infimum(&WeightSpec::constant(3, 1.0).unwrap(), &base, 64, &q).unwrap();
    assert_eq!((c.value, c.trend), (1.0, Trend::BoundedBelow));

    let h = strip_infimum(&WeightSpec::half_line_power(3, 0.5).unwrap(), &base, 1024, &q).unwrap();
    assert_eq!(h.trend, Trend::Vanishing);
    for (z, m) in h.scales.iter().zip(&h.minima) {
        let exact = 2.0 / ((z + 1.0).sqrt() + z.sqrt());
        assert!((m - exact).abs() < 1e-12 * exact, "z={z}: {m} vs {exact}");
    }

    let p = strip_infimum(&WeightSpec::power(3, 1.0).unwrap(), &base, 64, &q).unwrap();
    assert_eq!(p.trend, Trend::BoundedBelow);
    assert!(p.slope > 0.9, "{}", p.slope);
}

#[test]
fn window_infimum_examples() {
    let one = radial_window_infimum(&WeightSpec::constant(3, 1.0).unwrap(), 64.0);
    let one = one.or_else(|_| radial_window_infimum(&WeightSpec::radial(3, PiecewiseProfile::constant(1.0)).unwrap(), 64.0));
    let one = one.unwrap();
    assert!((one.value - 1.0).abs() < 1e-12);
    assert_eq!(one.trend, Trend::BoundedBelow);

    let decay = WeightSpec::radial(3, PiecewiseProfile::capped_decay(0.5)).unwrap();
    let r = radial_window_infimum(&decay, 4096.0).unwrap();
    assert_eq!(r.trend, Trend::Vanishing);
    let exact = 2.0 * (4097f64.sqrt() - 4096f64.sqrt());
    assert!((r.value - exact).abs() < 1e-9, "{} vs {exact}", r.value);

    let osc = WeightSpec::radial(3, PiecewiseProfile::sinusoid(2.0, 1.0, 1.0, 0.0)).unwrap();
    let s = radial_window_infimum(&osc, 100.0).unwrap();
    assert!((s.value - (2.0 - 2.0 * 0.5f64.sin())).abs() < 1e-9);
}

#[test]
fn vanishing_cubes_imply_vanishing_strips_on_power_weights() {
    let q = QuadratureConfig::default();
    for a in [-1.5, -0.5] {
        let w = WeightSpec::power(3, a).unwrap();
        let cubes = unit_cube_infimum(&w, 4096.0, 0.5, &q).unwrap();
        assert_eq!(cubes.trend, Trend::Vanishing);
        let strips = strip_infimum(&w, &Cube::unit(2), 1024, &q).unwrap();
        assert_eq!(strips.trend, Trend::Vanishing, "alpha={a}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ap_estimate_is_scale_free(alpha in -1.5f64..1.5, lambda in 1e-3f64..1e3, p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]), seed in any::<u64>()) {
        let w = WeightSpec::power(3, alpha).unwrap();
        let q = QuadratureConfig::default().with_seed(seed).with_samples(512);
        let f = family(3, 8);
        let a = estimate_ap_constant(&w, p, &q, &f).unwrap().value;
        let b = estimate_ap_constant(&w.scaled(lambda).unwrap(), p, &q, &f).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a, "{} vs {}", a, b);
    }

    #[test]
    fn ap_estimate_grows_with_more_balls(alpha in -1.0f64..1.0, seed in any::<u64>(), n in 2usize..12) {
        let w = WeightSpec::power(2, alpha).unwrap();
        let q = QuadratureConfig::default().with_seed(seed).with_samples(256);
        let a = estimate_ap_constant(&w, 2.0, &q, &family(2, n)).unwrap().value;
        let b = estimate_ap_constant(&w, 2.0, &q, &family(2, 2 * n)).unwrap().value;
        prop_assert!(b >= a);
    }
}
