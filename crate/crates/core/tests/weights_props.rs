use limlab::weights::{annulus_mass, annulus_mass_mc, box_mass, box_mass_mc, dual_mass, mass, region_mass};
use limlab::{AxisBox, Cube, DyadicAnnulus, QuadratureConfig, Region, WeightSpec};
use proptest::prelude::*;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn children_sum(spec: &WeightSpec, cube: &Cube, quad: &QuadratureConfig) -> (f64, f64) {
    let kids = cube.to_box().children();
    let parts: Vec<_> = kids.iter().map(|b| box_mass(spec, b, quad)).collect();
    let value = parts.iter().map(|m| m.value).sum();
    let var: f64 = parts.iter().map(|m| m.std_error.powi(2)).sum();
    (value, var)
}

#[test]
fn corridor_example_value() {
    let w = WeightSpec::corridor(2, 1.0, 0.5).unwrap();
    let v = limlab::weights::eval_weight(&w, &[0.0, 3.0]).unwrap();
    assert!((v - 0.176777).abs() < 1e-6);
}

#[test]
fn mass_is_independent_of_thread_count() {
    let w = WeightSpec::power(3, -1.5).unwrap();
    let quad = QuadratureConfig::default().with_seed(11);
    let a = DyadicAnnulus::centered(vec![0.3, -0.2, 5.0], 2);
    let one = in_pool(1, || annulus_mass_mc(&w, &a, &quad));
    let many = in_pool(4, || annulus_mass_mc(&w, &a, &quad));
    assert_eq!(one, many);
    let b = Cube::new(vec![1.0, 2.0, 3.0], 2.0).unwrap().to_box();
    let h = WeightSpec::half_line_power(3, 0.4).unwrap();
    assert_eq!(in_pool(1, || box_mass_mc(&h, &b, &quad)), in_pool(3, || box_mass_mc(&h, &b, &quad)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_scaling_is_exact(lambda in 1e-3f64..1e3, edge in 1e-2f64..1e2, d in 1usize..5, x in -50.0f64..50.0) {
        let w = WeightSpec::constant(d, lambda).unwrap();
        let q = Cube::new(vec![x; d], edge).unwrap();
        let m = region_mass(&w, &q, &QuadratureConfig::default());
        prop_assert!(m.is_closed_form());
        prop_assert!((m.value - lambda * edge.powi(d as i32)).abs() <= 1e-14 * m.value);
        prop_assert_eq!(m.std_error, 0.0);
    }

    #[test]
    fn closed_form_additivity(alpha in 0.05f64..0.95, z in 0.0f64..20.0, edge in 0.2f64..8.0) {
        let w = WeightSpec::half_line_power(3, alpha).unwrap();
        let q = Cube::new(vec![0.5, -0.5, z], edge).unwrap();
        let quad = QuadratureConfig::default();
        let whole = region_mass(&w, &q, &quad);
        prop_assert!(whole.is_closed_form());
        let (sum, _) = children_sum(&w, &q, &quad);
        prop_assert!((whole.value - sum).abs() <= 1e-12 * whole.value);
    }

    #[test]
    fn mc_additivity(alpha in -2.0f64..2.0, cx in -4.0f64..4.0, edge in 0.5f64..4.0, seed in any::<u64>()) {
        let w = WeightSpec::power(3, alpha).unwrap();
        let q = Cube::new(vec![cx, 1.0, 2.0], edge).unwrap();
        let quad = QuadratureConfig::default().with_seed(seed);
        let whole = region_mass(&w, &q, &quad);
        let (sum, var) = children_sum(&w, &q, &quad);
        let sigma = (whole.std_error.powi(2) + var).sqrt();
        prop_assert!((whole.value - sum).abs() <= 4.0 * sigma + 1e-12, "{} vs {} σ {}", whole.value, sum, sigma);
    }

    #[test]
    fn dual_mass_inverts_mass(p in 1.1f64..5.0, alpha in -2.5f64..3.0, i in -5i32..10) {
        let w = WeightSpec::power(3, alpha).unwrap();
        let r = Region::from(DyadicAnnulus::at_origin(3, i));
        let quad = QuadratureConfig::default();
        let m = mass(&w, &r, &quad);
        prop_assert!(m.is_closed_form());
        let dual = dual_mass(&w, &r, p, &quad).unwrap();
        prop_assert!((dual.value * m.value.powf(1.0 / (p - 1.0)) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn mc_additivity_holds_at_three_sigma_in_most_trials() {
    let quad = QuadratureConfig::default();
    let trials = 300;
    let mut hits = 0;
    for k in 0..trials {
        let w = WeightSpec::power(3, -2.0 + 4.0 * (k as f64 / trials as f64)).unwrap();
        let q = Cube::new(vec![(k % 9) as f64 - 4.0, 1.0, 2.0], 0.5 + (k % 4) as f64).unwrap();
        let quad = quad.clone().with_seed(k);
        let whole = region_mass(&w, &q, &quad);
        let (sum, var) = children_sum(&w, &q, &quad);
        let sigma = (whole.std_error.powi(2) + var).sqrt();
        hits += usize::from((whole.value - sum).abs() <= 3.0 * sigma + 1e-12);
    }
    assert!(hits as f64 >= 0.99 * trials as f64, "{hits}/{trials}");
}

#[test]
fn mc_agrees_with_closed_form_in_most_trials() {
    let w = WeightSpec::power(2, -0.7).unwrap();
    let h = WeightSpec::half_line_power(2, 0.5).unwrap();
    let mut hits = 0;
    let trials = 400;
    for k in 0..trials {
        let quad = QuadratureConfig::default().with_seed(1000 + k).with_samples(512);
        let ok = if k % 2 == 0 {
            let a = DyadicAnnulus::at_origin(2, (k % 5) as i32 - 2);
            let exact = annulus_mass(&w, &a, &quad);
            let mc = annulus_mass_mc(&w, &a, &quad);
            mc.agrees_with(exact.value, 3.0)
        } else {
            let b = AxisBox::new(vec![-1.0, k as f64 % 3.0], vec![1.5, k as f64 % 3.0 + 2.0]).unwrap();
            let exact = box_mass(&h, &b, &quad);
            box_mass_mc(&h, &b, &quad).agrees_with(exact.value, 3.0)
        };
        hits += usize::from(ok);
    }
    assert!(hits as f64 >= 0.98 * trials as f64, "{hits}/{trials}");
}
