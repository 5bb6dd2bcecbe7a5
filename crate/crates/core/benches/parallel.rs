use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use limlab::diagnostics::unit_cube_infimum;
use limlab::limits::{radial_census, Schedule, TraceConfig};
use limlab::rp::rp_terms;
use limlab::witnesses::axis_chain;
use limlab::{QuadratureConfig, WeightSpec};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", one), ("parallel", all)]
}

fn bench(c: &mut Criterion) {
    let quad = QuadratureConfig::default().with_samples(4096);
    let w = WeightSpec::half_line_power(3, 0.5).unwrap();
    let v = WeightSpec::power(3, -0.5).unwrap();
    let chain = axis_chain(3, 40).unwrap();
    let schedule = Schedule::default();
    let cfg = TraceConfig::default();

    let mut g = c.benchmark_group("core");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("rp_terms", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| rp_terms(&w, 2.0, (0, 40), &quad).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("radial_census", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| radial_census(&chain, 256, &schedule, 1, &cfg).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("unit_cube_infimum", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| unit_cube_infimum(&v, 64.0, 0.5, &quad).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
