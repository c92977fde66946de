use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diffggm::ggm::{nodewise, Method, NodewiseConfig};
use diffggm::simulate::{generate_ggm_pair, sample_dataset};

fn pools(c: &mut Criterion) {
    let pair = generate_ggm_pair(20, 0.19, 0.03, 1).unwrap();
    let (x1, x2) = sample_dataset(&pair, 400, 60, 2).unwrap();
    let cfg = NodewiseConfig::default();
    let sequential = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();

    let mut group = c.benchmark_group("nodewise");
    group.sample_size(10);
    for method in [Method::DebiasedLasso, Method::DebiasedFused] {
        for (label, pool) in [("1-thread", &sequential), ("default-pool", &default)] {
            group.bench_with_input(BenchmarkId::new(method.tag(), label), &method, |b, &m| {
                b.iter(|| pool.install(|| nodewise(&x1, &x2, m, &cfg).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, pools);
criterion_main!(benches);
