use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tensql::kernels::BackendKind;
use tensql_bench::{executor, tpch, Q14, Q6, SCENARIO3};

fn queries(c: &mut Criterion) {
    let (tables, catalog) = tpch(0.01);
    let mut g = c.benchmark_group("queries_sf0.01");
    g.sample_size(20);
    for (name, sql) in [("q6", Q6), ("q14", Q14), ("scenario3", SCENARIO3)] {
        for backend in BackendKind::all() {
            let exec = executor(sql, &catalog, backend);
            g.bench_function(BenchmarkId::new(name, backend.to_string()), |b| {
                b.iter(|| exec.execute(&tables).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, queries);
criterion_main!(benches);
