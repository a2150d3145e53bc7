use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use tensql::kernels::{Anchor, BackendKind, CmpOp, Operand, ReduceOp, Side};
use tensql::store::encode_string_column;
use tensql::Tensor;
use tensql_bench::{random_f64, random_i64};

const N: usize = 1_000_000;

fn kernels(c: &mut Criterion) {
    let keys = random_i64(N, 1000, 1);
    let values = random_f64(N, 2);
    let mask = tensql::kernels::BackendKind::Reference
        .create()
        .compare(&keys, Operand::Broadcast(&Tensor::from_i64(vec![500])), CmpOp::Lt)
        .unwrap();
    let sorted = {
        let mut v = keys.as_i64().unwrap().to_vec();
        v.sort_unstable();
        Tensor::from_i64(v)
    };
    let segments = Tensor::from_i64(sorted.as_i64().unwrap().iter().map(|k| k / 10).collect());
    let a = random_f64(N / 100 * 8, 3);
    let a = Tensor::new(a.as_f64().unwrap().to_vec(), N / 100, 8).unwrap();
    let b = Tensor::new(random_f64(8 * 16, 4).as_f64().unwrap().to_vec(), 8, 16).unwrap();
    let words = ["PROMO BRUSHED TIN", "STANDARD POLISHED STEEL", "SMALL PLATED COPPER", "LARGE ANODIZED NICKEL"];
    let strings: Vec<&str> = (0..N / 10).map(|i| words[i % words.len()]).collect();
    let chars = encode_string_column("s", &strings).unwrap().tensor;

    let mut g = c.benchmark_group("kernels");
    g.throughput(Throughput::Elements(N as u64));
    g.sample_size(20);
    for backend in BackendKind::all() {
        let k = backend.create();
        let name = backend.to_string();
        g.bench_with_input(BenchmarkId::new("compare", &name), &k, |bch, k| {
            bch.iter(|| k.compare(&values, Operand::Tensor(&values), CmpOp::Le).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("compact", &name), &k, |bch, k| {
            bch.iter(|| k.compact(&values, &mask).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("argsort_stable", &name), &k, |bch, k| {
            bch.iter(|| k.argsort_stable(&keys).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("searchsorted", &name), &k, |bch, k| {
            bch.iter(|| k.searchsorted(&sorted, &keys, Side::Left).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("segmented_reduce_sum", &name), &k, |bch, k| {
            bch.iter(|| k.segmented_reduce(&values, &segments, 100, ReduceOp::Sum).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("matmul_10k_x8_x16", &name), &k, |bch, k| {
            bch.iter(|| k.matmul(&a, &b).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("substring_match_100k", &name), &k, |bch, k| {
            bch.iter(|| k.substring_match(black_box(&chars), b"PROMO", Anchor::Start).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
