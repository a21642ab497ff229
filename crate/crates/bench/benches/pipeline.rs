use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lusin_bench::{random_operator, range_field};
use lusin_core::algebra::lifted_map;
use lusin_core::construct::{realize, RealizeOptions};
use lusin_core::io::ledger_to_csv;
use lusin_core::verify::{distributional_check, make_test_suite};
use lusin_core::{Grid, OperatorSpec};
use std::hint::black_box;

fn lift(c: &mut Criterion) {
    let mut group = c.benchmark_group("lifted_map");
    for (n, e, f) in [(2, 2, 3), (3, 3, 6), (4, 4, 10)] {
        let op = random_operator(7, n, e, f);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("N{n}_E{e}_F{f}")),
            &op,
            |b, op| b.iter(|| lifted_map(black_box(op)).unwrap()),
        );
    }
    group.finish();
}

fn construct(c: &mut Criterion) {
    let mut group = c.benchmark_group("realize");
    for (n, r) in [(2, 8), (2, 32), (3, 8)] {
        let op = OperatorSpec::gradient(n, 2).unwrap();
        let grid = Grid::new(n, r).unwrap();
        let field = range_field(&op, &grid, 3);
        group.bench_function(format!("gradient_N{n}_r{r}"), |b| {
            b.iter(|| realize(&op, black_box(&field), grid, RealizeOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn verify(c: &mut Criterion) {
    let mut group = c.benchmark_group("distributional_check");
    group.sample_size(10);
    let op = OperatorSpec::gradient(2, 2).unwrap();
    let grid = Grid::new(2, 8).unwrap();
    let r = realize(
        &op,
        &range_field(&op, &grid, 4),
        grid,
        RealizeOptions::default(),
    )
    .unwrap();
    let suite = make_test_suite(2, 0, 4, op.dim_f());
    for quad in [3, 5] {
        group.bench_with_input(
            BenchmarkId::new("gradient_N2_r8", quad),
            &quad,
            |b, &quad| {
                b.iter(|| {
                    distributional_check(&r.u, &op, &r.decomposition, black_box(&suite), quad)
                        .unwrap()
                })
            },
        );
    }
    group.finish();
}

fn ledger(c: &mut Criterion) {
    let op = random_operator(5, 3, 2, 4);
    let grid = Grid::new(3, 6).unwrap();
    let r = realize(
        &op,
        &range_field(&op, &grid, 6),
        grid,
        RealizeOptions::default(),
    )
    .unwrap();
    c.bench_function("ledger_to_csv_N3_r6", |b| {
        b.iter(|| ledger_to_csv(black_box(&r.decomposition), op.dim_e()).unwrap())
    });
}

criterion_group!(benches, lift, construct, verify, ledger);
criterion_main!(benches);
