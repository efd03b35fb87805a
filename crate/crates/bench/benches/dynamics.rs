use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use gridgame::ceg::run_controller_thm2;
use gridgame::oracle::{build_support_graph, certify_as_convergence};
use gridgame::{ImitationRule, RngStream, TorusDims};
use gridgame_bench::{fixture, snowdrift};

fn step(c: &mut Criterion) {
    let m = snowdrift("0.74");
    let mut group = c.benchmark_group("seg_step");
    for n in [10, 32, 100] {
        let (engine, state) = fixture(n, &m, 1);
        let mut rng = RngStream::new(2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &state, |b, s| b.iter(|| engine.step(black_box(s), &mut rng)));
    }
    group.finish();
}

fn run(c: &mut Criterion) {
    let m = snowdrift("0.74");
    let (engine, state) = fixture(10, &m, 1);
    c.bench_function("seg_run_10x10_10k", |b| {
        b.iter(|| engine.run_quiet(state.clone(), &mut RngStream::new(3), 10_000))
    });
    let m = snowdrift("0.76");
    let (_, state) = fixture(10, &m, 4);
    c.bench_function("snowdrift_controller_10x10", |b| b.iter(|| run_controller_thm2(black_box(&state), &m).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let m = snowdrift("0.76");
    let rule = ImitationRule::deterministic(&m);
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for (n, k) in [(3, 3), (3, 4), (4, 4)] {
        let dims = TorusDims::new(n, k).unwrap();
        group.bench_function(format!("build_certify_{n}x{k}"), |b| {
            b.iter(|| certify_as_convergence(&build_support_graph(dims, &m, &rule, None).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, step, run, oracle);
criterion_main!(benches);
