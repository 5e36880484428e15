use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use vnpaas_core::sim::{Engine, SimTime};

fn schedule_and_dispatch(n: u64) -> usize {
    let mut engine = Engine::new();
    for i in 0..n {
        engine
            .schedule_at(SimTime::from_micros(i * 7 % 1_000_000), "e", "", |_| {})
            .unwrap();
    }
    engine.run_to_completion()
}

fn cascading_events(n: u64) -> usize {
    // Each handler schedules the next; exercises the handler-reentry path.
    fn chain(engine: &mut Engine, remaining: u64) {
        if remaining == 0 {
            return;
        }
        engine.schedule_in(
            vnpaas_core::sim::SimSpan::from_micros(13),
            "hop",
            "",
            move |engine| chain(engine, remaining - 1),
        );
    }
    let mut engine = Engine::new();
    chain(&mut engine, n);
    engine.run_to_completion()
}

fn bench_engine(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    group.throughput(Throughput::Elements(100_000));
    group.bench_function("dispatch_100k_preloaded", |b| {
        b.iter(|| schedule_and_dispatch(100_000))
    });
    group.throughput(Throughput::Elements(50_000));
    group.bench_function("dispatch_50k_cascading", |b| b.iter(|| cascading_events(50_000)));
    group.finish();
}

criterion_group!(benches, bench_engine);
criterion_main!(benches);
