use std::rc::Rc;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use vnpaas_core::diameter::{Application, Command, DiameterMessage};
use vnpaas_core::hss::{FrontEnd, FrontEndConfig, ServiceTimeTable, Udr};
use vnpaas_core::sim::{Engine, RngStream, SimSpan, SimTime};

/// One saturated front end chewing through a Poisson stream.
fn frontend_run(messages: u64) -> u64 {
    let mut engine = Engine::new();
    let fe = FrontEnd::new(
        "bench-fe",
        [Application::Cx],
        Rc::new(ServiceTimeTable::default()),
        Udr::new(16),
        FrontEndConfig::default(),
    );
    let mut stream = RngStream::new(5, "bench-arrivals");
    let mut at = SimTime::ZERO;
    for id in 0..messages {
        at = at + SimSpan::from_millis_f64(stream.exponential(3.4).unwrap());
        let fe = fe.clone();
        engine
            .schedule_at(at, "arrival", "", move |engine| {
                fe.enqueue(engine, DiameterMessage::new(id, Command::Uar, engine.now()));
            })
            .unwrap();
    }
    engine.run_to_completion();
    fe.completions()
}

fn bench_queueing(c: &mut Criterion) {
    let mut group = c.benchmark_group("queueing");
    group.throughput(Throughput::Elements(50_000));
    group.bench_function("frontend_50k_messages", |b| b.iter(|| frontend_run(50_000)));
    group.finish();
}

criterion_group!(benches, bench_queueing);
criterion_main!(benches);
