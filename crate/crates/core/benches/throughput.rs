use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use waitdim_core::estimators::{inequality_study, InequalityParams};
use waitdim_core::hitting::{batch_hitting, HitMode, RadiusSchedule};
use waitdim_core::orbit::generate_orbit;
use waitdim_core::systems::sample_measure;
use waitdim_core::{ContinuedFraction, Exec, Fixed, Point, SystemSpec};

fn execs() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn batch(c: &mut Criterion) {
    let sys = SystemSpec::rotation(ContinuedFraction::golden().angle().unwrap());
    let orb = generate_orbit(&sys, &Point::Circle(Fixed::ZERO), 0, 200_000).unwrap();
    let targets = sample_measure(&sys, 512, 1).unwrap();
    let sched = RadiusSchedule::new(4, 16).unwrap();
    let mut g = c.benchmark_group("batch_hitting");
    g.sample_size(10);
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| batch_hitting(&orb.points, &targets, &sched, HitMode::Dynamical, exec))
        });
    }
    g.finish();
}

fn study(c: &mut Criterion) {
    let sys = SystemSpec::doubling();
    let mut g = c.benchmark_group("inequality_study");
    g.sample_size(10);
    for (name, exec) in execs() {
        let params = InequalityParams {
            n_sources: 16,
            n_targets: 16,
            schedule: RadiusSchedule::new(4, 14).unwrap(),
            orbit_len: 100_000,
            burn_in: 0,
            tolerance: 0.15,
            tail_fraction: 0.5,
            seed: 3,
            extra_sources: Vec::new(),
            extra_targets: Vec::new(),
            exec,
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &params, |b, p| {
            b.iter(|| inequality_study(&sys, p).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, batch, study);
criterion_main!(benches);
