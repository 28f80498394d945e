use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use enpp_core::dynamics::{initial_perturbation, Dynamics};
use enpp_core::elliptic::{EllipticSolver, ProblemKind};
use enpp_core::operators::l_k;
use enpp_core::profiles::Profile;
use enpp_core::{Config, Field};

fn setup() -> (Config, Dynamics) {
    let cfg = Config { nz: 256, ntheta: 64, ..Config::default() };
    let grid = cfg.grid().unwrap();
    let dynamics = Dynamics::new(&grid, &cfg.parameters().unwrap(), cfg.pi_mode, cfg.modulation).unwrap();
    (cfg, dynamics)
}

fn operators(c: &mut Criterion) {
    let (cfg, dynamics) = setup();
    let grid = cfg.grid().unwrap();
    let params = cfg.parameters().unwrap();
    let f = Profile::f_star(&grid, &params).f;

    c.bench_function("l_k 256x64", |b| b.iter(|| l_k(black_box(&f))));

    let stream = EllipticSolver::new(ProblemKind::Stream, &grid, &params).unwrap();
    c.bench_function("stream solve 256x64", |b| b.iter(|| stream.solve(black_box(&f)).unwrap()));

    let charge = Field::from_fn(&grid, |z, t| z * z / (1.0 + z).powi(5) * (2.0 * t).cos());
    let potential = EllipticSolver::new(ProblemKind::Potential, &grid, &params).unwrap();
    c.bench_function("potential solve 256x64", |b| b.iter(|| potential.solve(black_box(&charge)).unwrap()));

    c.bench_function("stream factor 256x64", |b| {
        b.iter(|| EllipticSolver::new(ProblemKind::Stream, black_box(&grid), &params).unwrap())
    });

    let p = initial_perturbation(&cfg, &dynamics).unwrap();
    c.bench_function("rhs 256x64", |b| b.iter(|| dynamics.derivative(black_box(&p)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = operators
}
criterion_main!(benches);
