use criterion::{criterion_group, criterion_main, Criterion};
use spraylab::catalog::{named_spray, params};
use spraylab::completeness::{self, ReparamStrategy};
use spraylab::diffops::riemann_curvature;
use spraylab::geodesics::{integrate, probe_maximal_interval};
use spraylab::pathspace::{self, PathFamily};
use spraylab::{IntegratorSettings, Params, TangentState};
use std::hint::black_box;

fn state() -> TangentState {
    TangentState::new(vec![0.2, 0.3], vec![0.6, -0.8]).unwrap()
}

fn evaluation(c: &mut Criterion) {
    let h = named_spray("hyperbolic_ball", &Params::new()).unwrap();
    let semi = pathspace::construct_spray(&PathFamily::semicircles().unwrap()).unwrap();
    let s = state();
    let up = TangentState::new(vec![0.2, 0.7], vec![0.6, -0.8]).unwrap();
    c.bench_function("eval/hyperbolic_ball", |b| {
        b.iter(|| h.eval(black_box(&s)).unwrap())
    });
    c.bench_function("eval/pathspace_semicircles", |b| {
        b.iter(|| semi.eval(black_box(&up)).unwrap())
    });
    c.bench_function("curvature/hyperbolic_ball", |b| {
        b.iter(|| riemann_curvature(&h, black_box(&s)).unwrap())
    });
}

fn geodesics(c: &mut Criterion) {
    let funk = named_spray("funk_scaled", &params(&[("c", 0.5)])).unwrap();
    let s = state();
    let settings = IntegratorSettings::default();
    c.bench_function("integrate/funk_half_t1", |b| {
        b.iter(|| integrate(&funk, black_box(&s), 1.0, &settings).unwrap())
    });
    c.bench_function("probe/funk_half", |b| {
        b.iter(|| probe_maximal_interval(&funk, black_box(&s), &Default::default()).unwrap())
    });
}

fn completion(c: &mut Criterion) {
    let flat = named_spray("flat_ball", &Params::new()).unwrap();
    let s = state();
    c.bench_function("completion_factor/flat_ball_ln_two_sided", |b| {
        b.iter(|| {
            completeness::completion_factor(
                &flat,
                black_box(&s),
                ReparamStrategy::LnTwoSided,
                &Default::default(),
            )
            .unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = evaluation, geodesics, completion
}
criterion_main!(benches);
