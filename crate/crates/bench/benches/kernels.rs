use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hypoflow::analysis::SpectralPencil;
use hypoflow::functional::{eval_sample, HypoParams};
use hypoflow::solver::{make_initial, Stepper};
use hypoflow::weights::WeightSet;
use hypoflow::{Grid, InitialData, ShearProfile};

fn setup(n: usize, nu: f64) -> (Grid, ShearProfile, hypoflow::ScalarField) {
    let grid = Grid::new(n).unwrap();
    let profile = ShearProfile::from_spec("sine").unwrap();
    let data = InitialData::RandomBand { seed: 9, m_max: 8 };
    let field = make_initial(&data, &grid, &profile, nu).unwrap();
    (grid, profile, field)
}

fn bench_step(c: &mut Criterion) {
    let nu = 1e-3;
    for n in [256usize, 1024] {
        let (grid, profile, field) = setup(n, nu);
        let stepper = Stepper::new(&grid, &profile, nu, 0.05).unwrap();
        c.bench_function(&format!("strang_step_n{n}"), |b| {
            b.iter_batched(
                || field.clone(),
                |mut f| {
                    stepper.step(&mut f).unwrap();
                    black_box(f)
                },
                criterion::BatchSize::SmallInput,
            )
        });
    }
}

fn bench_eval_sample(c: &mut Criterion) {
    let nu = 1e-3;
    let (grid, profile, mut field) = setup(512, nu);
    field.t = 8.0;
    let params = HypoParams::from_beta(0.25).unwrap();
    c.bench_function("eval_sample_n512", |b| {
        b.iter(|| black_box(eval_sample(&grid, &profile, &params, nu, &field).unwrap()))
    });
}

fn bench_weight_set(c: &mut Criterion) {
    let grid = Grid::new(1024).unwrap();
    let profile = ShearProfile::from_spec("sine").unwrap();
    c.bench_function("weight_set_n1024", |b| {
        b.iter(|| black_box(WeightSet::new(&grid, &profile, 1e-4, 0.5, 40.0).unwrap()))
    });
}

fn bench_pencil(c: &mut Criterion) {
    let grid = Grid::new(128).unwrap();
    let profile = ShearProfile::from_spec("sine").unwrap();
    let pencil = SpectralPencil::new(&grid, &profile, 1e-2, 1.0, 10.0).unwrap();
    c.bench_function("pencil_lambda_min_n128", |b| {
        b.iter(|| black_box(pencil.lambda_min(black_box(1.0))))
    });
}

criterion_group!(kernels, bench_step, bench_eval_sample, bench_weight_set, bench_pencil);
criterion_main!(kernels);
