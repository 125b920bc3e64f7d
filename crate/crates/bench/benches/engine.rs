use std::hint::black_box;

use chorate_bench::{spread_loss, two_scenarios};
use chorate_core::casestudy::{cat_study, reference_fits};
use chorate_core::choquet::{choquet_distortion, Criterion as Measure, DistortionFunction};
use chorate_core::consistency::{check_cc_submodular, GridSpec};
use chorate_core::dist::DiscreteLoss;
use chorate_core::pooling::{pe_curves, CurveSpec, PoolMode, PoolModel, SimConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn integrals(c: &mut Criterion) {
    let d = spread_loss(100_000);
    let h = DistortionFunction::maxvar_power(0.3).unwrap();
    c.bench_function("choquet_distortion 1e5 atoms", |b| b.iter(|| choquet_distortion(black_box(&d), &h)));
    let sl = two_scenarios(50_000);
    let es = Measure::AvgEs { p: 0.9 };
    c.bench_function("avg_es two scenarios 5e4 atoms", |b| b.iter(|| es.value(black_box(&sl)).unwrap()));
}

fn convolution(c: &mut Criterion) {
    let d = DiscreteLoss::new(vec![(0.0, 0.5), (0.25, 0.2), (0.5, 0.2), (1.0, 0.1)]).unwrap();
    c.bench_function("pool_average_exact ell=12", |b| b.iter(|| black_box(&d).pool_average_exact(12).unwrap()));
}

fn checks(c: &mut Criterion) {
    let g = Measure::AvgEs { p: 0.9 }.s_distortion(&[0.5, 0.5]).unwrap().unwrap();
    c.bench_function("check_cc_submodular n=101", |b| {
        b.iter(|| check_cc_submodular(black_box(&g), GridSpec::default()))
    });
}

fn studies(c: &mut Criterion) {
    let mut group = c.benchmark_group("studies");
    group.sample_size(10);
    let crit = Measure::AvgEl;
    let specs = [CurveSpec { measure: &crit, ladder: None }];
    let cfg = SimConfig::with_paths(20_000, 42);
    group.bench_function("clo avg_el ell<=20 2e4 paths", |b| {
        b.iter(|| pe_curves(&specs, &PoolModel::clo(), 20, 0.1, &cfg, PoolMode::Mc).unwrap())
    });
    let fits = reference_fits();
    let cfg = SimConfig::with_paths(100_000, 42);
    group.bench_function("cat study 1e5 paths", |b| b.iter(|| cat_study(&fits, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, integrals, convolution, checks, studies);
criterion_main!(benches);
