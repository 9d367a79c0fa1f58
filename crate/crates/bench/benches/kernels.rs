use criterion::{criterion_group, criterion_main, Criterion};
use irstrack::beamopt::{DesignConfig, MseObjectiveCache};
use irstrack::codebook::{quadratic_profile, Codebook};
use irstrack::estimation::{adjacent_codeword_set, build_hypothesis_grid, peak_ml_estimate, CodebookGains, MeasurementSet};
use irstrack::Codeword;
use num_complex::Complex64;
use std::hint::black_box;

fn codebook_construction(c: &mut Criterion) {
    c.bench_function("quadratic codebook Q=40 M=30", |b| b.iter(|| Codebook::quadratic(black_box(40), black_box(30), 0.5, 1.0).unwrap()));
}

fn ml_estimate(c: &mut Criterion) {
    let cb = Codebook::quadratic(40, 30, 0.5, 1.0).unwrap();
    let center = Codeword::new(15, 14);
    let grid = build_hypothesis_grid(center, &cb, 10).unwrap();
    let set = adjacent_codeword_set(center, 1, cb.m_count);
    let truth = cb.main_lobe(center);
    let pilot = vec![Complex64::new(1.0, 0.0); 5];
    let received = set.iter().map(|m| vec![cb.reflection_gain(*m, truth) * 1e-3; 5]).collect();
    let ms = MeasurementSet::new(set.clone(), received, pilot).unwrap();
    let model = CodebookGains { codebook: &cb, codewords: &set };
    c.bench_function("peak ML estimate H=10", |b| b.iter(|| peak_ml_estimate(black_box(&ms), &grid, &model).unwrap()));
}

fn objective_gradient(c: &mut Criterion) {
    let cfg = DesignConfig::new(40, 30, 25.0);
    let shape = quadratic_profile(40, 30, 0.5, 1.0, 0).unwrap();
    let cache = MseObjectiveCache::for_shape(&cfg, &shape).unwrap();
    c.bench_function("design objective and gradient Q=40", |b| b.iter(|| cache.value_and_gradient(black_box(&shape)).unwrap()));
}

criterion_group!(benches, codebook_construction, ml_estimate, objective_gradient);
criterion_main!(benches);
