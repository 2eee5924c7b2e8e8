use std::hint::black_box;

use cas_srfe::ode::HarmonicModel;
use cas_srfe::targets::TARGET_ODE_OPTIONS;
use cas_srfe::{
    gram_matrix, htp, integrate_ode, mh_sample, omp, FeatureSet, HtpParams, Measure, MhConfig, OrthonormalBasis,
    Truncation,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn features(d: usize, n: usize, seed: u64) -> (Measure, FeatureSet) {
    let m = Measure::isotropic_gaussian(d, 1.0).unwrap();
    let f = FeatureSet::generate(&m, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (m, f)
}

fn basis_construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("basis");
    for s in [25usize, 100, 250] {
        let (m, f) = features(1, s, 1);
        g.bench_with_input(BenchmarkId::new("gram", s), &s, |b, _| {
            b.iter(|| gram_matrix(&m, black_box(f.frequencies())).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("eigen", s), &s, |b, _| {
            b.iter(|| OrthonormalBasis::from_frequencies(&m, f.frequencies().clone(), Truncation::default()).unwrap())
        });
    }
    g.finish();
}

fn christoffel_eval(c: &mut Criterion) {
    let (m, f) = features(2, 100, 2);
    let basis = OrthonormalBasis::from_frequencies(&m, f.frequencies().clone(), Truncation::default()).unwrap();
    c.bench_function("cs_density/d2_s100", |b| b.iter(|| basis.cs_density(black_box(&[0.3, -0.4])).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let (measure, f) = features(1, 1000, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut g = c.benchmark_group("solvers");
    g.sample_size(10);
    for m in [100usize, 500] {
        let pts = measure.sample_iid(m, &mut rng);
        let values: Vec<f64> = pts.iter().map(|x| x[0].exp()).collect();
        let sys = f.build_system(&pts, &values).unwrap();
        g.bench_with_input(BenchmarkId::new("omp", m), &m, |b, &m| b.iter(|| omp(&sys.a, &sys.b, m / 4).unwrap()));
        g.bench_with_input(BenchmarkId::new("htp", m), &m, |b, &m| {
            b.iter(|| htp(&sys.a, &sys.b, m / 4, &HtpParams::default()).unwrap())
        });
    }
    g.finish();
}

fn sampler(c: &mut Criterion) {
    let (m, f) = features(1, 100, 5);
    let basis = OrthonormalBasis::from_frequencies(&m, f.frequencies().clone(), Truncation::default()).unwrap();
    let cfg = MhConfig::new(5.0, 2000, 5, vec![0.0]);
    let mut g = c.benchmark_group("mh");
    g.sample_size(10);
    g.bench_function("cs_density_1000_kept", |b| {
        b.iter(|| {
            mh_sample(|x: &[f64]| basis.cs_density(x).unwrap(), &cfg, 1000, &mut ChaCha8Rng::seed_from_u64(6)).unwrap()
        })
    });
    g.finish();
}

fn ode(c: &mut Criterion) {
    let p = HarmonicModel::from_xi(&[0.1, 0.04, 0.5, 1.2, 0.9, 0.2]);
    c.bench_function("ode/harmonic_target_tolerances", |b| {
        b.iter(|| integrate_ode(black_box(&p), &TARGET_ODE_OPTIONS).unwrap())
    });
}

criterion_group!(benches, basis_construction, christoffel_eval, solvers, sampler, ode);
criterion_main!(benches);
