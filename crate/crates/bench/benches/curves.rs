use criterion::{criterion_group, criterion_main, Criterion};
use hsb_bench::fixtures;
use hsb_core::geodesy::{exp_jacobian, integrate_geodesic, transport_operator};
use hsb_core::variational::{index_form, CurveGeometry, TrigPolynomialField};
use hsb_core::Flavor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn curves(c: &mut Criterion) {
    for f in fixtures() {
        let mut group = c.benchmark_group(f.spec);
        group.sample_size(10);
        group.bench_function("geodesic_400", |b| {
            b.iter(|| integrate_geodesic(&f.model, black_box(&f.point), &f.direction, 0.3, 400).unwrap())
        });
        let curve = integrate_geodesic(&f.model, &f.point, &f.direction, 0.3, 400).unwrap();
        group.bench_function("transport_sb", |b| {
            b.iter(|| transport_operator(Flavor::StromingerBismut, &f.model, black_box(&curve)).unwrap())
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = 2 * f.model.n();
        let v = TrigPolynomialField::random(&mut rng, m, 2, 0.3, false).along(&curve);
        let w = TrigPolynomialField::random(&mut rng, m, 2, 0.3, false).along(&curve);
        group.bench_function("index_form", |b| {
            b.iter(|| {
                let geom = CurveGeometry::new(&f.model, black_box(&curve)).unwrap();
                index_form(&geom, &v, &w).unwrap()
            })
        });
        group.bench_function("exp_jacobian_0.3", |b| {
            b.iter(|| exp_jacobian(&f.model, black_box(&f.point), 0.3, &f.direction).unwrap())
        });
        group.finish();
    }
}

criterion_group!(benches, curves);
criterion_main!(benches);
