use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trackhhl_bench::{event, system, vertex_event};
use trackhhl_core::hhl::run;
use trackhhl_core::pipeline::segment_projections;
use trackhhl_core::pv::{cluster_z, VertexSource, DEFAULT_EPS, DEFAULT_MIN_SAMPLES};
use trackhhl_core::quantum::{exact_evolution, trotter_evolution, TrotterSplit};
use trackhhl_core::{reconstruct, HhlConfig, Method, ReconstructConfig};

fn classical(c: &mut Criterion) {
    let mut g = c.benchmark_group("classical");
    for (layers, particles) in [(3, 4), (5, 10), (8, 20)] {
        let ev = event(layers, particles);
        let cfg = ReconstructConfig::new(Method::Classical);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{layers}x{particles}")), &ev, |b, ev| {
            b.iter(|| reconstruct(black_box(ev), &cfg).unwrap())
        });
    }
    g.finish();
}

fn hhl(c: &mut Criterion) {
    let mut g = c.benchmark_group("hhl");
    g.sample_size(10);
    for (layers, particles) in [(3, 2), (3, 4), (4, 3)] {
        let sys = system(&event(layers, particles));
        let label = format!("{layers}x{particles}");
        g.bench_function(BenchmarkId::new("one_bit", &label), |b| b.iter(|| run(black_box(&sys), &HhlConfig::one_bit()).unwrap()));
        g.bench_function(BenchmarkId::new("full_c5", &label), |b| b.iter(|| run(black_box(&sys), &HhlConfig::full(5)).unwrap()));
    }
    g.finish();
}

fn evolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("evolution");
    let sys = system(&event(4, 4));
    let (a, _) = sys.padded(sys.n.next_power_of_two());
    g.bench_function("exact", |b| b.iter(|| exact_evolution(black_box(&a), 1.0).unwrap()));
    g.bench_function("trotter_diag_offdiag", |b| {
        b.iter(|| trotter_evolution(black_box(&a), 1.0, 4, TrotterSplit::DiagOffdiag).unwrap())
    });
    g.finish();
}

fn vertices(c: &mut Criterion) {
    let ev = vertex_event(30);
    let r = reconstruct(&ev, &ReconstructConfig::new(Method::Classical)).unwrap().result;
    let proj = segment_projections(&r, &ev).unwrap();
    c.bench_function("dbscan_segments", |b| {
        b.iter(|| cluster_z(black_box(&proj), DEFAULT_EPS, DEFAULT_MIN_SAMPLES, VertexSource::Segments).unwrap())
    });
}

criterion_group!(benches, classical, hhl, evolution, vertices);
criterion_main!(benches);
