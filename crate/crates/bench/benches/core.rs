use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use tiltstab_bench::fixture;
use tiltstab_core::analysis::{analyze, AnalysisConfig};
use tiltstab_core::expr::{hessian, parse_expr};
use tiltstab_core::linalg::{sym_eigs, Mat};
use tiltstab_core::oracle::{solve_tilted, OracleConfig};
use tiltstab_core::polyhedra::{enumerate_vertices_rays, simplex, StdPolyhedron};
use tiltstab_core::stability::{build_delta, estimate_mscq, StationaryPoint};

fn lp_instance() -> (Mat, Vec<f64>, Vec<f64>) {
    let a = Mat::from_rows(&[
        vec![1.0, -1.0, 2.0, 0.0, 1.0, 3.0],
        vec![0.0, 2.0, -1.0, 1.0, 1.0, -2.0],
        vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
    ]);
    let b = a.matvec(&[1.0, 0.0, 2.0, 1.0, 0.0, 1.0]);
    let c = vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.0];
    (a, b, c)
}

fn bench_polyhedra(c: &mut Criterion) {
    let (a, b, cost) = lp_instance();
    c.bench_function("simplex_3x6", |bch| {
        bch.iter(|| simplex(black_box(&a), black_box(&b), black_box(&cost)))
    });
    let p = StdPolyhedron::new(a, b).unwrap();
    c.bench_function("enumerate_3x6", |bch| {
        bch.iter(|| enumerate_vertices_rays(black_box(&p)))
    });
}

fn bench_kernels(c: &mut Criterion) {
    let names: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
    let e = parse_expr("(x1*x2 - x3)^3 / (1 + (x1 + x2)^2) + x3^2*x1", &names).unwrap();
    c.bench_function("hessian_3var", |bch| bch.iter(|| hessian(black_box(&e), 3)));
    let h = Mat::from_rows(&[
        vec![4.0, 1.0, -2.0, 0.5],
        vec![1.0, 3.0, 0.0, 1.0],
        vec![-2.0, 0.0, 5.0, 2.0],
        vec![0.5, 1.0, 2.0, 1.0],
    ]);
    c.bench_function("sym_eigs_4x4", |bch| bch.iter(|| sym_eigs(black_box(&h))));
}

fn bench_analysis(c: &mut Criterion) {
    let p = fixture("ex4_11.nlp");
    let sp = StationaryPoint::new(&p).unwrap();
    c.bench_function("build_delta_ex4_11", |bch| {
        bch.iter(|| build_delta(black_box(&sp), 2.0, 500))
    });
    c.bench_function("mscq_ex4_11", |bch| bch.iter(|| estimate_mscq(&p, 0.1, 2000)));
    let axes = fixture("ex3_5.nlp");
    let cfg = OracleConfig::default();
    c.bench_function("solve_tilted_ex3_5", |bch| {
        bch.iter(|| solve_tilted(&axes, black_box(&[0.1, 0.1]), &cfg))
    });
    let twin = fixture("ex4_5.nlp");
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("analyze_ex4_5", |bch| {
        bch.iter(|| analyze(&twin, &AnalysisConfig::default()))
    });
    group.finish();
}

criterion_group!(polyhedra, bench_polyhedra);
criterion_group!(kernels, bench_kernels);
criterion_group!(analysis, bench_analysis);
criterion_main!(polyhedra, kernels, analysis);
