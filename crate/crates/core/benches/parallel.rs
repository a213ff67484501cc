use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use laplace_core::expr::parse;
use laplace_core::proofmirror::proof_trace;
use laplace_core::quadrature::{adaptive_quad_with, ratio_table, QuadOptions};
use laplace_core::{Exec, ProblemOptions, ProblemSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn stirling(exec: Exec) -> ProblemSpec {
    let options = ProblemOptions { exec, ..ProblemOptions::default() };
    ProblemSpec::with_options(parse("1").unwrap(), parse("log(x)-x").unwrap(), 0.0, f64::INFINITY, options)
        .unwrap()
}

fn bench_ratio_table(c: &mut Criterion) {
    let ns: Vec<u64> = (1..=16).map(|k| 2u64.pow(k)).collect();
    let mut g = c.benchmark_group("ratio_table");
    for (name, exec) in MODES {
        let ps = stirling(exec);
        let cp = ps.critical_point().unwrap();
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ratio_table(&ps, &cp, black_box(&ns)).unwrap())
        });
    }
    g.finish();
}

fn bench_proof_trace(c: &mut Criterion) {
    let mut g = c.benchmark_group("proof_trace");
    g.sample_size(20);
    for (name, exec) in MODES {
        let ps = stirling(exec);
        let cp = ps.critical_point().unwrap();
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| proof_trace(&ps, &cp, black_box(1_000_000)).unwrap())
        });
    }
    g.finish();
}

fn bench_quad(c: &mut Criterion) {
    // Oscillatory enough to force a deep panel tree.
    let f = |x: f64| (x * x).sin() * (-0.01 * x * x).exp();
    let mut g = c.benchmark_group("adaptive_quad");
    for (name, exec) in MODES {
        let opts = QuadOptions { rel_tol: 1e-12, exec, ..QuadOptions::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| adaptive_quad_with(f, black_box(-40.0), 40.0, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_ratio_table, bench_proof_trace, bench_quad);
criterion_main!(benches);
