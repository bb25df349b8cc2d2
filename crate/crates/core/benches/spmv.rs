//! Sequential vs rayon-backed execution of assembly and the EHYB kernel,
//! with the CSR reference kernel as a baseline.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ehyb::pipeline::{build, BuildOptions};
use ehyb::{
    assemble_ehyb_with, build_graph, build_reorder_plan, classify_rows, compute_params, coo_to_csr, partition_graph,
    spmv_csr, spmv_ehyb, synth, DeviceProfile, ExecutionConfig, Parallelism, Scheduling,
};

fn kernels(c: &mut Criterion) {
    let m = synth::laplacian_2d(256, 256);
    let n = m.n_rows();
    let built = build::<f64>(&m, &BuildOptions::default()).unwrap();
    let e = &built.matrix;
    let x = synth::random_vector(n, 1);
    let xr = e.plan.permute_vector(&x).unwrap();
    let csr = coo_to_csr(&m);
    let threads = std::thread::available_parallelism().map_or(4, |t| t.get());

    let mut group = c.benchmark_group("spmv");
    group.throughput(Throughput::Elements(2 * m.nnz() as u64));
    group.bench_function("csr", |b| b.iter(|| spmv_csr(black_box(&csr), black_box(&x)).unwrap()));
    for (label, parallelism, workers) in [
        ("ehyb/sequential", Parallelism::Sequential, 1),
        ("ehyb/parallel", Parallelism::Parallel, threads),
    ] {
        let cfg = ExecutionConfig {
            worker_count: workers,
            scheduling: Scheduling::Stealing,
            record_stats: false,
            parallelism,
        };
        group.bench_function(label, |b| b.iter(|| spmv_ehyb(black_box(e), black_box(&xr), &cfg).unwrap()));
    }
    group.finish();
}

fn assembly(c: &mut Criterion) {
    let m = synth::laplacian_3d(48, 48, 48);
    let profile = DeviceProfile::default();
    let params = compute_params(m.n_rows(), 8, &profile).unwrap();
    let g = build_graph(&m).unwrap();
    let p = partition_graph(&g, params.n_parts, params.vec_cache_size, 0).unwrap();
    let plan = build_reorder_plan(&classify_rows(&m, &p).unwrap(), &params).unwrap();

    let mut group = c.benchmark_group("assemble");
    for parallelism in [Parallelism::Sequential, Parallelism::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{parallelism:?}")), &parallelism, |b, &par| {
            b.iter(|| assemble_ehyb_with::<f64>(&m, &plan, &params, &p, par).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernels, assembly);
criterion_main!(benches);
