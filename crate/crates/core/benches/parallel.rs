//! Sequential vs rayon timings for the data-parallel kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use helfrich_core::analytic::{ParametricSurface, QuadratureGrid};
use helfrich_core::classify::radius_scan_with;
use helfrich_core::energy::{evaluate_energies_with, EnergyParams, Source};
use helfrich_core::mesh::{make_primitive, PrimitiveSpec};
use helfrich_core::variation::{el_residual_with, energy_gradient_with, GradientMethod};
use helfrich_core::Execution;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bumpy(level: u32) -> helfrich_core::mesh::TriangleMesh {
    make_primitive(&PrimitiveSpec::PerturbedSphere { radius: 1.0, amplitude: 0.05, level, profile: Default::default() })
        .unwrap()
}

fn fd_gradient(c: &mut Criterion) {
    let mesh = bumpy(3);
    let params = EnergyParams::willmore(1.0, -1.0);
    let mut g = c.benchmark_group("fd_gradient_level3");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| energy_gradient_with(black_box(&mesh), &params, GradientMethod::FiniteDifference, exec).unwrap())
        });
    }
    g.finish();
}

fn residual(c: &mut Criterion) {
    let mesh = bumpy(5);
    let params = EnergyParams::willmore(1.0, -1.0);
    let mut g = c.benchmark_group("residual_level5");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| el_residual_with(Source::Mesh(black_box(&mesh)), &params, exec).unwrap())
        });
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let surface = ParametricSurface::Torus { major: 2.0, minor: 1.0 };
    let grid = QuadratureGrid::new(&surface, 256, 256).unwrap();
    let params = EnergyParams::new(0.7, 1.0, -1.0).unwrap();
    let mut g = c.benchmark_group("torus_energies_256");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_energies_with(Source::Oracle { surface: &surface, grid: &grid }, &params, exec).unwrap())
        });
    }
    g.finish();
}

fn scan(c: &mut Criterion) {
    let params = EnergyParams::willmore(1.0, -1.0);
    let mut g = c.benchmark_group("radius_scan_1e5");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| radius_scan_with(&params, 0.1, 50.0, 100_000, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, fd_gradient, residual, quadrature, scan);
criterion_main!(benches);
