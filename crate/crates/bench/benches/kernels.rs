use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use stable_ddsde::besov::{besov_norm, build_partition, Exponent};
use stable_ddsde::euler::{kde_estimate, Bandwidth, ParticleEnsemble};
use stable_ddsde::fokker_planck::{nfp_solve, SolverOptions};
use stable_ddsde::rng::StreamDomain;
use stable_ddsde::stable::fill_increment;
use stable_ddsde::{GridFunction, RngStream, TorusGrid};
use stable_ddsde_bench::{grid, initial, params, product_drift, table, ALPHA};

fn sampler(c: &mut Criterion) {
    let p = params();
    let mut g = c.benchmark_group("sampler");
    g.throughput(Throughput::Elements(10_000));
    g.bench_function("increments_1e4", |b| {
        let mut rng = RngStream::new(1, 0);
        let mut x = [0.0];
        b.iter(|| {
            let mut acc = 0.0;
            for _ in 0..10_000 {
                fill_increment(0.01, &p, &mut rng, &mut x).unwrap();
                acc += x[0];
            }
            black_box(acc)
        })
    });
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let t = table();
    let xs: Vec<f64> = (0..4096).map(|i| -40.0 + 80.0 * i as f64 / 4096.0).collect();
    let mut g = c.benchmark_group("kernel");
    g.throughput(Throughput::Elements(xs.len() as u64));
    for time in [0.01, 1.0] {
        g.bench_with_input(BenchmarkId::new("density_radial", time), &time, |b, &time| {
            b.iter(|| xs.iter().map(|x| t.density_radial(time, x.abs())).sum::<f64>())
        });
    }
    g.finish();
}

fn kde(c: &mut Criterion) {
    let grid = grid();
    let mut g = c.benchmark_group("kde");
    g.sample_size(20);
    for n in [10_000usize, 100_000] {
        let positions: Vec<f64> = (0..n).map(|i| ((i as f64 * 0.618_034).fract() - 0.5) * 6.0).collect();
        let ens = ParticleEnsemble::from_positions(1, positions, 3, StreamDomain::Generic);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("silverman", n), &ens, |b, ens| {
            b.iter(|| kde_estimate(ens, &grid, Bandwidth::Silverman).unwrap())
        });
    }
    g.finish();
}

fn fokker_planck(c: &mut Criterion) {
    let grid = grid();
    let drift = product_drift();
    let rho0 = initial();
    let mut g = c.benchmark_group("fokker_planck");
    g.sample_size(10);
    g.bench_function("nfp_solve_16_steps", |b| {
        b.iter(|| nfp_solve(&rho0, &drift, ALPHA, 0.25, 16, &grid, &SolverOptions::default()).unwrap())
    });
    g.finish();
}

fn besov(c: &mut Criterion) {
    let grid = TorusGrid::new(16.0 * std::f64::consts::PI, 8192, 1).unwrap();
    let part = build_partition(&grid, 8).unwrap();
    let f = GridFunction::from_fn(part.grid(), |x| (0.7 * x[0]).sin().abs().powf(0.6));
    c.bench_function("besov_norm_inf_inf", |b| {
        b.iter(|| besov_norm(&f, 0.6, Exponent::Infinity, Exponent::Infinity, &part).unwrap().total)
    });
}

criterion_group!(benches, sampler, kernel, kde, fokker_planck, besov);
criterion_main!(benches);
