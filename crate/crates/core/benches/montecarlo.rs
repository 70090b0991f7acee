//! Sequential against parallel execution of the sampling harnesses.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stein_core::dist::{build_distribution, DistSpec, Family};
use stein_core::montecarlo::{simulate_hoeffding, sum_size_bias_coupling, HoeffdingConfig, SumCouplingConfig};
use stein_core::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn hoeffding(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let matrix: Vec<Vec<f64>> = (0..20).map(|_| (0..20).map(|_| rng.random::<f64>()).collect()).collect();
    let mut group = c.benchmark_group("hoeffding_n20");
    group.sample_size(10);
    for n_samples in [10_000usize, 100_000] {
        let cfg = HoeffdingConfig {
            matrix: matrix.clone(),
            n_samples,
            seed: 7,
            t_grid: None,
            lipschitz: None,
        };
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n_samples), &cfg, |b, cfg| {
                b.iter(|| simulate_hoeffding(cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn coupling(c: &mut Criterion) {
    let components = [1.0, 2.0, 3.0]
        .iter()
        .map(|&l| build_distribution(&DistSpec::family(Family::Poisson, &[("lambda", l)])).unwrap())
        .collect();
    let cfg = SumCouplingConfig {
        components,
        shifts: Some(vec![1.0; 3]),
        n_samples: 100_000,
        seed: 7,
    };
    let mut group = c.benchmark_group("sum_coupling_poisson");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| sum_size_bias_coupling(&cfg, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, hoeffding, coupling);
criterion_main!(benches);
