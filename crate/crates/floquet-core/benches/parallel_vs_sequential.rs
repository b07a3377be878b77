//! Replicate-level parallelism benchmark: the same 8-seed exponent run on a
//! single worker versus the default rayon pool. Build with
//! `--no-default-features` to benchmark the purely sequential code path.

use criterion::{criterion_group, criterion_main, Criterion};
use floquet_core::cocycle::{EntryDistribution, ModelSpec, ModelVariant};
use floquet_core::principal::{lyapunov_top, EstimatorConfig};
use floquet_core::NormKind;

fn replicated_exponent(c: &mut Criterion) {
    let model = ModelSpec {
        dim: 3,
        norm: NormKind::Ell1,
        variant: ModelVariant::IidEnsemble {
            entry: EntryDistribution::Uniform { lo: 0.5, hi: 2.0 },
        },
    };
    let seeds: Vec<u64> = (0..8).collect();
    let mut group = c.benchmark_group("lyapunov_top_8x4000");
    for (name, workers) in [("one_worker", Some(1)), ("pool", None)] {
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut cfg = EstimatorConfig::new(4000);
                cfg.workers = workers;
                lyapunov_top(&model, &seeds, &cfg).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, replicated_exponent);
criterion_main!(benches);
