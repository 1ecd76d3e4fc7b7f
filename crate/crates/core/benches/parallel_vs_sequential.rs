use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rxfuse::cohort::{synth_generate, SynthConfig, Task};
use rxfuse::embedding::EmbeddingProvider;
use rxfuse::exec::Exec;
use rxfuse::nn::{ClassWeights, GradWorkspace, Mode, Network};
use rxfuse::train::{Dataset, ModelConfig};

fn dataset() -> Dataset {
    let cfg = SynthConfig { n_patients: 200, features: 10, seed: 1, ..SynthConfig::default() };
    let cohort = synth_generate(&cfg).unwrap().to_cohort().unwrap();
    let all: Vec<usize> = (0..cohort.records.len()).collect();
    let st = Dataset::fit_standardizer(&cohort, &all, true);
    Dataset::build(&cohort, st, Some(&EmbeddingProvider::ecfp(2, 1024)), 64).unwrap()
}

fn bench(c: &mut Criterion) {
    let data = dataset();
    let batch_idx: Vec<usize> = (0..32).collect();
    let eval_idx: Vec<usize> = (0..128).collect();
    let batch = data.samples(&batch_idx, Task::Los3);
    let eval = data.samples(&eval_idx, Task::Los3);
    let seeds: Vec<u64> = (0..32).collect();

    for mode in [Mode::Baseline, Mode::Multimodal] {
        let cfg = ModelConfig { mode, ..ModelConfig::default() };
        let (net, params) = Network::build(&cfg.architecture(data.features()), 0).unwrap();
        let mut ws = GradWorkspace::new(&params, batch.len());

        let mut g = c.benchmark_group(format!("{mode:?}").to_lowercase());
        g.sample_size(10);
        for exec in [Exec::Sequential, Exec::Parallel] {
            g.bench_with_input(BenchmarkId::new("loss_and_grad_32", format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| {
                    net.loss_and_grad_into(&params, black_box(&batch), ClassWeights::UNIT, Some(&seeds), exec, &mut ws)
                        .unwrap()
                })
            });
            g.bench_with_input(BenchmarkId::new("predict_128", format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| net.predict_batch(&params, black_box(&eval), exec).unwrap())
            });
        }
        g.finish();
    }
}

criterion_group!(benches, bench);
criterion_main!(benches);
