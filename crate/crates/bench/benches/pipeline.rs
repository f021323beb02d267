use codetriplet::pipeline::{plan_masks, Corpus};
use codetriplet::syntax::SourceUnit;
use codetriplet::synth::generate_functions;
use codetriplet_bench::{augmenter, corpus};
use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn parsing(c: &mut Criterion) {
    let units: Vec<SourceUnit> = generate_functions(200, 0)
        .into_iter()
        .enumerate()
        .map(|(i, t)| SourceUnit::new(format!("u{i}"), &t))
        .collect();
    let mut g = c.benchmark_group("analyze");
    g.throughput(Throughput::Elements(units.len() as u64));
    g.bench_function("200 functions", |b| {
        b.iter(|| Corpus::analyze(black_box(units.clone())))
    });
    g.finish();
}

fn triplets(c: &mut Criterion) {
    let corpus = corpus(200, 0);
    let aug = augmenter(&corpus);
    let mut g = c.benchmark_group("augment");
    g.throughput(Throughput::Elements(corpus.units.len() as u64));
    g.bench_function("200 functions", |b| b.iter(|| aug.run(black_box(&corpus))));
    g.finish();

    let a = corpus.parsed().next().expect("parsed unit");
    let enc = aug.encode(a);
    c.bench_function("plan_masks", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        b.iter(|| {
            plan_masks(
                &enc.code,
                &enc.types,
                aug.tokenizer.len(),
                aug.types.len(),
                &mut rng,
            )
        })
    });
}

criterion_group!(benches, parsing, triplets);
criterion_main!(benches);
