//! Shared fixtures for the benchmarks.

use codetriplet::kernel::{Example, ModelConfig};
use codetriplet::pipeline::{AugmentConfig, Augmenter, Corpus};
use codetriplet::syntax::SourceUnit;
use codetriplet::synth::generate_functions;

pub fn corpus(count: usize, seed: u64) -> Corpus {
    Corpus::analyze(
        generate_functions(count, seed)
            .into_iter()
            .enumerate()
            .map(|(i, text)| SourceUnit::new(format!("bench/{i}"), &text))
            .collect(),
    )
}

pub fn augmenter(corpus: &Corpus) -> Augmenter {
    Augmenter::new(
        corpus.train_tokenizer(1000).expect("non-empty corpus"),
        corpus.type_vocab(),
        corpus,
        AugmentConfig::default(),
    )
}

/// Training examples and a desk-sized model for them.
pub fn examples(count: usize) -> (Vec<Example>, ModelConfig) {
    let c = corpus(count, 1);
    let aug = augmenter(&c);
    let model = ModelConfig::desk(aug.tokenizer.len(), aug.types.len());
    let (results, _) = aug.run(&c);
    let ex = results
        .iter()
        .flatten()
        .map(|r| Example::from_record(r, model.max_len).expect("valid plan"))
        .collect();
    (ex, model)
}
