use std::fs;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use codetriplet::kernel::{
    split_heldout, train_loop, triplet_eval, perplexity, EpochStats, Example, ModelConfig,
    TrainConfig,
};
use codetriplet::pipeline::{load_dataset, DatasetRecord};
use codetriplet::syntax::{SubwordTokenizer, TypeVocab};
use serde::Serialize;

use crate::augment::types_path;
use crate::PretrainArgs;

#[derive(Serialize)]
struct Summary<'a> {
    variant: &'a str,
    train_records: usize,
    heldout_records: usize,
    parameters: usize,
    model: &'a ModelConfig,
    epochs: &'a [EpochStats],
    heldout_perplexity: Option<f64>,
    heldout_margin_accuracy: Option<f64>,
}

/// Largest code and type ids used anywhere in the records, plus one.
fn observed_vocab(records: &[DatasetRecord]) -> (usize, usize) {
    let mut code = 0;
    let mut types = 0;
    for r in records {
        for m in r.members() {
            code = code.max(m.code_ids.iter().copied().max().unwrap_or(0));
            types = types.max(m.type_ids.iter().copied().max().unwrap_or(0));
        }
        for &(c, t) in &r.mask.repl {
            code = code.max(c);
            types = types.max(t);
        }
    }
    (code as usize + 1, types as usize + 1)
}

pub fn run(args: PretrainArgs) -> Result<()> {
    let records = load_dataset(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    if records.is_empty() {
        bail!("{} holds no records", args.data.display());
    }
    let (seen_code, seen_types) = observed_vocab(&records);
    let (code_vocab, type_vocab) = match &args.vocab {
        Some(path) => {
            let tok = SubwordTokenizer::load(path).with_context(|| format!("loading {}", path.display()))?;
            let tp = types_path(path);
            let types = TypeVocab::load(&tp).with_context(|| format!("loading {}", tp.display()))?;
            if tok.len() < seen_code || types.len() < seen_types {
                bail!("the dataset uses ids beyond the vocabularies at {}", path.display());
            }
            (tok.len(), types.len())
        }
        None => (seen_code, seen_types),
    };
    let model = ModelConfig {
        dim: args.dim,
        layers: args.layers,
        heads: args.heads,
        ffn: args.ffn.unwrap_or(2 * args.dim),
        max_len: args.max_len,
        code_vocab,
        type_vocab,
        use_positions: true,
        use_types: args.variant.uses_types(),
    };
    model.validate()?;
    let examples = records
        .iter()
        .map(|r| Example::from_record(r, model.max_len))
        .collect::<Result<Vec<_>, _>>()?;
    let (train, heldout) = split_heldout(examples, args.heldout_frac);
    if train.is_empty() {
        bail!("the held-out fraction leaves nothing to train on");
    }
    let cfg = TrainConfig {
        variant: args.variant,
        epochs: args.epochs,
        batch_size: args.batch_size,
        lr: args.lr,
        tau: args.tau,
        seed: args.seed,
        clip: (args.clip > 0.0).then_some(args.clip),
        bidirectional: args.bidirectional,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (params, curves) = train_loop(&train, &heldout, &model, &cfg)?;
    eprintln!(
        "trained {} steps in {:.1}s",
        curves.steps.len(),
        start.elapsed().as_secs_f64()
    );
    let (ppl, margin) = if heldout.is_empty() {
        (None, None)
    } else {
        (Some(perplexity(&params, &heldout)?), Some(triplet_eval(&params, &heldout)?))
    };
    if let Some(path) = &args.checkpoint {
        params.save(path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.curves {
        fs::write(path, serde_json::to_string_pretty(&curves)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = Summary {
        variant: cfg.variant.label(),
        train_records: train.len(),
        heldout_records: heldout.len(),
        parameters: params.len(),
        model: &params.config,
        epochs: &curves.epochs,
        heldout_perplexity: ppl,
        heldout_margin_accuracy: margin,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
