use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use codetriplet::pipeline::{emit_dataset, ingest_corpus, AugmentConfig, Augmenter, CompileCheck, Corpus};
use codetriplet::syntax::{SubwordTokenizer, TypeVocab};
use codetriplet::transform::CweMap;

use crate::AugmentArgs;

pub fn types_path(vocab: &Path) -> PathBuf {
    let mut s = vocab.as_os_str().to_owned();
    s.push(".types");
    PathBuf::from(s)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn vocabularies(args: &AugmentArgs, corpus: &Corpus) -> Result<(SubwordTokenizer, TypeVocab)> {
    let types_file = types_path(&args.vocab);
    let tok = if args.vocab.exists() {
        SubwordTokenizer::load(&args.vocab)
            .with_context(|| format!("loading {}", args.vocab.display()))?
    } else {
        let tok = corpus
            .train_tokenizer(args.vocab_size)
            .context("training the subword vocabulary")?;
        tok.save(&args.vocab)
            .with_context(|| format!("writing {}", args.vocab.display()))?;
        tok
    };
    let types = if types_file.exists() {
        TypeVocab::load(&types_file).with_context(|| format!("loading {}", types_file.display()))?
    } else {
        let types = corpus.type_vocab();
        types
            .save(&types_file)
            .with_context(|| format!("writing {}", types_file.display()))?;
        types
    };
    Ok((tok, types))
}

fn flow_dump(corpus: &Corpus) -> String {
    let mut out = String::new();
    for a in corpus.parsed() {
        let _ = writeln!(out, "// {}", a.unit.id);
        out.push_str(&a.graph.to_dot(&a.tree));
    }
    out
}

pub fn run(args: AugmentArgs) -> Result<ExitCode> {
    let ingested = ingest_corpus(&args.input, args.lang.into());
    for (path, err) in &ingested.errors {
        eprintln!("warning: {}: {err}", path.display());
    }
    let io_errors = ingested.errors.len();
    let corpus = Corpus::analyze(ingested.units);
    if corpus.parsed().next().is_none() {
        bail!("no parseable functions under the given inputs");
    }
    let (tokenizer, types) = vocabularies(&args, &corpus)?;

    let compile_check = if args.compile_check {
        let cc = CompileCheck {
            compiler: args.compiler.clone(),
        };
        if !cc.available() {
            bail!("--compile-check needs a working `{}`", cc.compiler);
        }
        Some(cc)
    } else {
        None
    };
    let mut augmenter = Augmenter::new(
        tokenizer,
        types,
        &corpus,
        AugmentConfig {
            seed: args.seed,
            max_compose: args.max_compose,
            edit_bound: args.edit_bound,
            compile_check,
        },
    );
    if let Some(path) = &args.library {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        augmenter.library.extend_from_text(&text);
    }
    if let Some(path) = &args.cwe_map {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        augmenter.cwe_map = CweMap::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    }

    let (results, mut stats) = augmenter.run(&corpus);
    stats.io_errors = io_errors;
    let records: Vec<_> = results.into_iter().flatten().collect();
    emit_dataset(&records, &args.out)?;
    if args.dump_flow_dot {
        let path = with_suffix(&args.out, ".flow.dot");
        fs::write(&path, flow_dump(&corpus)).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(if stats.emitted > 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
