use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use codetriplet::kernel::Variant;
use codetriplet::syntax::Language;

mod augment;
mod pretrain;

#[derive(Parser)]
#[command(name = "codetriplet", version, about = "Contrastive code triplets and a small pre-training kernel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lang {
    C,
    Java,
}

impl From<Lang> for Language {
    fn from(l: Lang) -> Self {
        match l {
            Lang::C => Language::C,
            Lang::Java => Language::Java,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Turn a source corpus into a JSONL dataset of triplets.
    Augment(AugmentArgs),
    /// Pre-train the encoder on a JSONL dataset.
    Pretrain(PretrainArgs),
    /// Write a seeded fixture corpus of small C functions.
    SynthCorpus(SynthArgs),
}

#[derive(clap::Args)]
pub struct AugmentArgs {
    #[arg(long, value_enum, default_value = "c")]
    lang: Lang,
    /// Directories (or files) to scan.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subword model; trained on the corpus and written here when missing.
    /// The type vocabulary lives next to it with a `.types` suffix.
    #[arg(long)]
    vocab: PathBuf,
    /// Size of a newly trained subword vocabulary.
    #[arg(long, default_value_t = 2000)]
    vocab_size: usize,
    #[arg(long, default_value_t = 3)]
    max_compose: usize,
    /// Largest token edit distance of a negative.
    #[arg(long, default_value_t = 8)]
    edit_bound: usize,
    /// Reject negatives that add compiler errors.
    #[arg(long)]
    compile_check: bool,
    #[arg(long, default_value = "cc")]
    compiler: String,
    /// Write the flow graph of every parsed unit to `<out>.flow.dot`.
    #[arg(long)]
    dump_flow_dot: bool,
    /// Extra library names (one per line) that function renaming keeps.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Bug family to CWE table replacing the built-in one.
    #[arg(long)]
    cwe_map: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct PretrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    /// Feed-forward width; twice `dim` when omitted.
    #[arg(long)]
    ffn: Option<usize>,
    /// Longer sequences are truncated.
    #[arg(long, default_value_t = 256)]
    max_len: usize,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// mlm, mlm+clr+, mlm+clr± (or mlm+clr+-), mlm+clr±+ntmlm.
    #[arg(long, default_value = "mlm+clr±+ntmlm")]
    variant: Variant,
    /// Global gradient-norm clip; 0 disables.
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
    /// Positives also act as contrastive anchors.
    #[arg(long)]
    bidirectional: bool,
    /// Fraction of records (by id hash) kept out of training.
    #[arg(long, default_value_t = 0.1)]
    heldout_frac: f64,
    /// Subword model whose size fixes the code vocabulary; inferred from the
    /// data when omitted.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Per-step and per-epoch losses as JSON.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2500)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    per_file: usize,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Augment(a) => augment::run(a),
        Command::Pretrain(p) => pretrain::run(p).map(|()| ExitCode::SUCCESS),
        Command::SynthCorpus(s) => {
            let files = codetriplet::synth::write_corpus(&s.out, s.count, s.seed, s.per_file)?;
            eprintln!("wrote {} files to {}", files.len(), s.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
