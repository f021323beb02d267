//! Corpus ingestion, triplet construction, mask plans and the JSONL
//! dataset.

mod compile;
mod dataset;
mod ingest;
mod mask;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compile::CompileCheck;
pub use dataset::{emit_dataset, load_dataset, DatasetRecord, Member, RunStats};
pub use ingest::{extract_functions, ingest_corpus, Ingested};
pub use mask::{apply_masks, mask_count, plan_masks, MaskPlan};

use crate::error::TokenizerError;
use crate::flow::{applicable_transforms, Analysis};
use crate::syntax::{
    build_sequences, lex_and_annotate, CodeSequence, SourceUnit, SubwordTokenizer, TypeSequence,
    TypeVocab, UnknownTypePolicy,
};
use crate::transform::{
    generate_negative, generate_positive, AppliedTransform, BugTag, CweMap, LibraryAllowlist,
    NegativeConfig, PositiveConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NoPositiveSite,
    NoNegativeSite,
    ParseFailed,
}

impl SkipReason {
    pub const ALL: [SkipReason; 3] = [
        SkipReason::NoPositiveSite,
        SkipReason::NoNegativeSite,
        SkipReason::ParseFailed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SkipReason::NoPositiveSite => "no_positive_site",
            SkipReason::NoNegativeSite => "no_negative_site",
            SkipReason::ParseFailed => "parse_failed",
        }
    }
}

/// A unit with its aligned code and type sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub unit: SourceUnit,
    pub code: CodeSequence,
    pub types: TypeSequence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub x: Encoded,
    pub x_pos: Encoded,
    pub x_neg: Encoded,
    pub positive: Vec<AppliedTransform>,
    pub negative: Vec<AppliedTransform>,
    pub bug: BugTag,
    pub seed: u64,
}

/// Ingested units and their analyses (`None` for units that do not parse).
#[derive(Debug, Clone)]
pub struct Corpus {
    pub units: Vec<SourceUnit>,
    pub analyses: Vec<Option<Analysis>>,
}

impl Corpus {
    pub fn analyze(units: Vec<SourceUnit>) -> Self {
        let analyses = units
            .par_iter()
            .map(|u| Analysis::new(u.clone()).ok())
            .collect();
        Self { units, analyses }
    }

    pub fn parsed(&self) -> impl Iterator<Item = &Analysis> {
        self.analyses.iter().flatten()
    }

    /// Sorted, deduplicated local variable and parameter names.
    pub fn name_pool(&self) -> Vec<String> {
        let names: BTreeSet<&str> = self
            .parsed()
            .flat_map(|a| a.scopes.defs().iter())
            .map(|d| d.name.as_str())
            .collect();
        names.into_iter().map(str::to_owned).collect()
    }

    /// Train a subword tokenizer on every token of the parsed units.
    pub fn train_tokenizer(&self, vocab_size: usize) -> Result<SubwordTokenizer, TokenizerError> {
        let words = self.parsed().flat_map(|a| a.tree.token_texts());
        SubwordTokenizer::train(words, vocab_size)
    }

    /// Every `tt#pt` label observed in the parsed units.
    pub fn type_vocab(&self) -> TypeVocab {
        let tokens: Vec<_> = self.parsed().flat_map(|a| lex_and_annotate(&a.tree)).collect();
        TypeVocab::from_tokens(&tokens)
    }
}

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    pub seed: u64,
    pub max_compose: usize,
    pub edit_bound: usize,
    pub compile_check: Option<CompileCheck>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_compose: 3,
            edit_bound: 8,
            compile_check: None,
        }
    }
}

/// Negative draws tried before a unit is skipped when the first choice
/// coincides with x⁺ or fails the compile check.
const NEGATIVE_ATTEMPTS: usize = 4;

/// Everything needed to turn analyses into dataset records.
#[derive(Debug, Clone)]
pub struct Augmenter {
    pub tokenizer: SubwordTokenizer,
    pub types: TypeVocab,
    pub library: LibraryAllowlist,
    pub cwe_map: CweMap,
    pub name_pool: Vec<String>,
    pub config: AugmentConfig,
}

/// Outcome of one unit.
pub type UnitResult = Result<DatasetRecord, SkipReason>;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of one unit, independent of scheduling and of the other units.
pub fn unit_seed(run_seed: u64, id: &str) -> u64 {
    splitmix64(run_seed ^ fnv1a(id))
}

impl Augmenter {
    pub fn new(tokenizer: SubwordTokenizer, types: TypeVocab, corpus: &Corpus, config: AugmentConfig) -> Self {
        Self {
            tokenizer,
            types,
            library: LibraryAllowlist::standard(),
            cwe_map: CweMap::standard(),
            name_pool: corpus.name_pool(),
            config,
        }
    }

    pub fn encode(&self, a: &Analysis) -> Encoded {
        let tokens = lex_and_annotate(&a.tree);
        let (code, types) =
            build_sequences(&tokens, &self.tokenizer, &self.types, UnknownTypePolicy::MapToUnk)
                .expect("unknown types map to UNK");
        Encoded {
            unit: a.unit.clone(),
            code,
            types,
        }
    }

    /// One positive and one hard negative for a unit.
    pub fn build_triplet(&self, a: &Analysis, seed: u64) -> Result<Triplet, SkipReason> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let menu = applicable_transforms(a, &self.library);
        let pos_cfg = PositiveConfig {
            max_compose: self.config.max_compose,
            library: &self.library,
            name_pool: &self.name_pool,
        };
        let pos = generate_positive(a, &menu, &mut rng, &pos_cfg)
            .map_err(|_| SkipReason::NoPositiveSite)?;
        let neg_cfg = NegativeConfig {
            edit_bound: self.config.edit_bound,
            cwe_map: &self.cwe_map,
        };
        let mut neg = None;
        for _ in 0..NEGATIVE_ATTEMPTS {
            let candidate = generate_negative(a, &menu, &mut rng, &neg_cfg)
                .map_err(|_| SkipReason::NoNegativeSite)?;
            let distinct = candidate.text() != pos.text();
            let compiles = self
                .config
                .compile_check
                .as_ref()
                .map_or(true, |cc| cc.accepts(a.text(), candidate.text()));
            if distinct && compiles {
                neg = Some(candidate);
                break;
            }
        }
        let neg = neg.ok_or(SkipReason::NoNegativeSite)?;
        Ok(Triplet {
            x: self.encode(a),
            x_pos: self.encode(&pos.analysis),
            x_neg: self.encode(&neg.analysis),
            positive: pos.provenance,
            negative: neg.provenance,
            bug: neg.bug.expect("negatives carry a bug tag"),
            seed,
        })
    }

    /// Triplet and mask plan for one unit.
    pub fn process(&self, unit: &SourceUnit, analysis: Option<&Analysis>) -> UnitResult {
        let a = analysis.ok_or(SkipReason::ParseFailed)?;
        let seed = unit_seed(self.config.seed, &unit.id);
        let t = self.build_triplet(a, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let plan = plan_masks(
            &t.x.code,
            &t.x.types,
            self.tokenizer.len(),
            self.types.len(),
            &mut rng,
        );
        Ok(DatasetRecord::new(&t, plan))
    }

    /// Process every unit in parallel; results keep corpus order.
    pub fn run(&self, corpus: &Corpus) -> (Vec<UnitResult>, RunStats) {
        let results: Vec<UnitResult> = corpus
            .units
            .par_iter()
            .zip(corpus.analyses.par_iter())
            .map(|(u, a)| self.process(u, a.as_ref()))
            .collect();
        let mut stats = RunStats {
            ingested: corpus.units.len(),
            ..RunStats::default()
        };
        for r in &results {
            match r {
                Ok(rec) => stats.count_record(rec),
                Err(reason) => stats.count_skip(*reason),
            }
        }
        (results, stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::special;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::analyze(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| SourceUnit::new(format!("u{i}"), t))
                .collect(),
        )
    }

    fn augmenter(c: &Corpus, seed: u64) -> Augmenter {
        let tok = c.train_tokenizer(400).unwrap();
        Augmenter::new(
            tok,
            c.type_vocab(),
            c,
            AugmentConfig {
                seed,
                ..AugmentConfig::default()
            },
        )
    }

    const UNITS: [&str; 4] = [
        "int sum(int *a, int n)\n{\n    int s = 0;\n    int i;\n    for (i = 0; i < n; i++)\n        s += a[i];\n    return s;\n}",
        "int f(){return 0;}",
        "int broken(int a { return a; }",
        "void copy(char *dst, const char *src, int n)\n{\n    long total = 0;\n    if (n > 0)\n        memcpy(dst, src, n);\n    total = n;\n    log_bytes(total);\n}",
    ];

    #[test]
    fn skips_and_conservation() {
        let c = corpus(&UNITS);
        let aug = augmenter(&c, 42);
        let (results, stats) = aug.run(&c);
        assert!(results[0].is_ok());
        assert_eq!(results[1], Err(SkipReason::NoPositiveSite));
        assert_eq!(results[2], Err(SkipReason::ParseFailed));
        assert!(results[3].is_ok());
        assert_eq!(stats.ingested, stats.emitted + stats.skipped_total());
        assert_eq!(stats.emitted, 2);
        assert_eq!(stats.bug_families.values().sum::<usize>(), 2);
    }

    #[test]
    fn records_are_aligned_and_distinct() {
        let c = corpus(&UNITS);
        let aug = augmenter(&c, 7);
        for r in aug.run(&c).0.into_iter().flatten() {
            for m in r.members() {
                assert_eq!(m.code_ids.len(), m.type_ids.len());
                assert_eq!(m.code_ids.len(), m.token_of.len());
                assert_eq!(m.code_ids[0], special::CLS);
                assert_eq!(*m.code_ids.last().unwrap(), special::SEP);
            }
            assert_ne!(r.x.text, r.x_pos.text);
            assert_ne!(r.x.text, r.x_neg.text);
            assert_ne!(r.x_pos.text, r.x_neg.text);
            assert!(r.x_pos.transforms.iter().all(|t| t.kind.is_positive()));
            assert_eq!(r.x_neg.transforms.len(), 1);
            assert_eq!(r.mask.len(), mask_count(r.x.code_ids.len() - 2));
            apply_masks(&r.x.code_ids, &r.x.type_ids, &r.mask).unwrap();
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let c = corpus(&UNITS);
        let a = augmenter(&c, 42).run(&c).0;
        let b = augmenter(&c, 42).run(&c).0;
        assert_eq!(a, b);
        let other = augmenter(&c, 43).run(&c).0;
        assert_ne!(a, other);
    }

    #[test]
    fn unit_seeds_depend_on_id_only() {
        assert_eq!(unit_seed(1, "a.c:0"), unit_seed(1, "a.c:0"));
        assert_ne!(unit_seed(1, "a.c:0"), unit_seed(1, "a.c:1"));
        assert_ne!(unit_seed(1, "a.c:0"), unit_seed(2, "a.c:0"));
    }

    #[test]
    fn name_pool_is_sorted_locals() {
        let c = corpus(&UNITS);
        assert_eq!(c.name_pool(), vec!["a", "dst", "i", "n", "s", "src", "total"]);
    }
}
