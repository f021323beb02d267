use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bpe::{read_vocab, write_vocab, SubwordTokenizer};
use super::{special, Token};
use crate::error::TokenizerError;

pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// A node-type annotation `tt#pt`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeToken {
    pub tt: String,
    pub pt: String,
}

impl TypeToken {
    pub fn new(tt: &str, pt: &str) -> Self {
        Self {
            tt: tt.to_owned(),
            pt: pt.to_owned(),
        }
    }

    pub fn label(&self) -> String {
        format!("{}#{}", self.tt, self.pt)
    }

    pub fn parse(label: &str) -> Option<Self> {
        let (tt, pt) = label.split_once('#')?;
        (!tt.is_empty() && !pt.is_empty()).then(|| Self::new(tt, pt))
    }
}

/// Vocabulary of type labels: the specials followed by observed `tt#pt`
/// labels in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVocab {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownTypePolicy {
    /// Unseen labels map to `[UNK]`.
    #[default]
    MapToUnk,
    Error,
}

impl TypeVocab {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let observed: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        let all: Vec<String> = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(observed.into_iter().filter(|l| !SPECIAL_TOKENS.contains(&l.as_str())))
            .collect();
        Self::from_entries(all).expect("specials are placed first")
    }

    /// Scan annotated tokens for every observed label.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> Self {
        Self::from_labels(tokens.into_iter().map(|t| t.type_token().label()))
    }

    fn from_entries(labels: Vec<String>) -> Result<Self, TokenizerError> {
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if labels.get(i).map(String::as_str) != Some(*s) {
                return Err(TokenizerError::Format {
                    line: i + 2,
                    message: format!("expected special label {s} at id {i}"),
                });
            }
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
        Ok(Self { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id_of(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        write_vocab(&mut out, &self.labels)
    }

    pub fn read_from(input: impl BufRead) -> Result<Self, TokenizerError> {
        Self::from_entries(read_vocab(input)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TokenizerError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Subtoken ids wrapped in `[CLS]` ... `[SEP]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSequence {
    pub ids: Vec<u32>,
    /// Source token index of each position; `-1` for the sentinels.
    pub token_of: Vec<i32>,
}

/// Type ids aligned position-by-position with a [`CodeSequence`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSequence {
    pub ids: Vec<u32>,
}

impl CodeSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Positions that are not sentinels.
    pub fn maskable_len(&self) -> usize {
        self.ids.len().saturating_sub(2)
    }
}

/// Subtokenize annotated tokens and align their type labels.
pub fn build_sequences(
    tokens: &[Token],
    tokenizer: &SubwordTokenizer,
    types: &TypeVocab,
    policy: UnknownTypePolicy,
) -> Result<(CodeSequence, TypeSequence), TokenizerError> {
    let mut code = vec![special::CLS];
    let mut token_of = vec![-1];
    let mut type_ids = vec![special::CLS];
    for (ti, token) in tokens.iter().enumerate() {
        let label = token.type_token().label();
        let type_id = match (types.id_of(&label), policy) {
            (Some(id), _) => id,
            (None, UnknownTypePolicy::MapToUnk) => special::UNK,
            (None, UnknownTypePolicy::Error) => return Err(TokenizerError::UnknownType(label)),
        };
        for id in tokenizer.encode_word(&token.text) {
            code.push(id);
            token_of.push(ti as i32);
            type_ids.push(type_id);
        }
    }
    code.push(special::SEP);
    token_of.push(-1);
    type_ids.push(special::SEP);
    Ok((
        CodeSequence { ids: code, token_of },
        TypeSequence { ids: type_ids },
    ))
}
