//! Byte-pair-merge subword tokenizer over code tokens.
//!
//! Training starts from the character alphabet of the corpus and repeatedly
//! merges the most frequent adjacent pair, breaking frequency ties by the
//! lexicographically smallest `(left, right)` piece pair. Merge order is
//! recorded as vocabulary order, and encoding greedily applies the
//! adjacent merge whose result has the lowest id, so the model file only
//! needs the ordered piece list.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use super::special;
use super::sequence::SPECIAL_TOKENS;
use crate::error::TokenizerError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordTokenizer {
    pieces: Vec<String>,
    index: HashMap<String, u32>,
}

impl SubwordTokenizer {
    /// Smallest vocabulary that can hold the specials and the alphabet of `words`.
    pub fn minimum_vocab_size<'a>(words: impl IntoIterator<Item = &'a str>) -> usize {
        let alphabet: BTreeSet<char> = words.into_iter().flat_map(str::chars).collect();
        SPECIAL_TOKENS.len() + alphabet.len()
    }

    /// Train on a stream of code tokens (one word per lexical token).
    pub fn train<'a>(
        words: impl IntoIterator<Item = &'a str>,
        vocab_size: usize,
    ) -> Result<Self, TokenizerError> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for w in words {
            if !w.is_empty() {
                *counts.entry(w).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(TokenizerError::EmptyCorpus);
        }
        let alphabet: BTreeSet<char> = counts.keys().flat_map(|w| w.chars()).collect();
        let required = SPECIAL_TOKENS.len() + alphabet.len();
        if vocab_size < required {
            return Err(TokenizerError::VocabTooSmall {
                requested: vocab_size,
                required,
            });
        }
        let mut pieces: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        pieces.extend(alphabet.iter().map(|c| c.to_string()));
        let mut index: HashMap<String, u32> = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();

        let mut words: Vec<(Vec<u32>, i64)> = counts
            .iter()
            .map(|(w, &c)| (w.chars().map(|ch| index[&ch.to_string()]).collect(), c as i64))
            .collect();

        let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
        let mut where_found: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
        for (wi, (syms, c)) in words.iter().enumerate() {
            for pair in syms.windows(2) {
                let key = (pair[0], pair[1]);
                *pair_counts.entry(key).or_default() += c;
                where_found.entry(key).or_default().insert(wi);
            }
        }
        let mut heap = BinaryHeap::new();
        for (&key, &count) in &pair_counts {
            heap.push(heap_entry(&pieces, key, count));
        }

        while pieces.len() < vocab_size {
            let Some((count, _, key)) = heap.pop() else {
                break;
            };
            if pair_counts.get(&key).copied().unwrap_or(0) != count || count <= 0 {
                continue;
            }
            let merged = format!("{}{}", pieces[key.0 as usize], pieces[key.1 as usize]);
            let new_id = match index.get(&merged) {
                Some(&id) => id,
                None => {
                    let id = pieces.len() as u32;
                    index.insert(merged.clone(), id);
                    pieces.push(merged);
                    id
                }
            };
            let mut touched: HashSet<(u32, u32)> = HashSet::new();
            let mut affected: Vec<usize> = where_found
                .remove(&key)
                .unwrap_or_default()
                .into_iter()
                .collect();
            affected.sort_unstable();
            for wi in affected {
                let (syms, c) = &mut words[wi];
                let c = *c;
                for pair in syms.windows(2) {
                    let k = (pair[0], pair[1]);
                    *pair_counts.get_mut(&k).expect("counted pair") -= c;
                    touched.insert(k);
                }
                let mut merged_syms = Vec::with_capacity(syms.len());
                let mut i = 0;
                while i < syms.len() {
                    if i + 1 < syms.len() && (syms[i], syms[i + 1]) == key {
                        merged_syms.push(new_id);
                        i += 2;
                    } else {
                        merged_syms.push(syms[i]);
                        i += 1;
                    }
                }
                *syms = merged_syms;
                for pair in syms.windows(2) {
                    let k = (pair[0], pair[1]);
                    *pair_counts.entry(k).or_default() += c;
                    where_found.entry(k).or_default().insert(wi);
                    touched.insert(k);
                }
            }
            pair_counts.remove(&key);
            touched.remove(&key);
            for k in touched {
                let count = pair_counts.get(&k).copied().unwrap_or(0);
                if count > 0 {
                    heap.push(heap_entry(&pieces, k, count));
                } else {
                    pair_counts.remove(&k);
                    where_found.remove(&k);
                }
            }
        }
        Ok(Self { pieces, index })
    }

    pub fn from_pieces(pieces: Vec<String>) -> Result<Self, TokenizerError> {
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if pieces.get(i).map(String::as_str) != Some(*s) {
                return Err(TokenizerError::Format {
                    line: i + 2,
                    message: format!("expected special token {s} at id {i}"),
                });
            }
        }
        let mut index = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            if index.insert(p.clone(), i as u32).is_some() {
                return Err(TokenizerError::Format {
                    line: i + 2,
                    message: format!("duplicate piece {p:?}"),
                });
            }
        }
        Ok(Self { pieces, index })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    /// Encode one code token. Never returns an empty vector for non-empty input;
    /// characters outside the alphabet become `[UNK]`.
    pub fn encode_word(&self, word: &str) -> Vec<u32> {
        let mut syms: Vec<(u32, String)> = word
            .chars()
            .map(|c| {
                let s = c.to_string();
                (self.id_of(&s).unwrap_or(special::UNK), s)
            })
            .collect();
        loop {
            let mut best: Option<(u32, usize)> = None;
            for i in 0..syms.len().saturating_sub(1) {
                if syms[i].0 == special::UNK || syms[i + 1].0 == special::UNK {
                    continue;
                }
                let joined = format!("{}{}", syms[i].1, syms[i + 1].1);
                if let Some(id) = self.id_of(&joined) {
                    if best.is_none_or(|(b, _)| id < b) {
                        best = Some((id, i));
                    }
                }
            }
            let Some((id, i)) = best else { break };
            let right = syms.remove(i + 1).1;
            syms[i].0 = id;
            syms[i].1.push_str(&right);
        }
        syms.into_iter().map(|(id, _)| id).collect()
    }

    /// Concatenated pieces of `ids`; specials are rendered by name.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&id| self.piece(id).unwrap_or("[UNK]"))
            .collect()
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        write_vocab(&mut out, &self.pieces)
    }

    pub fn read_from(input: impl BufRead) -> Result<Self, TokenizerError> {
        Self::from_pieces(read_vocab(input)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TokenizerError> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

type HeapEntry = (i64, Reverse<(String, String)>, (u32, u32));

fn heap_entry(pieces: &[String], key: (u32, u32), count: i64) -> HeapEntry {
    (
        count,
        Reverse((pieces[key.0 as usize].clone(), pieces[key.1 as usize].clone())),
        key,
    )
}

/// `vocab_size\t<n>` header followed by `<piece>\t<id>` lines.
pub(crate) fn write_vocab(out: &mut impl Write, entries: &[String]) -> std::io::Result<()> {
    writeln!(out, "vocab_size\t{}", entries.len())?;
    for (i, p) in entries.iter().enumerate() {
        writeln!(out, "{p}\t{i}")?;
    }
    Ok(())
}

pub(crate) fn read_vocab(input: impl BufRead) -> Result<Vec<String>, TokenizerError> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.ok_or(TokenizerError::Format {
        line: 1,
        message: "missing header".into(),
    })?;
    let size: usize = header
        .strip_prefix("vocab_size\t")
        .and_then(|n| n.trim().parse().ok())
        .ok_or(TokenizerError::Format {
            line: 1,
            message: format!("bad header {header:?}"),
        })?;
    let mut entries = Vec::with_capacity(size);
    for (i, line) in lines.enumerate() {
        let line = line?;
        // Pieces may contain tabs (string literals); ids never do.
        let (piece, id) = line.rsplit_once('\t').ok_or(TokenizerError::Format {
            line: i + 2,
            message: "expected <piece>\\t<id>".into(),
        })?;
        let id: usize = id.parse().map_err(|_| TokenizerError::Format {
            line: i + 2,
            message: format!("bad id {id:?}"),
        })?;
        if id != entries.len() {
            return Err(TokenizerError::Format {
                line: i + 2,
                message: format!("ids must be consecutive, got {id}"),
            });
        }
        entries.push(piece.to_owned());
    }
    if entries.len() != size {
        return Err(TokenizerError::Format {
            line: entries.len() + 1,
            message: format!("header declares {size} entries, found {}", entries.len()),
        });
    }
    Ok(entries)
}
