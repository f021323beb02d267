//! Rewrites that produce positive and negative samples.

mod cwe;
mod library;
mod negative;
mod positive;

use serde::{Deserialize, Serialize};

pub use cwe::{BugFamily, BugTag, CweMap};
pub use library::LibraryAllowlist;
pub use negative::{
    demotions, generate_negative, misuse_data_type, misuse_pointer, misuse_value,
    misuse_variable, mutate_call, mutate_conditional, negative_candidates, NegativeConfig,
};
pub use positive::{
    generate_positive, permute_statements, rename_functions, rename_variables, PositiveConfig,
    RenameMode,
};

use crate::flow::Analysis;
use crate::syntax::{lex, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    VarRename,
    FuncRename,
    Permute,
    DataType,
    Pointer,
    Conditional,
    VarMisuse,
    ValueMisuse,
    CallMutation,
}

impl TransformKind {
    pub const ALL: [TransformKind; 9] = [
        TransformKind::VarRename,
        TransformKind::FuncRename,
        TransformKind::Permute,
        TransformKind::DataType,
        TransformKind::Pointer,
        TransformKind::Conditional,
        TransformKind::VarMisuse,
        TransformKind::ValueMisuse,
        TransformKind::CallMutation,
    ];

    pub fn is_positive(self) -> bool {
        matches!(
            self,
            TransformKind::VarRename | TransformKind::FuncRename | TransformKind::Permute
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            TransformKind::VarRename => "var_rename",
            TransformKind::FuncRename => "func_rename",
            TransformKind::Permute => "permute",
            TransformKind::DataType => "data_type",
            TransformKind::Pointer => "pointer",
            TransformKind::Conditional => "conditional",
            TransformKind::VarMisuse => "var_misuse",
            TransformKind::ValueMisuse => "value_misuse",
            TransformKind::CallMutation => "call_mutation",
        }
    }

    /// Bug family of a negative kind.
    pub fn family(self) -> Option<BugFamily> {
        Some(match self {
            TransformKind::DataType => BugFamily::DataType,
            TransformKind::Pointer => BugFamily::Pointer,
            TransformKind::Conditional => BugFamily::Conditional,
            TransformKind::VarMisuse => BugFamily::VarMisuse,
            TransformKind::ValueMisuse => BugFamily::ValueMisuse,
            TransformKind::CallMutation => BugFamily::CallMutation,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub span: Span,
    pub text: String,
}

impl Edit {
    pub fn new(span: Span, text: impl Into<String>) -> Self {
        Self {
            span,
            text: text.into(),
        }
    }

    pub fn insert(at: usize, text: impl Into<String>) -> Self {
        Self::new(Span::new(at, at), text)
    }
}

/// A set of non-overlapping text edits plus descriptive metadata (rename
/// maps, the chosen action).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrite {
    pub kind: TransformKind,
    pub edits: Vec<Edit>,
    pub metadata: Vec<(String, String)>,
}

impl Rewrite {
    pub fn new(kind: TransformKind) -> Self {
        Self {
            kind,
            edits: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn with_edit(mut self, edit: Edit) -> Self {
        self.edits.push(edit);
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.push((key.to_owned(), value.into()));
        self
    }

    /// Apply the edits to `source`. Zero-length inserts at an offset go
    /// before a replacement starting there.
    ///
    /// # Panics
    /// If two edits overlap or an edit lies outside `source`.
    pub fn apply(&self, source: &str) -> String {
        let mut edits: Vec<&Edit> = self.edits.iter().collect();
        edits.sort_by_key(|e| (e.span.start, e.span.end));
        let mut out = String::with_capacity(source.len() + 32);
        let mut cursor = 0;
        for e in edits {
            assert!(e.span.start >= cursor, "overlapping edits at {}", e.span.start);
            assert!(e.span.end <= source.len(), "edit past end of source");
            out.push_str(&source[cursor..e.span.start]);
            out.push_str(&e.text);
            cursor = e.span.end;
        }
        out.push_str(&source[cursor..]);
        out
    }

    pub fn applied(&self) -> AppliedTransform {
        AppliedTransform {
            kind: self.kind,
            metadata: self.metadata.clone(),
        }
    }
}

/// Provenance entry of a transformed sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedTransform {
    pub kind: TransformKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metadata: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Positive,
    Negative,
}

/// A positive or negative variant of a unit, re-parsed and analyzed.
#[derive(Debug, Clone)]
pub struct TransformedCode {
    pub analysis: Analysis,
    pub provenance: Vec<AppliedTransform>,
    pub relation: Relation,
    pub bug: Option<BugTag>,
}

impl TransformedCode {
    pub fn text(&self) -> &str {
        &self.analysis.unit.text
    }
}

/// Apply a rewrite and re-analyze the result. `None` when the output does
/// not parse or equals the input.
pub fn realize(a: &Analysis, rewrite: &Rewrite) -> Option<Analysis> {
    let text = rewrite.apply(a.text());
    let unit = a.unit.with_text(&text);
    if unit.text == a.unit.text {
        return None;
    }
    Analysis::new(unit).ok()
}

/// Levenshtein distance between the token streams of two texts. `None` if
/// either text does not lex.
pub fn token_edit_distance(a: &str, b: &str) -> Option<usize> {
    let ta: Vec<&str> = lex(a).ok()?.iter().map(|t| t.span.slice(a)).collect();
    let tb: Vec<&str> = lex(b).ok()?.iter().map(|t| t.span.slice(b)).collect();
    Some(levenshtein(&ta, &tb))
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);
    if a.is_empty() || b.is_empty() {
        return a.len().max(b.len());
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let next = (diag + usize::from(x != y)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[char], b: &[char]) -> usize {
        if a.is_empty() || b.is_empty() {
            return a.len().max(b.len());
        }
        let sub = naive(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
        sub.min(naive(&a[1..], b) + 1).min(naive(a, &b[1..]) + 1)
    }

    #[test]
    fn levenshtein_matches_recursive_definition() {
        let words = ["", "a", "ab", "kitten", "sitting", "flaw", "lawn", "abcabc", "cab"];
        for x in words {
            for y in words {
                let (a, b): (Vec<char>, Vec<char>) = (x.chars().collect(), y.chars().collect());
                assert_eq!(levenshtein(&a, &b), naive(&a, &b), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn token_distance_ignores_whitespace() {
        assert_eq!(token_edit_distance("a  <  b", "a<=b"), Some(1));
        assert_eq!(token_edit_distance("int n = 10;", "int n;"), Some(2));
        assert_eq!(token_edit_distance("x", "#"), None);
    }

    #[test]
    fn edits_apply_in_order_with_inserts_first() {
        let rw = Rewrite::new(TransformKind::Permute)
            .with_edit(Edit::new(Span::new(0, 3), "X"))
            .with_edit(Edit::insert(0, "<"))
            .with_edit(Edit::new(Span::new(4, 5), ""));
        assert_eq!(rw.apply("abc de"), "<X e");
    }

    #[test]
    #[should_panic(expected = "overlapping")]
    fn overlapping_edits_panic() {
        Rewrite::new(TransformKind::Permute)
            .with_edit(Edit::new(Span::new(0, 3), "X"))
            .with_edit(Edit::new(Span::new(2, 4), "Y"))
            .apply("abcdef");
    }

    #[test]
    fn kinds_partition_into_positive_and_bug_families() {
        for k in TransformKind::ALL {
            assert_eq!(k.is_positive(), k.family().is_none(), "{k:?}");
        }
    }
}
