//! Parsing, token annotation and subword sequence construction.

mod bpe;
mod lexer;
mod parser;
mod sequence;
mod tree;

use serde::{Deserialize, Serialize};

pub use bpe::SubwordTokenizer;
pub use lexer::{is_keyword, is_primitive_type, lex, LexKind, LexToken, Span};
pub use parser::{is_type_name, parse_function};
pub use sequence::{
    build_sequences, CodeSequence, TypeSequence, TypeToken, TypeVocab, UnknownTypePolicy,
    SPECIAL_TOKENS,
};
pub use tree::{NodeId, NodeKind, Syntax, SyntaxTree, Terminal};

use crate::error::ParseError;

/// Special token ids, shared by the code and type vocabularies.
pub mod special {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;
    pub const CLS: u32 = 2;
    pub const SEP: u32 = 3;
    pub const MASK: u32 = 4;
    /// Number of special entries at the front of every vocabulary.
    pub const COUNT: u32 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Java,
}

/// One function-level unit of source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub id: String,
    pub language: Language,
    /// Normalized text: no comments, no blank lines.
    pub text: String,
    pub origin_path: String,
}

impl SourceUnit {
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        Self {
            id: id.into(),
            language: Language::C,
            text: normalize_source(text),
            origin_path: String::new(),
        }
    }

    /// The same unit with different text (normalized).
    pub fn with_text(&self, text: &str) -> Self {
        Self {
            text: normalize_source(text),
            ..self.clone()
        }
    }
}

/// Strip block and line comments, trailing whitespace and blank lines.
pub fn normalize_source(text: &str) -> String {
    let stripped = strip_comments(text);
    let mut out = String::with_capacity(stripped.len());
    for line in stripped.lines() {
        let line = line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(line);
    }
    out
}

fn strip_comments(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' | b'\'' => {
                let quote = bytes[i];
                out.push(quote);
                i += 1;
                while i < bytes.len() && bytes[i] != quote && bytes[i] != b'\n' {
                    if bytes[i] == b'\\' && i + 1 < bytes.len() {
                        out.push(bytes[i]);
                        i += 1;
                    }
                    out.push(bytes[i]);
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == quote {
                    out.push(quote);
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i += 2;
                while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                    // Keep line structure so spans of later code stay on their lines.
                    if bytes[i] == b'\n' {
                        out.push(b'\n');
                    }
                    i += 1;
                }
                i = (i + 2).min(bytes.len());
                out.push(b' ');
            }
            b => {
                out.push(b);
                i += 1;
            }
        }
    }
    String::from_utf8(out).expect("comment stripping only removes ASCII delimiters")
}

/// Parse a unit into a syntax tree.
pub fn parse_source(unit: &SourceUnit) -> Result<SyntaxTree, ParseError> {
    match unit.language {
        Language::C => parse_function(&unit.text),
        Language::Java => Err(ParseError::new(0, "no Java grammar in this build")),
    }
}

/// A lexical token annotated with its node type and parent node type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Span,
    pub tt: Terminal,
    pub pt: Syntax,
}

impl Token {
    pub fn type_token(&self) -> TypeToken {
        TypeToken::new(self.tt.label(), self.pt.label())
    }
}

/// Tokens of a tree in source order, each carrying `(tt, pt)`.
pub fn lex_and_annotate(tree: &SyntaxTree) -> Vec<Token> {
    tree.leaves()
        .iter()
        .map(|&leaf| {
            let tt = tree.terminal(leaf).expect("leaves are terminals");
            let parent = tree.parent(leaf).unwrap_or(tree.root());
            let pt = tree.syntax(parent).expect("leaf parents are inner nodes");
            Token {
                text: tree.text(leaf).to_owned(),
                span: tree.span(leaf),
                tt,
                pt,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_strips_comments_and_blank_lines() {
        let text = "int f(void) /* sig */\n{\n\n  // note\n  char *s = \"a // b\"; /* x\n y */\n  return 0;   \n}\n";
        let norm = normalize_source(text);
        assert_eq!(norm, "int f(void)\n{\n  char *s = \"a // b\";\n  return 0;\n}");
    }

    fn annotate(text: &str) -> Vec<(String, &'static str, &'static str)> {
        let tree = parse_function(text).unwrap();
        lex_and_annotate(&tree)
            .into_iter()
            .map(|t| (t.text, t.tt.label(), t.pt.label()))
            .collect()
    }

    #[test]
    fn annotation_examples() {
        let toks = annotate("int f(int n){ if (n < 2) return n; return 0; }");
        assert_eq!(toks[0], ("int".into(), "type", "func_definition"));
        let lt = toks.iter().find(|t| t.0 == "<").unwrap();
        assert_eq!((lt.1, lt.2), ("operator", "binary_expr"));
        let kw = toks.iter().find(|t| t.0 == "if").unwrap();
        assert_eq!((kw.1, kw.2), ("keyword", "if_stmt"));
    }

    #[test]
    fn java_is_not_parsed() {
        let mut unit = SourceUnit::new("j", "class A {}");
        unit.language = Language::Java;
        assert!(parse_source(&unit).is_err());
    }
}
