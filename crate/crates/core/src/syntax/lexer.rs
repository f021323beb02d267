//! C lexer producing byte-spanned tokens. Whitespace is skipped; comments and
//! preprocessor lines are expected to be stripped by [`normalize_source`].
//!
//! [`normalize_source`]: crate::syntax::normalize_source

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

/// Half-open byte range into a unit's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LexKind {
    Identifier,
    Keyword,
    Number,
    String,
    Char,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexToken {
    pub kind: LexKind,
    pub span: Span,
}

pub const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "_Complex", "_Atomic",
    "_Noreturn", "_Thread_local", "__inline", "__restrict",
];

/// Keywords that name (part of) a primitive type.
pub const PRIMITIVE_TYPES: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "_Complex",
];

const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~",
    "&", "|", "^", "?", ":", ".",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

pub fn is_primitive_type(word: &str) -> bool {
    PRIMITIVE_TYPES.contains(&word)
}

pub fn lex(text: &str) -> Result<Vec<LexToken>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if b.is_ascii_alphabetic() || b == b'_' {
            // String/char prefixes: L"..", u8"..", u'..'.
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let word = &text[i..j];
            if j < bytes.len()
                && (bytes[j] == b'"' || bytes[j] == b'\'')
                && matches!(word, "L" | "u" | "U" | "u8")
            {
                let quote = bytes[j];
                i = scan_quoted(text, j, quote)?;
                if quote == b'"' {
                    LexKind::String
                } else {
                    LexKind::Char
                }
            } else {
                i = j;
                if is_keyword(word) {
                    LexKind::Keyword
                } else {
                    LexKind::Identifier
                }
            }
        } else if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            i = scan_number(bytes, i);
            LexKind::Number
        } else if b == b'"' || b == b'\'' {
            i = scan_quoted(text, i, b)?;
            if b == b'"' {
                LexKind::String
            } else {
                LexKind::Char
            }
        } else if matches!(b, b'(' | b')' | b'[' | b']' | b'{' | b'}' | b';' | b',') {
            i += 1;
            LexKind::Punctuation
        } else if let Some(op) = OPERATORS.iter().find(|op| text[i..].starts_with(**op)) {
            i += op.len();
            if *op == "..." {
                LexKind::Punctuation
            } else {
                LexKind::Operator
            }
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(ParseError::new(i, format!("unexpected character {ch:?}")));
        };
        tokens.push(LexToken {
            kind,
            span: Span::new(start, i),
        });
    }
    Ok(tokens)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    let hex = bytes[i] == b'0' && matches!(bytes.get(i + 1), Some(b'x' | b'X'));
    if hex {
        i += 2;
    }
    while i < bytes.len() {
        let b = bytes[i];
        let exponent = if hex {
            matches!(b, b'p' | b'P')
        } else {
            matches!(b, b'e' | b'E')
        };
        if exponent && matches!(bytes.get(i + 1), Some(b'+' | b'-')) {
            i += 2;
        } else if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' {
            i += 1;
        } else {
            break;
        }
    }
    i
}

fn scan_quoted(text: &str, start: usize, quote: u8) -> Result<usize, ParseError> {
    let bytes = text.as_bytes();
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => break,
            b if b == quote => return Ok(i + 1),
            _ => i += 1,
        }
    }
    Err(ParseError::new(start, "unterminated literal"))
}
