//! Recursive-descent parser for single C function definitions.
//!
//! The grammar covers what function bodies in ordinary C code use:
//! declarations with pointer/array/function-pointer declarators, the full
//! statement set, and expressions with C precedence. Typedef names are
//! recognized heuristically (`*_t` names, a builtin list, and the
//! `Name ident` / `Name *ident =` declaration shapes). Anything else is a
//! [`ParseError`]; there is no error recovery.

use std::collections::HashSet;

use super::lexer::{is_primitive_type, lex, LexKind, LexToken, Span};
use super::tree::{Node, NodeId, NodeKind, Syntax, SyntaxTree, Terminal};
use crate::error::ParseError;

const BUILTIN_TYPE_NAMES: &[&str] = &[
    "size_t", "ssize_t", "ptrdiff_t", "FILE", "bool", "wchar_t", "va_list", "u8", "u16", "u32",
    "u64", "s8", "s16", "s32", "s64", "uint", "uchar", "ushort", "ulong", "byte",
];

const SPECIFIER_KEYWORDS: &[&str] = &[
    "static", "extern", "register", "auto", "const", "volatile", "inline", "restrict", "typedef",
    "_Atomic", "_Noreturn", "_Thread_local", "__inline", "__restrict",
];

const QUALIFIERS: &[&str] = &["const", "volatile", "restrict", "__restrict", "_Atomic"];

const ASSIGNMENT_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=",
];

fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" => 7,
        "<<" | ">>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

/// Whether an identifier is treated as a type name without further context.
pub fn is_type_name(word: &str) -> bool {
    BUILTIN_TYPE_NAMES.contains(&word) || (word.len() > 2 && word.ends_with("_t"))
}

/// Parse the text of one function definition.
pub fn parse_function(text: &str) -> Result<SyntaxTree, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::new(0, "empty source"));
    }
    let tokens = lex(text)?;
    let mut parser = Parser {
        src: text,
        leaves: vec![None; tokens.len()],
        toks: tokens,
        pos: 0,
        nodes: Vec::new(),
        typedefs: HashSet::new(),
    };
    let root = parser.function_definition()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.error("trailing tokens after function body"));
    }
    let leaves = parser
        .leaves
        .into_iter()
        .map(|l| l.expect("every token becomes a leaf"))
        .collect();
    Ok(SyntaxTree {
        source: text.to_owned(),
        tokens: parser.toks,
        nodes: parser.nodes,
        root,
        leaves,
    })
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<LexToken>,
    pos: usize,
    nodes: Vec<Node>,
    leaves: Vec<Option<NodeId>>,
    typedefs: HashSet<String>,
}

type PResult<T> = Result<T, ParseError>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum SpecContext {
    Declaration,
    Parameter,
}

impl<'a> Parser<'a> {
    // ---- token access -------------------------------------------------

    fn text_at(&self, k: usize) -> &'a str {
        self.toks
            .get(k)
            .map(|t| t.span.slice(self.src))
            .unwrap_or("")
    }

    fn kind_at(&self, k: usize) -> Option<LexKind> {
        self.toks.get(k).map(|t| t.kind)
    }

    fn cur(&self) -> &'a str {
        self.text_at(self.pos)
    }

    fn at(&self, text: &str) -> bool {
        self.pos < self.toks.len() && self.cur() == text
    }

    fn at_kind(&self, kind: LexKind) -> bool {
        self.kind_at(self.pos) == Some(kind)
    }

    fn error(&self, message: &str) -> ParseError {
        let offset = self
            .toks
            .get(self.pos)
            .map(|t| t.span.start)
            .unwrap_or(self.src.len());
        let found = if self.pos < self.toks.len() {
            format!(" (found `{}`)", self.cur())
        } else {
            " (found end of input)".to_owned()
        };
        ParseError::new(offset, format!("{message}{found}"))
    }

    // ---- tree building ------------------------------------------------

    fn leaf_as(&mut self, terminal: Terminal) -> PResult<NodeId> {
        let Some(tok) = self.toks.get(self.pos).copied() else {
            return Err(self.error("unexpected end of input"));
        };
        let id = self.nodes.len();
        self.nodes.push(Node {
            kind: NodeKind::Leaf {
                token: self.pos,
                terminal,
            },
            span: tok.span,
            parent: None,
            children: Vec::new(),
        });
        self.leaves[self.pos] = Some(id);
        self.pos += 1;
        Ok(id)
    }

    fn leaf(&mut self) -> PResult<NodeId> {
        let terminal = match self.kind_at(self.pos) {
            Some(LexKind::Keyword) if is_primitive_type(self.cur()) => Terminal::Type,
            Some(LexKind::Keyword) => Terminal::Keyword,
            Some(LexKind::Identifier) => Terminal::Identifier,
            Some(LexKind::Number) => Terminal::NumberLiteral,
            Some(LexKind::String) => Terminal::StringLiteral,
            Some(LexKind::Char) => Terminal::CharLiteral,
            Some(LexKind::Operator) => Terminal::Operator,
            Some(LexKind::Punctuation) => Terminal::Punctuation,
            None => return Err(self.error("unexpected end of input")),
        };
        self.leaf_as(terminal)
    }

    fn expect(&mut self, text: &str) -> PResult<NodeId> {
        if self.at(text) {
            self.leaf()
        } else {
            Err(self.error(&format!("expected `{text}`")))
        }
    }

    fn make(&mut self, kind: Syntax, children: Vec<NodeId>) -> NodeId {
        debug_assert!(!children.is_empty());
        let id = self.nodes.len();
        let span = Span::new(
            self.nodes[children[0]].span.start,
            self.nodes[*children.last().unwrap()].span.end,
        );
        for &c in &children {
            self.nodes[c].parent = Some(id);
        }
        self.nodes.push(Node {
            kind: NodeKind::Inner(kind),
            span,
            parent: None,
            children,
        });
        id
    }

    // ---- classification ------------------------------------------------

    fn is_type_ident(&self, word: &str) -> bool {
        is_type_name(word) || self.typedefs.contains(word)
    }

    fn is_specifier_keyword_at(&self, k: usize) -> bool {
        let t = self.text_at(k);
        self.kind_at(k) == Some(LexKind::Keyword)
            && (SPECIFIER_KEYWORDS.contains(&t)
                || is_primitive_type(t)
                || matches!(t, "struct" | "union" | "enum"))
    }

    /// Whether the statement at the cursor is a declaration.
    fn at_declaration(&self) -> bool {
        let k = self.pos;
        if self.is_specifier_keyword_at(k) {
            return true;
        }
        if self.kind_at(k) != Some(LexKind::Identifier) {
            return false;
        }
        let next = self.text_at(k + 1);
        let next_kind = self.kind_at(k + 1);
        if next_kind == Some(LexKind::Identifier) {
            return true;
        }
        if self.is_type_ident(self.text_at(k))
            && (next == "*" || QUALIFIERS.contains(&next))
        {
            return true;
        }
        if next == "*" {
            let mut j = k + 1;
            while self.text_at(j) == "*" || QUALIFIERS.contains(&self.text_at(j)) {
                j += 1;
            }
            return self.kind_at(j) == Some(LexKind::Identifier)
                && matches!(self.text_at(j + 1), "=" | ";" | "," | "[");
        }
        false
    }

    /// Whether a type name starts at token `k` (used after `(` for casts
    /// and `sizeof`).
    fn type_starts_at(&self, k: usize) -> bool {
        if self.is_specifier_keyword_at(k) {
            return true;
        }
        if self.kind_at(k) != Some(LexKind::Identifier) {
            return false;
        }
        let word = self.text_at(k);
        let mut j = k + 1;
        let mut stars = 0;
        while self.text_at(j) == "*" || QUALIFIERS.contains(&self.text_at(j)) {
            stars += 1;
            j += 1;
        }
        self.text_at(j) == ")" && (self.is_type_ident(word) || stars > 0)
    }

    // ---- declarations --------------------------------------------------

    fn function_definition(&mut self) -> PResult<NodeId> {
        let mut children = self.specifiers(SpecContext::Declaration)?;
        let declarator = self
            .declarator(false)?
            .ok_or_else(|| self.error("expected function declarator"))?;
        children.push(declarator);
        if !self.at("{") {
            return Err(self.error("expected function body"));
        }
        let body = self.compound()?;
        children.push(body);
        let root = self.make(Syntax::FuncDefinition, children);
        let tmp = SyntaxTreeView {
            nodes: &self.nodes,
        };
        if !tmp.has_function_declarator(declarator) {
            return Err(ParseError::new(
                self.nodes[declarator].span.start,
                "declarator is not a function",
            ));
        }
        Ok(root)
    }

    /// Declaration specifiers, returned as children to splice into the
    /// enclosing declaration node.
    fn specifiers(&mut self, ctx: SpecContext) -> PResult<Vec<NodeId>> {
        let mut items: Vec<(NodeId, bool)> = Vec::new();
        let mut saw_type = false;
        loop {
            let t = self.cur();
            let kind = self.kind_at(self.pos);
            if kind == Some(LexKind::Keyword) && SPECIFIER_KEYWORDS.contains(&t) {
                items.push((self.leaf()?, false));
            } else if kind == Some(LexKind::Keyword) && is_primitive_type(t) {
                items.push((self.leaf()?, true));
                saw_type = true;
            } else if kind == Some(LexKind::Keyword) && matches!(t, "struct" | "union" | "enum") {
                let kw = self.leaf()?;
                if !self.at_kind(LexKind::Identifier) {
                    return Err(self.error("expected tag name (inline bodies are unsupported)"));
                }
                let tag = self.leaf_as(Terminal::Type)?;
                if self.at("{") {
                    return Err(self.error("inline struct bodies are unsupported"));
                }
                items.push((self.make(Syntax::StructSpecifier, vec![kw, tag]), false));
                saw_type = true;
            } else if kind == Some(LexKind::Identifier) && !saw_type && self.ident_is_type(ctx) {
                items.push((self.leaf_as(Terminal::Type)?, false));
                saw_type = true;
            } else {
                break;
            }
        }
        if !saw_type {
            return Err(self.error("expected type specifier"));
        }
        // Group runs of primitive keywords (`unsigned long long`).
        let mut out = Vec::new();
        let mut run: Vec<NodeId> = Vec::new();
        for (id, prim) in items {
            if prim {
                run.push(id);
                continue;
            }
            self.flush_primitive_run(&mut run, &mut out);
            out.push(id);
        }
        self.flush_primitive_run(&mut run, &mut out);
        Ok(out)
    }

    fn flush_primitive_run(&mut self, run: &mut Vec<NodeId>, out: &mut Vec<NodeId>) {
        match run.len() {
            0 => {}
            1 => out.push(run[0]),
            _ => {
                let sized = self.make(Syntax::SizedType, std::mem::take(run));
                out.push(sized);
            }
        }
        run.clear();
    }

    /// Whether the identifier at the cursor names a type in a specifier list
    /// that has not yet seen a type.
    fn ident_is_type(&self, ctx: SpecContext) -> bool {
        let word = self.cur();
        if self.is_type_ident(word) {
            return true;
        }
        let next = self.text_at(self.pos + 1);
        if self.kind_at(self.pos + 1) == Some(LexKind::Identifier) || next == "*" {
            return true;
        }
        if QUALIFIERS.contains(&next) {
            return true;
        }
        ctx == SpecContext::Parameter && matches!(next, ")" | ",")
    }

    /// Declarator; returns `None` for an absent abstract declarator.
    fn declarator(&mut self, abstract_ok: bool) -> PResult<Option<NodeId>> {
        if self.at("*") {
            let mut children = vec![self.leaf()?];
            while QUALIFIERS.contains(&self.cur()) && self.at_kind(LexKind::Keyword) {
                children.push(self.leaf()?);
            }
            let inner = self.declarator(abstract_ok)?;
            let kind = match inner {
                Some(inner) => {
                    children.push(inner);
                    if self.nodes[inner].kind == NodeKind::Inner(Syntax::AbstractDeclarator) {
                        Syntax::AbstractDeclarator
                    } else {
                        Syntax::PointerDeclarator
                    }
                }
                None => Syntax::AbstractDeclarator,
            };
            return Ok(Some(self.make(kind, children)));
        }
        let mut base = if self.at_kind(LexKind::Identifier) {
            Some(self.leaf_as(Terminal::Identifier)?)
        } else if self.at("(") && matches!(self.text_at(self.pos + 1), "*" | "(") {
            let open = self.leaf()?;
            let inner = self
                .declarator(abstract_ok)?
                .ok_or_else(|| self.error("expected declarator"))?;
            let close = self.expect(")")?;
            Some(self.make(Syntax::ParenthesizedDeclarator, vec![open, inner, close]))
        } else if abstract_ok {
            None
        } else {
            return Err(self.error("expected declarator"));
        };
        loop {
            if self.at("[") {
                let mut children: Vec<NodeId> = base.into_iter().collect();
                children.push(self.leaf()?);
                if !self.at("]") {
                    children.push(self.expression()?);
                }
                children.push(self.expect("]")?);
                let kind = if base.is_some() {
                    Syntax::ArrayDeclarator
                } else {
                    Syntax::AbstractDeclarator
                };
                base = Some(self.make(kind, children));
            } else if self.at("(") && base.is_some() {
                let params = self.parameter_list()?;
                base = Some(self.make(Syntax::FuncDeclarator, vec![base.unwrap(), params]));
            } else {
                break;
            }
        }
        Ok(base)
    }

    fn parameter_list(&mut self) -> PResult<NodeId> {
        let mut children = vec![self.expect("(")?];
        if !self.at(")") {
            loop {
                if self.at("...") {
                    children.push(self.leaf()?);
                } else {
                    let mut decl = self.specifiers(SpecContext::Parameter)?;
                    if let Some(d) = self.declarator(true)? {
                        decl.push(d);
                    }
                    children.push(self.make(Syntax::ParameterDeclaration, decl));
                }
                if self.at(",") {
                    children.push(self.leaf()?);
                } else {
                    break;
                }
            }
        }
        children.push(self.expect(")")?);
        Ok(self.make(Syntax::ParameterList, children))
    }

    fn declaration(&mut self) -> PResult<NodeId> {
        let mut children = self.specifiers(SpecContext::Declaration)?;
        let is_typedef = children
            .iter()
            .any(|&c| self.leaf_text(c) == Some("typedef"));
        loop {
            let d = self
                .declarator(false)?
                .ok_or_else(|| self.error("expected declarator"))?;
            if is_typedef {
                let view = SyntaxTreeView { nodes: &self.nodes };
                if let Some(name) = view.declarator_name(d) {
                    let text = self.nodes[name].span.slice(self.src).to_owned();
                    self.typedefs.insert(text);
                }
            }
            let d = if self.at("=") {
                let eq = self.leaf()?;
                let value = self.initializer()?;
                self.make(Syntax::InitDeclarator, vec![d, eq, value])
            } else {
                d
            };
            children.push(d);
            if self.at(",") {
                children.push(self.leaf()?);
            } else {
                break;
            }
        }
        children.push(self.expect(";")?);
        Ok(self.make(Syntax::Declaration, children))
    }

    fn leaf_text(&self, id: NodeId) -> Option<&'a str> {
        match self.nodes[id].kind {
            NodeKind::Leaf { .. } => Some(self.nodes[id].span.slice(self.src)),
            NodeKind::Inner(_) => None,
        }
    }

    fn initializer(&mut self) -> PResult<NodeId> {
        if self.at("{") {
            self.initializer_list()
        } else {
            self.assignment()
        }
    }

    fn initializer_list(&mut self) -> PResult<NodeId> {
        let mut children = vec![self.expect("{")?];
        while !self.at("}") {
            if self.at(".") || self.at("[") {
                let mut pair = Vec::new();
                while self.at(".") || self.at("[") {
                    if self.at(".") {
                        pair.push(self.leaf()?);
                        if !self.at_kind(LexKind::Identifier) {
                            return Err(self.error("expected field designator"));
                        }
                        pair.push(self.leaf_as(Terminal::FieldIdentifier)?);
                    } else {
                        pair.push(self.leaf()?);
                        pair.push(self.conditional()?);
                        pair.push(self.expect("]")?);
                    }
                }
                pair.push(self.expect("=")?);
                pair.push(self.initializer()?);
                children.push(self.make(Syntax::InitializerPair, pair));
            } else {
                children.push(self.initializer()?);
            }
            if self.at(",") {
                children.push(self.leaf()?);
            } else {
                break;
            }
        }
        children.push(self.expect("}")?);
        Ok(self.make(Syntax::InitializerList, children))
    }

    fn type_descriptor(&mut self) -> PResult<NodeId> {
        let mut children = self.specifiers(SpecContext::Parameter)?;
        if let Some(d) = self.declarator(true)? {
            children.push(d);
        }
        Ok(self.make(Syntax::TypeDescriptor, children))
    }

    // ---- statements ----------------------------------------------------

    fn compound(&mut self) -> PResult<NodeId> {
        let mut children = vec![self.expect("{")?];
        while !self.at("}") {
            if self.pos >= self.toks.len() {
                return Err(self.error("unclosed block"));
            }
            children.push(self.statement()?);
        }
        children.push(self.expect("}")?);
        Ok(self.make(Syntax::CompoundStmt, children))
    }

    fn parenthesized(&mut self) -> PResult<NodeId> {
        let open = self.expect("(")?;
        let inner = self.expression()?;
        let close = self.expect(")")?;
        Ok(self.make(Syntax::ParenthesizedExpr, vec![open, inner, close]))
    }

    fn statement(&mut self) -> PResult<NodeId> {
        if self.pos >= self.toks.len() {
            return Err(self.error("expected statement"));
        }
        let keyword = self.at_kind(LexKind::Keyword);
        match self.cur() {
            "{" => self.compound(),
            ";" => {
                let semi = self.leaf()?;
                Ok(self.make(Syntax::ExpressionStmt, vec![semi]))
            }
            "if" if keyword => {
                let mut children = vec![self.leaf()?, self.parenthesized()?, self.statement()?];
                if self.at("else") {
                    children.push(self.leaf()?);
                    children.push(self.statement()?);
                }
                Ok(self.make(Syntax::IfStmt, children))
            }
            "while" if keyword => {
                let children = vec![self.leaf()?, self.parenthesized()?, self.statement()?];
                Ok(self.make(Syntax::WhileStmt, children))
            }
            "do" if keyword => {
                let children = vec![
                    self.leaf()?,
                    self.statement()?,
                    self.expect("while")?,
                    self.parenthesized()?,
                    self.expect(";")?,
                ];
                Ok(self.make(Syntax::DoStmt, children))
            }
            "for" if keyword => self.for_statement(),
            "switch" if keyword => {
                let children = vec![self.leaf()?, self.parenthesized()?, self.statement()?];
                Ok(self.make(Syntax::SwitchStmt, children))
            }
            "case" if keyword => {
                let children = vec![self.leaf()?, self.conditional()?, self.expect(":")?];
                Ok(self.make(Syntax::CaseStmt, children))
            }
            "default" if keyword => {
                let children = vec![self.leaf()?, self.expect(":")?];
                Ok(self.make(Syntax::CaseStmt, children))
            }
            "return" if keyword => {
                let mut children = vec![self.leaf()?];
                if !self.at(";") {
                    children.push(self.expression()?);
                }
                children.push(self.expect(";")?);
                Ok(self.make(Syntax::ReturnStmt, children))
            }
            "break" if keyword => {
                let children = vec![self.leaf()?, self.expect(";")?];
                Ok(self.make(Syntax::BreakStmt, children))
            }
            "continue" if keyword => {
                let children = vec![self.leaf()?, self.expect(";")?];
                Ok(self.make(Syntax::ContinueStmt, children))
            }
            "goto" if keyword => {
                let kw = self.leaf()?;
                if !self.at_kind(LexKind::Identifier) {
                    return Err(self.error("expected label"));
                }
                let label = self.leaf_as(Terminal::Identifier)?;
                let semi = self.expect(";")?;
                Ok(self.make(Syntax::GotoStmt, vec![kw, label, semi]))
            }
            _ if self.at_kind(LexKind::Identifier) && self.text_at(self.pos + 1) == ":" => {
                let label = self.leaf_as(Terminal::Identifier)?;
                let colon = self.leaf()?;
                Ok(self.make(Syntax::LabeledStmt, vec![label, colon]))
            }
            _ if self.at_declaration() => self.declaration(),
            _ => {
                let expr = self.expression()?;
                let semi = self.expect(";")?;
                Ok(self.make(Syntax::ExpressionStmt, vec![expr, semi]))
            }
        }
    }

    fn for_statement(&mut self) -> PResult<NodeId> {
        let mut children = vec![self.leaf()?, self.expect("(")?];
        if self.at(";") {
            children.push(self.leaf()?);
        } else if self.at_declaration() {
            children.push(self.declaration()?);
        } else {
            children.push(self.expression()?);
            children.push(self.expect(";")?);
        }
        if !self.at(";") {
            children.push(self.expression()?);
        }
        children.push(self.expect(";")?);
        if !self.at(")") {
            children.push(self.expression()?);
        }
        children.push(self.expect(")")?);
        children.push(self.statement()?);
        Ok(self.make(Syntax::ForStmt, children))
    }

    // ---- expressions ---------------------------------------------------

    fn expression(&mut self) -> PResult<NodeId> {
        let mut left = self.assignment()?;
        while self.at(",") {
            let comma = self.leaf()?;
            let right = self.assignment()?;
            left = self.make(Syntax::CommaExpr, vec![left, comma, right]);
        }
        Ok(left)
    }

    fn assignment(&mut self) -> PResult<NodeId> {
        let left = self.conditional()?;
        if self.at_kind(LexKind::Operator) && ASSIGNMENT_OPS.contains(&self.cur()) {
            let op = self.leaf()?;
            let right = self.assignment()?;
            return Ok(self.make(Syntax::AssignmentExpr, vec![left, op, right]));
        }
        Ok(left)
    }

    fn conditional(&mut self) -> PResult<NodeId> {
        let cond = self.binary(1)?;
        if self.at("?") {
            let q = self.leaf()?;
            let then = self.expression()?;
            let colon = self.expect(":")?;
            let otherwise = self.conditional()?;
            return Ok(self.make(Syntax::ConditionalExpr, vec![cond, q, then, colon, otherwise]));
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<NodeId> {
        let mut left = self.unary()?;
        while self.at_kind(LexKind::Operator) {
            let Some(prec) = binary_precedence(self.cur()) else {
                break;
            };
            if prec < min_prec {
                break;
            }
            let op = self.leaf()?;
            let right = self.binary(prec + 1)?;
            left = self.make(Syntax::BinaryExpr, vec![left, op, right]);
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<NodeId> {
        let op_kind = self.at_kind(LexKind::Operator);
        match self.cur() {
            "++" | "--" if op_kind => {
                let op = self.leaf()?;
                let operand = self.unary()?;
                Ok(self.make(Syntax::UpdateExpr, vec![op, operand]))
            }
            "*" | "&" if op_kind => {
                let op = self.leaf()?;
                let operand = self.unary()?;
                Ok(self.make(Syntax::PointerExpr, vec![op, operand]))
            }
            "+" | "-" | "!" | "~" if op_kind => {
                let op = self.leaf()?;
                let operand = self.unary()?;
                Ok(self.make(Syntax::UnaryExpr, vec![op, operand]))
            }
            "sizeof" if self.at_kind(LexKind::Keyword) => {
                let kw = self.leaf()?;
                if self.at("(") && self.type_starts_at(self.pos + 1) {
                    let open = self.leaf()?;
                    let ty = self.type_descriptor()?;
                    let close = self.expect(")")?;
                    Ok(self.make(Syntax::SizeofExpr, vec![kw, open, ty, close]))
                } else {
                    let operand = self.unary()?;
                    Ok(self.make(Syntax::SizeofExpr, vec![kw, operand]))
                }
            }
            "(" if self.type_starts_at(self.pos + 1) => {
                let open = self.leaf()?;
                let ty = self.type_descriptor()?;
                let close = self.expect(")")?;
                if self.at("{") {
                    return Err(self.error("compound literals are unsupported"));
                }
                let operand = self.unary()?;
                Ok(self.make(Syntax::CastExpr, vec![open, ty, close, operand]))
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<NodeId> {
        let mut expr = self.primary()?;
        loop {
            match self.cur() {
                "(" if self.pos < self.toks.len() => {
                    let mut args = vec![self.leaf()?];
                    if !self.at(")") {
                        loop {
                            args.push(self.assignment()?);
                            if self.at(",") {
                                args.push(self.leaf()?);
                            } else {
                                break;
                            }
                        }
                    }
                    args.push(self.expect(")")?);
                    let list = self.make(Syntax::ArgumentList, args);
                    expr = self.make(Syntax::CallExpr, vec![expr, list]);
                }
                "[" => {
                    let open = self.leaf()?;
                    let index = self.expression()?;
                    let close = self.expect("]")?;
                    expr = self.make(Syntax::SubscriptExpr, vec![expr, open, index, close]);
                }
                "." | "->" => {
                    let op = self.leaf()?;
                    if !self.at_kind(LexKind::Identifier) {
                        return Err(self.error("expected field name"));
                    }
                    let field = self.leaf_as(Terminal::FieldIdentifier)?;
                    expr = self.make(Syntax::FieldExpr, vec![expr, op, field]);
                }
                "++" | "--" => {
                    let op = self.leaf()?;
                    expr = self.make(Syntax::UpdateExpr, vec![expr, op]);
                }
                _ => break,
            }
        }
        Ok(expr)
    }

    fn primary(&mut self) -> PResult<NodeId> {
        match self.kind_at(self.pos) {
            Some(LexKind::Identifier) => self.leaf_as(Terminal::Identifier),
            Some(LexKind::Number) | Some(LexKind::Char) => self.leaf(),
            Some(LexKind::String) => {
                let first = self.leaf()?;
                if !self.at_kind(LexKind::String) {
                    return Ok(first);
                }
                let mut parts = vec![first];
                while self.at_kind(LexKind::String) {
                    parts.push(self.leaf()?);
                }
                Ok(self.make(Syntax::ConcatenatedString, parts))
            }
            Some(LexKind::Punctuation) if self.at("(") => self.parenthesized(),
            _ => Err(self.error("expected expression")),
        }
    }
}

/// Read-only helpers over the partially built arena.
struct SyntaxTreeView<'n> {
    nodes: &'n [Node],
}

impl SyntaxTreeView<'_> {
    fn syntax(&self, id: NodeId) -> Option<Syntax> {
        match self.nodes[id].kind {
            NodeKind::Inner(s) => Some(s),
            NodeKind::Leaf { .. } => None,
        }
    }

    fn declarator_name(&self, id: NodeId) -> Option<NodeId> {
        match self.nodes[id].kind {
            NodeKind::Leaf {
                terminal: Terminal::Identifier,
                ..
            } => Some(id),
            NodeKind::Leaf { .. } => None,
            NodeKind::Inner(_) => self.nodes[id]
                .children
                .iter()
                .find_map(|&c| self.declarator_name(c)),
        }
    }

    fn has_function_declarator(&self, id: NodeId) -> bool {
        match self.syntax(id) {
            Some(Syntax::FuncDeclarator) => true,
            Some(Syntax::PointerDeclarator | Syntax::ParenthesizedDeclarator) => self.nodes[id]
                .children
                .iter()
                .any(|&c| self.has_function_declarator(c)),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sexp(tree: &SyntaxTree, id: NodeId) -> String {
        match tree.syntax(id) {
            None => tree.text(id).to_owned(),
            Some(s) => {
                let inner: Vec<_> = tree.children(id).iter().map(|&c| sexp(tree, c)).collect();
                format!("({} {})", s.label(), inner.join(" "))
            }
        }
    }

    fn parse_sexp(text: &str) -> String {
        let tree = parse_function(text).unwrap();
        sexp(&tree, tree.root())
    }

    #[test]
    fn minimal_function() {
        let tree = parse_function("int f(){return 0;}").unwrap();
        assert!(tree.is(tree.root(), Syntax::FuncDefinition));
        assert_eq!(
            sexp(&tree, tree.root()),
            "(func_definition int (func_declarator f (parameter_list ( ))) \
             (compound_stmt { (return_stmt return 0 ;) }))"
        );
    }

    #[test]
    fn unbalanced_delimiter_is_rejected() {
        assert!(parse_function("int f( {").is_err());
        assert!(parse_function("int f() { return 0;").is_err());
        assert!(parse_function("").is_err());
        assert!(parse_function("int x;").is_err());
    }

    #[test]
    fn precedence_and_assignment() {
        let s = parse_sexp("void f(){ x = a + b * c < d && e; }");
        assert!(s.contains(
            "(assignment_expr x = (binary_expr (binary_expr (binary_expr a + (binary_expr b * c)) < d) && e))"
        ), "{s}");
    }

    #[test]
    fn declarations_and_declarators() {
        let s = parse_sexp("void f(){ unsigned long n = 0, *p; char buf[16]; Foo *q = NULL; size_t k; }");
        assert!(s.contains("(declaration (sized_type unsigned long) (init_declarator n = 0) , (pointer_declarator * p) ;)"), "{s}");
        assert!(s.contains("(declaration char (array_declarator buf [ 16 ]) ;)"), "{s}");
        assert!(s.contains("(declaration Foo (init_declarator (pointer_declarator * q) = NULL) ;)"), "{s}");
        assert!(s.contains("(declaration size_t k ;)"), "{s}");
    }

    #[test]
    fn casts_sizeof_and_calls() {
        let s = parse_sexp("void f(){ p = (char *)malloc(sizeof(int) * n); m = sizeof x; }");
        assert!(s.contains("(cast_expr ( (type_descriptor char (abstract_declarator *)) ) (call_expr malloc"), "{s}");
        assert!(s.contains("(sizeof_expr sizeof ( (type_descriptor int) ))"), "{s}");
        assert!(s.contains("(sizeof_expr sizeof x)"), "{s}");
    }

    #[test]
    fn control_flow() {
        let text = "int g(int *a, int n) {\n  int i;\n  for (i = 0; i < n; i++) {\n    if (a[i] == 0) continue;\n  }\n  while (n--) a[n] = 1;\n  do { n++; } while (n < 3);\n  switch (n) { case 1: break; default: n = 0; }\n  goto out;\nout:\n  return -1;\n}";
        let tree = parse_function(text).unwrap();
        let kinds: HashSet<_> = tree.preorder().filter_map(|n| tree.syntax(n)).collect();
        for k in [
            Syntax::ForStmt,
            Syntax::IfStmt,
            Syntax::ContinueStmt,
            Syntax::WhileStmt,
            Syntax::DoStmt,
            Syntax::SwitchStmt,
            Syntax::CaseStmt,
            Syntax::GotoStmt,
            Syntax::LabeledStmt,
            Syntax::UpdateExpr,
            Syntax::SubscriptExpr,
        ] {
            assert!(kinds.contains(&k), "missing {k:?}");
        }
    }

    #[test]
    fn pointer_returning_function_and_fn_pointer_param() {
        let tree =
            parse_function("static char *dup(const char *s, int (*cmp)(const void *, const void *)) { return 0; }")
                .unwrap();
        let name = tree.function_name().unwrap();
        assert_eq!(tree.text(name), "dup");
        let params = tree
            .preorder()
            .filter(|&n| tree.is(n, Syntax::ParameterDeclaration))
            .count();
        assert_eq!(params, 4);
    }

    #[test]
    fn fields_and_initializer_lists() {
        let s = parse_sexp("void f(){ struct point p = { .x = 1, [2] = 3, 4 }; q->len = p.x; }");
        assert!(s.contains("(struct_specifier struct point)"), "{s}");
        assert!(s.contains("(initializer_pair . x = 1)"), "{s}");
        assert!(s.contains("(field_expr q -> len)"), "{s}");
    }

    #[test]
    fn leaves_cover_every_token() {
        let tree = parse_function("int f(int a){ return a ? a : -a; }").unwrap();
        assert_eq!(tree.leaves().len(), tree.tokens().len());
        for (i, &leaf) in tree.leaves().iter().enumerate() {
            assert_eq!(tree.span(leaf), tree.tokens()[i].span);
        }
    }
}
