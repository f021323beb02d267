//! Scope tables, def-use facts and the transform menu of a function.

mod graph;
pub(crate) mod menu;
mod scope;

use std::collections::HashSet;

pub use graph::{build_flow_graph, DataEdge, FlowGraph};
pub use menu::{applicable_transforms, Site, TransformMenu, COMPARISON_OPERATORS};
pub use scope::{resolve_scopes, Def, DefId, DefKind, Scope, ScopeId, ScopeTable, Use};

use crate::error::ParseError;
use crate::syntax::{parse_source, NodeId, SourceUnit, Syntax, SyntaxTree};

/// A parsed unit with its scope table and flow graph.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub unit: SourceUnit,
    pub tree: SyntaxTree,
    pub scopes: ScopeTable,
    pub graph: FlowGraph,
}

impl Analysis {
    pub fn new(unit: SourceUnit) -> Result<Self, ParseError> {
        let tree = parse_source(&unit)?;
        let scopes = resolve_scopes(&tree);
        let graph = build_flow_graph(&tree, &scopes);
        Ok(Self {
            unit,
            tree,
            scopes,
            graph,
        })
    }

    pub fn text(&self) -> &str {
        &self.unit.text
    }
}

/// Names that look like constants or macros (`MAX_LEN`, `NULL`).
pub fn is_constant_name(name: &str) -> bool {
    name.chars().any(|c| c.is_ascii_uppercase())
        && name
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

/// Top-level declarations of the function body that can be moved to the
/// start of the function: their initializers reference no local variable or
/// parameter and have no side effects, any outside name they reference looks
/// like a constant, and none of the names they declare appears earlier in the
/// body.
pub fn independent_declarations(tree: &SyntaxTree, scopes: &ScopeTable) -> Vec<NodeId> {
    let Some(body) = tree.function_body() else {
        return Vec::new();
    };
    let stmts: Vec<NodeId> = tree
        .children(body)
        .iter()
        .copied()
        .filter(|&c| tree.syntax(c).is_some_and(Syntax::is_statement))
        .collect();
    let mut earlier_idents: HashSet<&str> = HashSet::new();
    let mut out = Vec::new();
    for &stmt in &stmts {
        if tree.is(stmt, Syntax::Declaration) && is_independent(tree, scopes, stmt, &earlier_idents) {
            out.push(stmt);
        }
        for leaf in tree.leaves_of(stmt) {
            earlier_idents.insert(tree.text(leaf));
        }
    }
    out
}

fn is_independent(
    tree: &SyntaxTree,
    scopes: &ScopeTable,
    decl: NodeId,
    earlier: &HashSet<&str>,
) -> bool {
    let declared: Vec<&str> = scopes
        .defs()
        .iter()
        .filter(|d| d.decl == decl)
        .map(|d| d.name.as_str())
        .collect();
    if declared.is_empty() || declared.iter().any(|n| earlier.contains(n)) {
        return false;
    }
    for n in tree.descendants(decl) {
        if matches!(
            tree.syntax(n),
            Some(Syntax::CallExpr | Syntax::AssignmentExpr | Syntax::UpdateExpr)
        ) {
            return false;
        }
        if let Some(u) = scopes.use_at(n) {
            if u.binding.is_some() || !is_constant_name(&u.name) {
                return false;
            }
        }
    }
    true
}

/// A local variable used as the right operand of `/`, `%`, `/=` or `%=`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divisor {
    pub def: DefId,
    /// Division expression nodes, in source order.
    pub sites: Vec<NodeId>,
}

/// Locally defined divisor variables, deduplicated, in order of first
/// division.
pub fn find_divisors(tree: &SyntaxTree, scopes: &ScopeTable) -> Vec<Divisor> {
    let mut out: Vec<Divisor> = Vec::new();
    for node in tree.preorder() {
        if !matches!(
            tree.syntax(node),
            Some(Syntax::BinaryExpr | Syntax::AssignmentExpr)
        ) {
            continue;
        }
        let children = tree.children(node);
        if !matches!(tree.text(children[1]), "/" | "%" | "/=" | "%=") {
            continue;
        }
        let Some(def) = bare_variable(tree, scopes, children[2]) else {
            continue;
        };
        match out.iter_mut().find(|d| d.def == def) {
            Some(d) => d.sites.push(node),
            None => out.push(Divisor {
                def,
                sites: vec![node],
            }),
        }
    }
    out.sort_by_key(|d| tree.span(d.sites[0]).start);
    out
}

/// The local def named by an expression that is a bare, possibly
/// parenthesized, identifier.
fn bare_variable(tree: &SyntaxTree, scopes: &ScopeTable, mut expr: NodeId) -> Option<DefId> {
    while tree.is(expr, Syntax::ParenthesizedExpr) {
        expr = tree.children(expr)[1];
    }
    scopes.use_at(expr)?.binding
}
