//! Candidate sites for every transform kind.

use std::collections::{BTreeMap, HashSet};

use super::scope::DefId;
use super::{find_divisors, independent_declarations, Analysis};
use crate::syntax::{NodeId, Span, Syntax, SyntaxTree};
use crate::transform::{demotions, LibraryAllowlist, TransformKind};

pub const COMPARISON_OPERATORS: [&str; 6] = ["<", ">", "<=", ">=", "==", "!="];

/// Maximum number of lines in the body of a removable if-statement.
const SMALL_IF_LINES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Site {
    /// A local variable or parameter to rename.
    Variable { def: DefId },
    /// A non-library callee and every occurrence of its name.
    Callee { name: String, idents: Vec<NodeId> },
    /// A hoistable declaration statement.
    Declaration { decl: NodeId },
    /// A numeric type specifier with smaller replacements.
    NumericType {
        decl: NodeId,
        spec: NodeId,
        smaller: &'static [&'static str],
    },
    /// Initialized pointer declarator.
    PointerInit { declarator: NodeId, value: NodeId },
    /// Plain assignment to a pointer variable.
    PointerAssign { assign: NodeId, value: NodeId },
    /// If-statement without else and a small body.
    SmallIf { stmt: NodeId, body: NodeId },
    /// Comparison operator leaf.
    Comparison { op: NodeId },
    /// A variable use with the compatible variables reachable there.
    VariableUse { ident: NodeId, alternatives: Vec<DefId> },
    /// Initialized non-pointer declarator.
    Initializer { declarator: NodeId, value: NodeId },
    /// Divisor variable and the block-level statement containing a division
    /// by it.
    Divisor { def: DefId, stmt: NodeId },
    /// Call with at least one argument.
    Call { call: NodeId, args: Vec<NodeId> },
}

impl Site {
    pub fn span(&self, a: &Analysis) -> Span {
        let t = &a.tree;
        match *self {
            Site::Variable { def } => t.span(a.scopes.def(def).ident),
            Site::Callee { ref idents, .. } => t.span(idents[0]),
            Site::Declaration { decl } | Site::NumericType { decl, .. } => t.span(decl),
            Site::PointerInit { declarator, .. } | Site::Initializer { declarator, .. } => {
                t.span(declarator)
            }
            Site::PointerAssign { assign, .. } => t.span(assign),
            Site::SmallIf { stmt, .. } | Site::Divisor { stmt, .. } => t.span(stmt),
            Site::Comparison { op } => t.span(op),
            Site::VariableUse { ident, .. } => t.span(ident),
            Site::Call { call, .. } => t.span(call),
        }
    }
}

/// Every transform kind with at least one site. Kinds without sites are
/// absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransformMenu {
    pub sites: BTreeMap<TransformKind, Vec<Site>>,
}

impl TransformMenu {
    pub fn contains(&self, kind: TransformKind) -> bool {
        self.sites.contains_key(&kind)
    }

    pub fn sites(&self, kind: TransformKind) -> &[Site] {
        self.sites.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn kinds(&self) -> impl Iterator<Item = TransformKind> + '_ {
        self.sites.keys().copied()
    }

    pub fn positive_kinds(&self) -> Vec<TransformKind> {
        self.kinds().filter(|k| k.is_positive()).collect()
    }

    pub fn negative_kinds(&self) -> Vec<TransformKind> {
        self.kinds().filter(|k| !k.is_positive()).collect()
    }

    fn insert(&mut self, kind: TransformKind, sites: Vec<Site>) {
        if !sites.is_empty() {
            self.sites.insert(kind, sites);
        }
    }
}

pub fn applicable_transforms(a: &Analysis, library: &LibraryAllowlist) -> TransformMenu {
    let mut menu = TransformMenu::default();
    menu.insert(TransformKind::VarRename, variable_sites(a));
    menu.insert(TransformKind::FuncRename, callee_sites(a, library));
    menu.insert(TransformKind::Permute, hoist_sites(a));
    menu.insert(TransformKind::DataType, numeric_type_sites(a));
    menu.insert(TransformKind::Pointer, pointer_sites(a));
    menu.insert(TransformKind::Conditional, conditional_sites(a));
    menu.insert(TransformKind::VarMisuse, variable_use_sites(a));
    menu.insert(TransformKind::ValueMisuse, value_sites(a));
    menu.insert(TransformKind::CallMutation, call_sites(a));
    menu
}

pub(crate) fn variable_sites(a: &Analysis) -> Vec<Site> {
    (0..a.scopes.defs().len())
        .map(|def| Site::Variable { def })
        .collect()
}

pub(crate) fn callee_sites(a: &Analysis, library: &LibraryAllowlist) -> Vec<Site> {
    let tree = &a.tree;
    let mut names: Vec<&str> = Vec::new();
    for u in a.scopes.external_uses() {
        let is_callee = tree.parent(u.ident).is_some_and(|p| {
            tree.is(p, Syntax::CallExpr) && tree.children(p)[0] == u.ident
        });
        if is_callee && !library.contains(&u.name) && !names.contains(&u.name.as_str()) {
            names.push(&u.name);
        }
    }
    let own_name = tree.function_name();
    names
        .into_iter()
        .map(|name| {
            let mut idents: Vec<NodeId> = a
                .scopes
                .external_uses()
                .filter(|u| u.name == name)
                .map(|u| u.ident)
                .collect();
            if let Some(own) = own_name.filter(|&n| tree.text(n) == name) {
                idents.insert(0, own);
            }
            Site::Callee {
                name: name.to_owned(),
                idents,
            }
        })
        .collect()
}

pub(crate) fn hoist_sites(a: &Analysis) -> Vec<Site> {
    let decls = independent_declarations(&a.tree, &a.scopes);
    if decls.len() < 2 {
        return Vec::new();
    }
    decls
        .into_iter()
        .map(|decl| Site::Declaration { decl })
        .collect()
}

/// Declarations inside the body that introduce at least one variable.
fn local_declarations<'a>(a: &'a Analysis) -> impl Iterator<Item = NodeId> + 'a {
    let mut seen = HashSet::new();
    a.scopes
        .defs()
        .iter()
        .filter(|d| a.tree.is(d.decl, Syntax::Declaration))
        .map(|d| d.decl)
        .filter(move |&d| seen.insert(d))
}

pub(crate) fn numeric_type_sites(a: &Analysis) -> Vec<Site> {
    let tree = &a.tree;
    let mut out = Vec::new();
    for decl in local_declarations(a) {
        let plain = a
            .scopes
            .defs()
            .iter()
            .filter(|d| d.decl == decl)
            .all(|d| d.pointer_depth == 0 && !d.is_array);
        if !plain {
            continue;
        }
        let specs: Vec<NodeId> = tree.type_specifiers(decl).collect();
        if let [spec] = specs[..] {
            let smaller = demotions(&tree.type_text(decl));
            if !smaller.is_empty() {
                out.push(Site::NumericType {
                    decl,
                    spec,
                    smaller,
                });
            }
        }
    }
    out
}

fn is_null_literal(tree: &SyntaxTree, node: NodeId) -> bool {
    matches!(tree.text(node), "NULL" | "0" | "nullptr")
}

pub(crate) fn pointer_sites(a: &Analysis) -> Vec<Site> {
    let tree = &a.tree;
    let mut out = Vec::new();
    for d in a.scopes.defs() {
        if d.pointer_depth == 0 || d.is_array || !tree.is(d.decl, Syntax::Declaration) {
            continue;
        }
        if let Some(value) = tree.initializer(d.declarator) {
            if !is_null_literal(tree, value) {
                out.push(Site::PointerInit {
                    declarator: d.declarator,
                    value,
                });
            }
        }
    }
    for node in tree.preorder() {
        if !tree.is(node, Syntax::AssignmentExpr) {
            continue;
        }
        let c = tree.children(node);
        if tree.text(c[1]) != "=" || is_null_literal(tree, c[2]) {
            continue;
        }
        let target = a.scopes.use_at(c[0]).and_then(|u| u.binding);
        if let Some(def) = target.map(|t| a.scopes.def(t)) {
            if def.pointer_depth > 0 && !def.is_array {
                out.push(Site::PointerAssign {
                    assign: node,
                    value: c[2],
                });
            }
        }
    }
    out.sort_by_key(|s| s.span(a).start);
    out
}

pub(crate) fn conditional_sites(a: &Analysis) -> Vec<Site> {
    let tree = &a.tree;
    let mut out = Vec::new();
    for node in tree.preorder() {
        match tree.syntax(node) {
            Some(Syntax::IfStmt) => {
                let c = tree.children(node);
                if c.len() == 3 && tree.text(c[2]).lines().count() <= SMALL_IF_LINES {
                    out.push(Site::SmallIf {
                        stmt: node,
                        body: c[2],
                    });
                }
            }
            Some(Syntax::BinaryExpr) => {
                let op = tree.children(node)[1];
                if COMPARISON_OPERATORS.contains(&tree.text(op)) {
                    out.push(Site::Comparison { op });
                }
            }
            _ => {}
        }
    }
    out
}

/// Whether a node sits inside the operand of a unary `&`.
fn under_address_of(tree: &SyntaxTree, node: NodeId) -> bool {
    tree.ancestors(node).any(|p| {
        tree.is(p, Syntax::PointerExpr) && tree.is_leaf_text(tree.children(p)[0], "&")
    })
}

pub(crate) fn variable_use_sites(a: &Analysis) -> Vec<Site> {
    let tree = &a.tree;
    let s = &a.scopes;
    let mut out = Vec::new();
    for u in s.uses() {
        let Some(bound) = u.binding.map(|b| s.def(b)) else {
            continue;
        };
        if bound.address_taken || under_address_of(tree, u.ident) {
            continue;
        }
        let alternatives: Vec<DefId> = u
            .visible
            .iter()
            .copied()
            .filter(|&alt| {
                let d = s.def(alt);
                Some(alt) != u.binding
                    && d.name != bound.name
                    && d.compatible_with(bound)
                    && !d.address_taken
                    && !tree.span(d.declarator).contains(tree.span(u.ident))
            })
            .collect();
        if !alternatives.is_empty() {
            out.push(Site::VariableUse {
                ident: u.ident,
                alternatives,
            });
        }
    }
    out
}

pub(crate) fn value_sites(a: &Analysis) -> Vec<Site> {
    let tree = &a.tree;
    let s = &a.scopes;
    let mut out = Vec::new();
    for d in s.defs() {
        if d.pointer_depth > 0 || d.is_const || !tree.is(d.decl, Syntax::Declaration) {
            continue;
        }
        let Some(value) = tree.initializer(d.declarator) else {
            continue;
        };
        if d.is_array && has_unsized_array(tree, d.declarator) {
            continue;
        }
        out.push(Site::Initializer {
            declarator: d.declarator,
            value,
        });
    }
    let mut seen = HashSet::new();
    for div in find_divisors(tree, s) {
        let d = s.def(div.def);
        if d.is_const || d.address_taken || d.pointer_depth > 0 || d.is_array {
            continue;
        }
        for site in div.sites {
            let Some(stmt) = block_statement(tree, site) else {
                continue;
            };
            let declared_before = tree.span(d.ident).end <= tree.span(stmt).start;
            if declared_before && seen.insert((div.def, stmt)) {
                out.push(Site::Divisor { def: div.def, stmt });
            }
        }
    }
    out
}

fn has_unsized_array(tree: &SyntaxTree, declarator: NodeId) -> bool {
    tree.descendants(declarator).any(|n| {
        tree.is(n, Syntax::ArrayDeclarator) && tree.children(n).len() == 3
    })
}

/// Nearest statement containing `node` that is a direct child of a block.
fn block_statement(tree: &SyntaxTree, node: NodeId) -> Option<NodeId> {
    std::iter::once(node).chain(tree.ancestors(node)).find(|&n| {
        tree.syntax(n).is_some_and(Syntax::is_statement)
            && tree.parent(n).is_some_and(|p| tree.is(p, Syntax::CompoundStmt))
    })
}

pub(crate) fn call_sites(a: &Analysis) -> Vec<Site> {
    let tree = &a.tree;
    let mut out = Vec::new();
    for node in tree.preorder() {
        if !tree.is(node, Syntax::CallExpr) {
            continue;
        }
        let list = tree.children(node)[1];
        let args = call_arguments(tree, list);
        if !args.is_empty() {
            out.push(Site::Call { call: node, args });
        }
    }
    out
}

/// Argument expressions of an argument list (punctuation dropped).
pub(crate) fn call_arguments(tree: &SyntaxTree, list: NodeId) -> Vec<NodeId> {
    let c = tree.children(list);
    c[1..c.len() - 1]
        .iter()
        .copied()
        .filter(|&n| !tree.is_leaf_text(n, ","))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::SourceUnit;

    fn menu(text: &str) -> (Analysis, TransformMenu) {
        let a = Analysis::new(SourceUnit::new("t", text)).unwrap();
        let m = applicable_transforms(&a, &LibraryAllowlist::standard());
        (a, m)
    }

    #[test]
    fn pointer_free_function_has_no_pointer_entry() {
        let (_, m) = menu("int f(int a, int b){ int c = a + b; return c; }");
        assert!(!m.contains(TransformKind::Pointer));
        assert!(m.contains(TransformKind::VarRename));
        assert!(!m.contains(TransformKind::FuncRename));
    }

    #[test]
    fn one_small_if_guard() {
        let (a, m) = menu("void f(int *a, int i, int n){ if (i < n) a[i] = 0; }");
        let guards: Vec<_> = m
            .sites(TransformKind::Conditional)
            .iter()
            .filter(|s| matches!(s, Site::SmallIf { .. }))
            .collect();
        assert_eq!(guards.len(), 1);
        assert_eq!(a.text()[guards[0].span(&a).start..].chars().next(), Some('i'));
        assert_eq!(m.sites(TransformKind::Conditional).len(), 2);
    }

    #[test]
    fn library_callees_are_not_renamed() {
        let (_, m) = menu("void f(char *d, char *s, int n){ memcpy(d, s, n); }");
        assert!(!m.contains(TransformKind::FuncRename));
        let (a, m) = menu("int f(int y){ int x = compute(y); x += helper(x) + compute(1); return f(x); }");
        let names: Vec<_> = m
            .sites(TransformKind::FuncRename)
            .iter()
            .map(|s| match s {
                Site::Callee { name, idents } => (name.clone(), idents.len()),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(
            names,
            vec![("compute".into(), 2), ("helper".into(), 1), ("f".into(), 2)]
        );
        assert!(a.tree.function_name().is_some());
    }

    #[test]
    fn variable_misuse_respects_types_and_scopes() {
        let (a, m) = menu(
            "int f(int a, long l){ int b = a; { int c = b; return c + a; } }",
        );
        let sites = m.sites(TransformKind::VarMisuse);
        for site in sites {
            let Site::VariableUse { ident, alternatives } = site else { unreachable!() };
            let used = a.scopes.use_at(*ident).unwrap();
            for &alt in alternatives {
                assert!(used.visible.contains(&alt));
                assert_eq!(a.scopes.def(alt).type_text, "int");
            }
        }
        // `b` inside its own initializer cannot be swapped for `b`; the use of
        // `a` in `int b = a;` may only become nothing else (b is being declared).
        let first = &sites[0];
        let Site::VariableUse { ident, .. } = first else { unreachable!() };
        assert_ne!(a.tree.text(*ident), "a");
    }

    #[test]
    fn value_sites_skip_pointers_consts_and_unsized_arrays() {
        let (a, m) = menu(
            "int f(int x, int d){ int n = 10; const int k = 2; char *p = 0; int t[] = {1, 2}; int r; r = x / d; return r + n + k + t[0] + *p; }",
        );
        let kinds: Vec<String> = m
            .sites(TransformKind::ValueMisuse)
            .iter()
            .map(|s| match s {
                Site::Initializer { declarator, .. } => a.tree.text(*declarator).to_owned(),
                Site::Divisor { stmt, .. } => format!("div:{}", a.tree.text(*stmt)),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(kinds, vec!["n = 10", "div:r = x / d;"]);
        assert!(!m.contains(TransformKind::Pointer));
    }

    #[test]
    fn numeric_types_exclude_pointers_and_arrays() {
        let (a, m) = menu("void f(){ long total = 1; long *p; long v[4]; char c = 0; }");
        let sites = m.sites(TransformKind::DataType);
        assert_eq!(sites.len(), 1);
        assert_eq!(a.tree.text(sites[0].span_decl()), "long total = 1;");
    }

    impl Site {
        fn span_decl(&self) -> NodeId {
            match self {
                Site::NumericType { decl, .. } => *decl,
                _ => unreachable!(),
            }
        }
    }
}
