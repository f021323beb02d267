//! Lexical scope resolution over a function tree.

use std::collections::HashMap;

use crate::syntax::{NodeId, Syntax, SyntaxTree, Terminal};

pub type ScopeId = usize;
pub type DefId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scope {
    pub parent: Option<ScopeId>,
    /// Node that opened the scope (the function root for scope 0).
    pub node: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DefKind {
    Param,
    Local,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Def {
    pub name: String,
    pub kind: DefKind,
    pub scope: ScopeId,
    /// Identifier leaf naming the variable.
    pub ident: NodeId,
    /// Enclosing declaration or parameter declaration.
    pub decl: NodeId,
    /// Top-level declarator child of `decl` (possibly an init declarator).
    pub declarator: NodeId,
    pub type_text: String,
    pub pointer_depth: usize,
    pub is_array: bool,
    pub initialized: bool,
    pub is_const: bool,
    pub address_taken: bool,
}

impl Def {
    /// Same specifiers and declarator shape.
    pub fn compatible_with(&self, other: &Def) -> bool {
        self.type_text == other.type_text
            && self.pointer_depth == other.pointer_depth
            && self.is_array == other.is_array
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Use {
    pub ident: NodeId,
    pub name: String,
    pub scope: ScopeId,
    /// `None` for external names (globals, library functions, macros).
    pub binding: Option<DefId>,
    /// Innermost def of every name visible at this point.
    pub visible: Vec<DefId>,
}

#[derive(Debug, Clone, Default)]
pub struct ScopeTable {
    scopes: Vec<Scope>,
    defs: Vec<Def>,
    uses: Vec<Use>,
    def_by_ident: HashMap<NodeId, DefId>,
    use_by_ident: HashMap<NodeId, usize>,
}

impl ScopeTable {
    pub fn scopes(&self) -> &[Scope] {
        &self.scopes
    }

    /// Definitions in source order.
    pub fn defs(&self) -> &[Def] {
        &self.defs
    }

    pub fn def(&self, id: DefId) -> &Def {
        &self.defs[id]
    }

    /// Identifier references in source order.
    pub fn uses(&self) -> &[Use] {
        &self.uses
    }

    pub fn def_at(&self, ident: NodeId) -> Option<DefId> {
        self.def_by_ident.get(&ident).copied()
    }

    pub fn use_at(&self, ident: NodeId) -> Option<&Use> {
        self.use_by_ident.get(&ident).map(|&i| &self.uses[i])
    }

    pub fn uses_of(&self, def: DefId) -> impl Iterator<Item = &Use> + '_ {
        self.uses.iter().filter(move |u| u.binding == Some(def))
    }

    pub fn external_uses(&self) -> impl Iterator<Item = &Use> + '_ {
        self.uses.iter().filter(|u| u.binding.is_none())
    }

    /// Whether scope `outer` is `inner` or one of its ancestors.
    pub fn encloses(&self, outer: ScopeId, inner: ScopeId) -> bool {
        std::iter::successors(Some(inner), |&s| self.scopes[s].parent).any(|s| s == outer)
    }
}

/// Resolve every identifier of a function to a local definition or mark it
/// external. Parameters and the outermost body block share scope 0; nested
/// blocks and `for` statements open new scopes.
pub fn resolve_scopes(tree: &SyntaxTree) -> ScopeTable {
    let mut r = Resolver {
        tree,
        table: ScopeTable::default(),
        stack: Vec::new(),
        body: tree.function_body(),
        params_list: tree.function_declarator().and_then(|d| {
            tree.children(d)
                .iter()
                .copied()
                .find(|&c| tree.is(c, Syntax::ParameterList))
        }),
    };
    r.table.scopes.push(Scope {
        parent: None,
        node: tree.root(),
    });
    r.stack.push(Frame::default());
    r.visit(tree.root(), 0);
    mark_address_taken(tree, &mut r.table);
    r.table
}

#[derive(Default)]
struct Frame {
    names: HashMap<String, DefId>,
}

struct Resolver<'t> {
    tree: &'t SyntaxTree,
    table: ScopeTable,
    stack: Vec<Frame>,
    body: Option<NodeId>,
    params_list: Option<NodeId>,
}

impl Resolver<'_> {
    fn visit(&mut self, node: NodeId, scope: ScopeId) {
        let tree = self.tree;
        match tree.syntax(node) {
            Some(Syntax::CompoundStmt | Syntax::ForStmt) if Some(node) != self.body => {
                let inner = self.table.scopes.len();
                self.table.scopes.push(Scope {
                    parent: Some(scope),
                    node,
                });
                self.stack.push(Frame::default());
                for &c in tree.children(node) {
                    self.visit(c, inner);
                }
                self.stack.pop();
            }
            Some(Syntax::LabeledStmt | Syntax::GotoStmt) => {}
            Some(_) => {
                for &c in tree.children(node) {
                    self.visit(c, scope);
                }
            }
            None => {
                if tree.terminal(node) == Some(Terminal::Identifier) {
                    self.identifier(node, scope);
                }
            }
        }
    }

    fn identifier(&mut self, ident: NodeId, scope: ScopeId) {
        let tree = self.tree;
        match declarator_role(tree, ident, self.params_list) {
            Role::Use => {
                let name = tree.text(ident).to_owned();
                let binding = self.lookup(&name);
                let visible = self.visible();
                self.table.use_by_ident.insert(ident, self.table.uses.len());
                self.table.uses.push(Use {
                    ident,
                    name,
                    scope,
                    binding,
                    visible,
                });
            }
            Role::Define { decl, declarator, kind } => {
                let name = tree.text(ident).to_owned();
                let is_const = tree
                    .children(decl)
                    .iter()
                    .any(|&c| tree.is_leaf_text(c, "const"));
                let def = Def {
                    name: name.clone(),
                    kind,
                    scope,
                    ident,
                    decl,
                    declarator,
                    type_text: tree.type_text(decl),
                    pointer_depth: tree.pointer_depth(declarator),
                    is_array: tree.is_array_declarator(declarator),
                    initialized: tree.is(declarator, Syntax::InitDeclarator),
                    is_const,
                    address_taken: false,
                };
                let id = self.table.defs.len();
                self.table.defs.push(def);
                self.table.def_by_ident.insert(ident, id);
                self.stack
                    .last_mut()
                    .expect("scope stack is never empty")
                    .names
                    .insert(name, id);
            }
            Role::Ignore => {}
        }
    }

    fn lookup(&self, name: &str) -> Option<DefId> {
        self.stack
            .iter()
            .rev()
            .find_map(|f| f.names.get(name).copied())
    }

    fn visible(&self) -> Vec<DefId> {
        let mut seen: HashMap<&str, DefId> = HashMap::new();
        for frame in self.stack.iter().rev() {
            for (name, &id) in &frame.names {
                seen.entry(name.as_str()).or_insert(id);
            }
        }
        let mut out: Vec<DefId> = seen.into_values().collect();
        out.sort_unstable();
        out
    }
}

enum Role {
    Use,
    Define {
        decl: NodeId,
        declarator: NodeId,
        kind: DefKind,
    },
    Ignore,
}

/// Classify an identifier leaf: a reference, the name of a variable being
/// declared, or a name that is neither (function names, prototype names,
/// parameters of nested function types, typedef names).
fn declarator_role(tree: &SyntaxTree, ident: NodeId, params_list: Option<NodeId>) -> Role {
    // Climb through declarator nodes in which the identifier is the name.
    let mut child = ident;
    let mut parent = tree.parent(ident);
    let mut through_paren = false;
    let mut saw_function = false;
    while let Some(p) = parent {
        let is_name_slot = match tree.syntax(p) {
            Some(Syntax::PointerDeclarator) => true,
            Some(Syntax::ParenthesizedDeclarator) => {
                through_paren = true;
                true
            }
            Some(Syntax::ArrayDeclarator | Syntax::InitDeclarator) => {
                tree.children(p).first() == Some(&child)
            }
            Some(Syntax::FuncDeclarator) => {
                if tree.children(p).first() == Some(&child) {
                    if !through_paren {
                        saw_function = true;
                    }
                    true
                } else {
                    false
                }
            }
            _ => false,
        };
        if !is_name_slot {
            break;
        }
        child = p;
        parent = tree.parent(p);
    }
    if child == ident
        && !matches!(
            parent.and_then(|p| tree.syntax(p)),
            Some(Syntax::Declaration | Syntax::ParameterDeclaration)
        )
    {
        return Role::Use;
    }
    let Some(decl) = parent else {
        return Role::Ignore;
    };
    match tree.syntax(decl) {
        Some(Syntax::Declaration) => {
            let typedef = tree
                .children(decl)
                .iter()
                .any(|&c| tree.is_leaf_text(c, "typedef"));
            if typedef || saw_function {
                Role::Ignore
            } else {
                Role::Define {
                    decl,
                    declarator: child,
                    kind: DefKind::Local,
                }
            }
        }
        Some(Syntax::ParameterDeclaration)
            if tree.parent(decl).is_some() && tree.parent(decl) == params_list && !saw_function =>
        {
            Role::Define {
                decl,
                declarator: child,
                kind: DefKind::Param,
            }
        }
        // The defined function's own name, or an identifier inside a nested
        // function-type parameter list.
        _ => Role::Ignore,
    }
}

fn mark_address_taken(tree: &SyntaxTree, table: &mut ScopeTable) {
    for node in tree.preorder() {
        if !tree.is(node, Syntax::PointerExpr) {
            continue;
        }
        let children = tree.children(node);
        if !tree.is_leaf_text(children[0], "&") {
            continue;
        }
        for n in tree.descendants(children[1]) {
            if let Some(def) = table.use_at(n).and_then(|u| u.binding) {
                table.defs[def].address_taken = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_function;

    fn table(text: &str) -> (SyntaxTree, ScopeTable) {
        let tree = parse_function(text).unwrap();
        let t = resolve_scopes(&tree);
        (tree, t)
    }

    fn bound_name(tree: &SyntaxTree, t: &ScopeTable, u: &Use) -> Option<(String, usize)> {
        let _ = tree;
        u.binding.map(|d| (t.def(d).name.clone(), d))
    }

    #[test]
    fn textbook_scope() {
        let (tree, t) = table("int f(int a){int b;return a+b;}");
        let names: Vec<_> = t.defs().iter().map(|d| (d.name.as_str(), d.kind)).collect();
        assert_eq!(names, vec![("a", DefKind::Param), ("b", DefKind::Local)]);
        assert_eq!(t.uses().len(), 2);
        for u in t.uses() {
            let (name, _) = bound_name(&tree, &t, u).unwrap();
            assert_eq!(name, u.name);
        }
        assert!(t.defs().iter().all(|d| d.scope == 0));
    }

    #[test]
    fn innermost_scope_wins() {
        let (_, t) = table("void f(){ int a; { int a; a = 1; } a = 2; }");
        assert_eq!(t.defs().len(), 2);
        let inner_use = &t.uses()[0];
        let outer_use = &t.uses()[1];
        assert_eq!(inner_use.binding, Some(1));
        assert_eq!(outer_use.binding, Some(0));
        assert!(t.encloses(t.def(0).scope, t.def(1).scope));
        // Only the innermost `a` is visible inside the block.
        assert_eq!(inner_use.visible, vec![1]);
    }

    #[test]
    fn library_calls_are_external() {
        let (_, t) = table("void f(char *d, const char *s, int n){ memcpy(d,s,n); }");
        let ext: Vec<_> = t.external_uses().map(|u| u.name.as_str()).collect();
        assert_eq!(ext, vec!["memcpy"]);
        assert!(t.def(1).is_const);
        assert_eq!(t.def(0).pointer_depth, 1);
    }

    #[test]
    fn declarator_positions() {
        let (_, t) = table(
            "int *g(int n, int (*cmp)(int x, int y)){ int buf[n], k = n; int h(int); struct s *p = &k; lbl: goto lbl; return buf[0] + cmp(k, p->v) + h(1); }",
        );
        let defs: Vec<_> = t.defs().iter().map(|d| d.name.as_str()).collect();
        assert_eq!(defs, vec!["n", "cmp", "buf", "k", "p"]);
        assert!(t.def(2).is_array);
        assert!(t.def(3).initialized && t.def(3).address_taken);
        assert_eq!(t.def(4).type_text, "struct s");
        let ext: Vec<_> = t.external_uses().map(|u| u.name.as_str()).collect();
        assert_eq!(ext, vec!["h"]);
    }

    #[test]
    fn for_scope_and_initializer_self_reference() {
        let (_, t) = table("void f(int n){ for (int i = 0; i < n; i++) { int j = i; } int i = i; }");
        let last = t.uses().last().unwrap();
        // `int i = i;` binds the new i, as in C.
        assert_eq!(last.binding, Some(t.defs().len() - 1));
        let for_i = &t.defs()[1];
        assert_ne!(for_i.scope, 0);
    }
}
