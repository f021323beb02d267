//! Statement-level control edges and identifier-level def-use edges.

use std::fmt::Write as _;

use super::scope::{DefId, ScopeTable};
use crate::syntax::{NodeId, Syntax, SyntaxTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DataEdge {
    pub def: DefId,
    /// Identifier leaf of the definition.
    pub from: NodeId,
    /// Identifier leaf of the use.
    pub to: NodeId,
}

#[derive(Debug, Clone, Default)]
pub struct FlowGraph {
    /// Statement nodes in source order.
    pub statements: Vec<NodeId>,
    /// Successor edges between consecutive statements of a block.
    pub control: Vec<(NodeId, NodeId)>,
    pub data: Vec<DataEdge>,
}

pub fn build_flow_graph(tree: &SyntaxTree, scopes: &ScopeTable) -> FlowGraph {
    let mut g = FlowGraph::default();
    for node in tree.preorder() {
        let Some(kind) = tree.syntax(node) else {
            continue;
        };
        if kind.is_statement() {
            g.statements.push(node);
        }
        if kind == Syntax::CompoundStmt {
            let stmts: Vec<NodeId> = tree
                .children(node)
                .iter()
                .copied()
                .filter(|&c| tree.syntax(c).is_some_and(Syntax::is_statement))
                .collect();
            g.control.extend(stmts.windows(2).map(|w| (w[0], w[1])));
        }
    }
    for u in scopes.uses() {
        if let Some(def) = u.binding {
            g.data.push(DataEdge {
                def,
                from: scopes.def(def).ident,
                to: u.ident,
            });
        }
    }
    g
}

impl FlowGraph {
    pub fn data_edges_of(&self, def: DefId) -> impl Iterator<Item = &DataEdge> + '_ {
        self.data.iter().filter(move |e| e.def == def)
    }

    /// Graphviz rendering: statements as boxes, def and use identifiers as
    /// ellipses attached to their statements.
    pub fn to_dot(&self, tree: &SyntaxTree) -> String {
        let mut out = String::from("digraph flow {\n  node [fontname=\"monospace\"];\n");
        for &s in &self.statements {
            let label = first_line(tree.text(s));
            let _ = writeln!(
                out,
                "  s{s} [shape=box,label=\"{}: {}\"];",
                tree.label(s),
                escape(label)
            );
        }
        for &(a, b) in &self.control {
            let _ = writeln!(out, "  s{a} -> s{b};");
        }
        let mut idents: Vec<NodeId> = self.data.iter().flat_map(|e| [e.from, e.to]).collect();
        idents.sort_unstable();
        idents.dedup();
        for &i in &idents {
            let _ = writeln!(out, "  v{i} [shape=ellipse,label=\"{}\"];", escape(tree.text(i)));
            if let Some(stmt) = tree.enclosing_statement(i) {
                let _ = writeln!(out, "  s{stmt} -> v{i} [style=dotted,arrowhead=none];");
            }
        }
        for e in &self.data {
            let _ = writeln!(out, "  v{} -> v{} [color=blue];", e.from, e.to);
        }
        out.push_str("}\n");
        out
    }
}

fn first_line(text: &str) -> &str {
    text.lines().next().unwrap_or("")
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::resolve_scopes;
    use crate::syntax::parse_function;

    fn graph(text: &str) -> (SyntaxTree, ScopeTable, FlowGraph) {
        let tree = parse_function(text).unwrap();
        let s = resolve_scopes(&tree);
        let g = build_flow_graph(&tree, &s);
        (tree, s, g)
    }

    #[test]
    fn one_data_edge() {
        let (tree, _, g) = graph("void f(){ int x=1; int y=x; }");
        assert_eq!(g.data.len(), 1);
        assert_eq!(tree.text(g.data[0].from), "x");
        assert_eq!(tree.text(g.data[0].to), "x");
        assert!(g.data[0].from < g.data[0].to);
        assert_eq!(g.control.len(), 1);
    }

    #[test]
    fn independent_declarations_have_no_edges() {
        let (_, _, g) = graph("void f(){ int a=1; int b=2; }");
        assert!(g.data.is_empty());
    }

    #[test]
    fn dot_dump_mentions_every_edge() {
        let (tree, _, g) = graph("int f(int n){ int d = n; if (d) return n / d; return 0; }");
        let dot = g.to_dot(&tree);
        assert!(dot.starts_with("digraph flow {"));
        assert_eq!(dot.matches("[color=blue]").count(), g.data.len());
        assert_eq!(g.data.len(), 4);
        assert!(dot.contains("if_stmt: if (d) return n / d;"));
    }
}
