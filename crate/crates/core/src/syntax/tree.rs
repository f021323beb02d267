//! Arena-backed concrete syntax tree. Every lexical token is a leaf; inner
//! nodes carry a grammar label used as the parent type of their leaves.

use super::lexer::{LexToken, Span};

pub type NodeId = usize;

/// Terminal node type (`tt`) of a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    Keyword,
    Identifier,
    FieldIdentifier,
    Type,
    Operator,
    Punctuation,
    NumberLiteral,
    StringLiteral,
    CharLiteral,
}

impl Terminal {
    pub fn label(self) -> &'static str {
        match self {
            Terminal::Keyword => "keyword",
            Terminal::Identifier => "identifier",
            Terminal::FieldIdentifier => "field_identifier",
            Terminal::Type => "type",
            Terminal::Operator => "operator",
            Terminal::Punctuation => "punctuation",
            Terminal::NumberLiteral => "number_literal",
            Terminal::StringLiteral => "string_literal",
            Terminal::CharLiteral => "char_literal",
        }
    }

    pub const ALL: [Terminal; 9] = [
        Terminal::Keyword,
        Terminal::Identifier,
        Terminal::FieldIdentifier,
        Terminal::Type,
        Terminal::Operator,
        Terminal::Punctuation,
        Terminal::NumberLiteral,
        Terminal::StringLiteral,
        Terminal::CharLiteral,
    ];
}

macro_rules! syntax_kinds {
    ($($variant:ident => $label:literal),* $(,)?) => {
        /// Non-terminal node type, used as the parent type (`pt`) of leaves.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Syntax {
            $($variant),*
        }

        impl Syntax {
            pub fn label(self) -> &'static str {
                match self {
                    $(Syntax::$variant => $label),*
                }
            }

            pub const ALL: &'static [Syntax] = &[$(Syntax::$variant),*];
        }
    };
}

syntax_kinds! {
    FuncDefinition => "func_definition",
    FuncDeclarator => "func_declarator",
    ParameterList => "parameter_list",
    ParameterDeclaration => "parameter_declaration",
    CompoundStmt => "compound_stmt",
    Declaration => "declaration",
    InitDeclarator => "init_declarator",
    PointerDeclarator => "pointer_declarator",
    ArrayDeclarator => "array_declarator",
    ParenthesizedDeclarator => "parenthesized_declarator",
    AbstractDeclarator => "abstract_declarator",
    SizedType => "sized_type",
    StructSpecifier => "struct_specifier",
    TypeDescriptor => "type_descriptor",
    InitializerList => "initializer_list",
    InitializerPair => "initializer_pair",
    IfStmt => "if_stmt",
    WhileStmt => "while_stmt",
    DoStmt => "do_stmt",
    ForStmt => "for_stmt",
    SwitchStmt => "switch_stmt",
    CaseStmt => "case_stmt",
    ReturnStmt => "return_stmt",
    BreakStmt => "break_stmt",
    ContinueStmt => "continue_stmt",
    GotoStmt => "goto_stmt",
    LabeledStmt => "labeled_stmt",
    ExpressionStmt => "expression_stmt",
    BinaryExpr => "binary_expr",
    AssignmentExpr => "assignment_expr",
    UnaryExpr => "unary_expr",
    PointerExpr => "pointer_expr",
    UpdateExpr => "update_expr",
    CastExpr => "cast_expr",
    SizeofExpr => "sizeof_expr",
    ConditionalExpr => "conditional_expr",
    CallExpr => "call_expr",
    ArgumentList => "argument_list",
    SubscriptExpr => "subscript_expr",
    FieldExpr => "field_expr",
    ParenthesizedExpr => "parenthesized_expr",
    CommaExpr => "comma_expr",
    ConcatenatedString => "concatenated_string",
}

impl Syntax {
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            Syntax::CompoundStmt
                | Syntax::Declaration
                | Syntax::IfStmt
                | Syntax::WhileStmt
                | Syntax::DoStmt
                | Syntax::ForStmt
                | Syntax::SwitchStmt
                | Syntax::CaseStmt
                | Syntax::ReturnStmt
                | Syntax::BreakStmt
                | Syntax::ContinueStmt
                | Syntax::GotoStmt
                | Syntax::LabeledStmt
                | Syntax::ExpressionStmt
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Leaf { token: usize, terminal: Terminal },
    Inner(Syntax),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct SyntaxTree {
    pub(crate) source: String,
    pub(crate) tokens: Vec<LexToken>,
    pub(crate) nodes: Vec<Node>,
    pub(crate) root: NodeId,
    /// Leaf node of every token, indexed by token position.
    pub(crate) leaves: Vec<NodeId>,
}

impl SyntaxTree {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn tokens(&self) -> &[LexToken] {
        &self.tokens
    }

    /// Leaf nodes in source order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn text(&self, id: NodeId) -> &str {
        self.nodes[id].span.slice(&self.source)
    }

    pub fn span(&self, id: NodeId) -> Span {
        self.nodes[id].span
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn syntax(&self, id: NodeId) -> Option<Syntax> {
        match self.nodes[id].kind {
            NodeKind::Inner(s) => Some(s),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn terminal(&self, id: NodeId) -> Option<Terminal> {
        match self.nodes[id].kind {
            NodeKind::Leaf { terminal, .. } => Some(terminal),
            NodeKind::Inner(_) => None,
        }
    }

    pub fn is(&self, id: NodeId, kind: Syntax) -> bool {
        self.syntax(id) == Some(kind)
    }

    pub fn is_leaf_text(&self, id: NodeId, text: &str) -> bool {
        self.terminal(id).is_some() && self.text(id) == text
    }

    /// Label of a node: the grammar label for inner nodes, the terminal label
    /// for leaves.
    pub fn label(&self, id: NodeId) -> &'static str {
        match self.nodes[id].kind {
            NodeKind::Inner(s) => s.label(),
            NodeKind::Leaf { terminal, .. } => terminal.label(),
        }
    }

    /// Pre-order traversal of the subtree rooted at `id`.
    pub fn descendants(&self, id: NodeId) -> Descendants<'_> {
        Descendants {
            tree: self,
            stack: vec![id],
        }
    }

    /// All nodes of the tree in pre-order.
    pub fn preorder(&self) -> Descendants<'_> {
        self.descendants(self.root)
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent(id), move |&n| self.parent(n))
    }

    /// Leaves inside the subtree rooted at `id`, in source order.
    pub fn leaves_of(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let span = self.span(id);
        self.leaves
            .iter()
            .copied()
            .filter(move |&l| span.contains(self.span(l)))
    }

    /// The nearest enclosing statement of a node (the node itself included).
    pub fn enclosing_statement(&self, id: NodeId) -> Option<NodeId> {
        std::iter::once(id)
            .chain(self.ancestors(id))
            .find(|&n| self.syntax(n).is_some_and(Syntax::is_statement))
    }

    /// Body of the function definition at the root.
    pub fn function_body(&self) -> Option<NodeId> {
        self.children(self.root)
            .iter()
            .copied()
            .find(|&c| self.is(c, Syntax::CompoundStmt))
    }

    /// Name leaf of the function defined at the root.
    pub fn function_name(&self) -> Option<NodeId> {
        let declarator = self.function_declarator()?;
        self.declarator_name(declarator)
    }

    /// The outermost function declarator of the root definition.
    pub fn function_declarator(&self) -> Option<NodeId> {
        let mut node = self
            .children(self.root)
            .iter()
            .copied()
            .find(|&c| self.is_declarator(c))?;
        loop {
            match self.syntax(node)? {
                Syntax::FuncDeclarator => return Some(node),
                Syntax::PointerDeclarator | Syntax::ParenthesizedDeclarator => {
                    node = self
                        .children(node)
                        .iter()
                        .copied()
                        .find(|&c| self.is_declarator(c))?;
                }
                _ => return None,
            }
        }
    }

    pub fn is_declarator(&self, id: NodeId) -> bool {
        match self.nodes[id].kind {
            NodeKind::Leaf { terminal, .. } => terminal == Terminal::Identifier,
            NodeKind::Inner(s) => matches!(
                s,
                Syntax::FuncDeclarator
                    | Syntax::PointerDeclarator
                    | Syntax::ArrayDeclarator
                    | Syntax::ParenthesizedDeclarator
                    | Syntax::InitDeclarator
            ),
        }
    }

    /// Identifier leaf named by a declarator (`*p`, `a[4]`, `x = 1`, `(*fp)(int)`).
    pub fn declarator_name(&self, id: NodeId) -> Option<NodeId> {
        match self.nodes[id].kind {
            NodeKind::Leaf {
                terminal: Terminal::Identifier,
                ..
            } => Some(id),
            NodeKind::Leaf { .. } => None,
            NodeKind::Inner(
                Syntax::FuncDeclarator
                | Syntax::PointerDeclarator
                | Syntax::ArrayDeclarator
                | Syntax::ParenthesizedDeclarator
                | Syntax::InitDeclarator,
            ) => self
                .children(id)
                .iter()
                .copied()
                .find(|&c| self.is_declarator(c))
                .and_then(|c| self.declarator_name(c)),
            NodeKind::Inner(_) => None,
        }
    }

    /// Number of pointer levels applied to the name of a declarator.
    pub fn pointer_depth(&self, declarator: NodeId) -> usize {
        let Some(name) = self.declarator_name(declarator) else {
            return 0;
        };
        std::iter::once(name)
            .chain(self.ancestors(name))
            .take_while(|&n| n != declarator)
            .chain(std::iter::once(declarator))
            .filter(|&n| self.is(n, Syntax::PointerDeclarator))
            .count()
    }

    pub fn is_array_declarator(&self, declarator: NodeId) -> bool {
        let Some(name) = self.declarator_name(declarator) else {
            return false;
        };
        std::iter::once(name)
            .chain(self.ancestors(name))
            .take_while(|&n| n != declarator)
            .chain(std::iter::once(declarator))
            .any(|n| self.is(n, Syntax::ArrayDeclarator))
    }

    /// Child declarators of a declaration or parameter declaration.
    pub fn declarators(&self, decl: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.children(decl)
            .iter()
            .copied()
            .filter(|&c| self.is_declarator(c))
    }

    /// Type-specifier children of a declaration: primitive/typedef leaves,
    /// sized types and struct specifiers.
    pub fn type_specifiers(&self, decl: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.children(decl).iter().copied().filter(|&c| {
            self.terminal(c) == Some(Terminal::Type)
                || self.is(c, Syntax::SizedType)
                || self.is(c, Syntax::StructSpecifier)
        })
    }

    /// Normalized type text of a declaration's specifiers, e.g. `unsigned long`.
    pub fn type_text(&self, decl: NodeId) -> String {
        let mut parts = Vec::new();
        for c in self.type_specifiers(decl) {
            for leaf in self.leaves_of(c) {
                parts.push(self.text(leaf));
            }
        }
        parts.join(" ")
    }

    /// Value node of an init declarator.
    pub fn initializer(&self, init_declarator: NodeId) -> Option<NodeId> {
        if !self.is(init_declarator, Syntax::InitDeclarator) {
            return None;
        }
        let children = self.children(init_declarator);
        let eq = children.iter().position(|&c| self.is_leaf_text(c, "="))?;
        children.get(eq + 1).copied()
    }

    /// Leaf texts of the whole unit.
    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.span.slice(&self.source)).collect()
    }
}

pub struct Descendants<'a> {
    tree: &'a SyntaxTree,
    stack: Vec<NodeId>,
}

impl Iterator for Descendants<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let id = self.stack.pop()?;
        self.stack
            .extend(self.tree.nodes[id].children.iter().rev().copied());
        Some(id)
    }
}
