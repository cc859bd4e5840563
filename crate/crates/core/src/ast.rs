//! Error-tolerant Java parsing of dataset snippets.
//!
//! Snippets are usually bare class members, so anything that is not already a
//! clean compilation unit with a top-level type is wrapped in a synthetic
//! class before parsing. Every span handed out by [`Node::span`] and
//! [`SyntaxTree::node_text`] is relative to the original snippet.

use std::cell::RefCell;
use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::LazyLock;

use crate::error::{Error, Result};

pub const WRAPPER_PREFIX: &str = "class __CleanTestWrap__ {\n";
pub const WRAPPER_SUFFIX: &str = "\n}";

pub const ERROR_KIND: &str = "ERROR";

const TYPE_DECLARATIONS: &[&str] = &[
    "class_declaration",
    "interface_declaration",
    "enum_declaration",
    "record_declaration",
    "annotation_type_declaration",
];

static NEXT_TREE_ID: AtomicU64 = AtomicU64::new(1);

static JAVA: LazyLock<tree_sitter::Language> = LazyLock::new(|| tree_sitter_java::LANGUAGE.into());

thread_local! {
    static PARSER: RefCell<tree_sitter::Parser> = RefCell::new(new_parser());
}

fn new_parser() -> tree_sitter::Parser {
    let mut parser = tree_sitter::Parser::new();
    parser
        .set_language(&JAVA)
        .expect("tree-sitter-java grammar is ABI compatible");
    parser
}

#[derive(Debug, Clone)]
struct NodeData {
    kind: &'static str,
    named: bool,
    missing: bool,
    field: Option<&'static str>,
    span: Range<usize>,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// An immutable, owned syntax tree. Nodes are stored in preorder.
#[derive(Debug, Clone)]
pub struct SyntaxTree {
    id: u64,
    source: String,
    text: String,
    wrapper_offset: usize,
    nodes: Vec<NodeData>,
}

/// Borrowed handle to one node of a [`SyntaxTree`].
#[derive(Clone, Copy)]
pub struct Node<'t> {
    tree: &'t SyntaxTree,
    index: usize,
}

impl std::fmt::Debug for Node<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{:?}", self.kind(), self.raw_span())
    }
}

impl PartialEq for Node<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.tree.id == other.tree.id && self.index == other.index
    }
}

impl Eq for Node<'_> {}

/// Parses a Java snippet, wrapping it in a synthetic class when needed.
pub fn parse_snippet(source: &str) -> SyntaxTree {
    PARSER.with(|parser| {
        let mut parser = parser.borrow_mut();
        if let Some(tree) = parse_unwrapped(&mut parser, source) {
            return tree;
        }
        let text = format!("{WRAPPER_PREFIX}{source}{WRAPPER_SUFFIX}");
        let ts = parser
            .parse(&text, None)
            .expect("parser has a language and no timeout");
        SyntaxTree::from_ts(source.to_owned(), text, WRAPPER_PREFIX.len(), &ts)
    })
}

fn parse_unwrapped(parser: &mut tree_sitter::Parser, source: &str) -> Option<SyntaxTree> {
    let ts = parser.parse(source, None)?;
    let root = ts.root_node();
    if root.has_error() {
        return None;
    }
    let mut cursor = root.walk();
    let has_type = root
        .named_children(&mut cursor)
        .any(|c| TYPE_DECLARATIONS.contains(&c.kind()));
    has_type.then(|| SyntaxTree::from_ts(source.to_owned(), source.to_owned(), 0, &ts))
}

impl SyntaxTree {
    fn from_ts(
        source: String,
        text: String,
        wrapper_offset: usize,
        ts: &tree_sitter::Tree,
    ) -> Self {
        let mut nodes: Vec<NodeData> = Vec::new();
        let mut cursor = ts.walk();
        // stack of indices of the open ancestors
        let mut stack: Vec<usize> = Vec::new();
        loop {
            let n = cursor.node();
            let parent = stack.last().copied();
            let index = nodes.len();
            nodes.push(NodeData {
                kind: if n.is_missing() || n.is_error() {
                    ERROR_KIND
                } else {
                    JAVA.node_kind_for_id(n.kind_id()).unwrap_or(ERROR_KIND)
                },
                named: n.is_named() || n.is_missing(),
                missing: n.is_missing(),
                field: cursor
                    .field_id()
                    .and_then(|id| JAVA.field_name_for_id(id.get())),
                span: n.start_byte()..n.end_byte(),
                parent,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                nodes[p].children.push(index);
            }
            if cursor.goto_first_child() {
                stack.push(index);
                continue;
            }
            loop {
                if cursor.goto_next_sibling() {
                    break;
                }
                if !cursor.goto_parent() {
                    return SyntaxTree {
                        id: NEXT_TREE_ID.fetch_add(1, Ordering::Relaxed),
                        source,
                        text,
                        wrapper_offset,
                        nodes,
                    };
                }
                stack.pop();
            }
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// The text that was actually parsed (wrapped or not).
    pub fn parsed_text(&self) -> &str {
        &self.text
    }

    pub fn wrapper_offset(&self) -> usize {
        self.wrapper_offset
    }

    pub fn is_wrapped(&self) -> bool {
        self.wrapper_offset > 0
    }

    pub fn root(&self) -> Node<'_> {
        Node {
            tree: self,
            index: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Preorder traversal, children in source order.
    pub fn dfs(&self) -> impl Iterator<Item = Node<'_>> + '_ {
        (0..self.nodes.len()).map(move |index| Node { tree: self, index })
    }

    pub fn nodes_of_kind<'t>(&'t self, kind: &'t str) -> impl Iterator<Item = Node<'t>> + 't {
        self.dfs().filter(move |n| n.kind() == kind)
    }

    pub fn has_error_nodes(&self) -> bool {
        self.nodes.iter().any(|n| n.kind == ERROR_KIND)
    }

    /// Method and constructor declarations in source order.
    pub fn declarations(&self) -> impl Iterator<Item = Node<'_>> + '_ {
        self.dfs().filter(|n| n.is_declaration())
    }

    /// Exact snippet text for `node`. Fails for nodes of another tree.
    pub fn node_text<'t>(&'t self, node: Node<'_>) -> Result<&'t str> {
        if node.tree.id != self.id {
            return Err(Error::ForeignNode);
        }
        Ok(&self.source[node.span()])
    }
}

impl<'t> Node<'t> {
    pub fn tree(&self) -> &'t SyntaxTree {
        self.tree
    }

    fn data(&self) -> &'t NodeData {
        &self.tree.nodes[self.index]
    }

    pub fn kind(&self) -> &'t str {
        self.data().kind
    }

    pub fn is_named(&self) -> bool {
        self.data().named
    }

    pub fn is_error(&self) -> bool {
        self.data().kind == ERROR_KIND
    }

    /// True for zero-width tokens the parser inserted to recover.
    pub fn is_missing(&self) -> bool {
        self.data().missing
    }

    pub fn is_declaration(&self) -> bool {
        matches!(
            self.kind(),
            "method_declaration" | "constructor_declaration"
        )
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind(), "line_comment" | "block_comment")
    }

    /// Field name this node occupies in its parent, if any.
    pub fn field(&self) -> Option<&'static str> {
        self.data().field
    }

    /// Byte range in the parsed (possibly wrapped) text.
    pub fn raw_span(&self) -> Range<usize> {
        self.data().span.clone()
    }

    /// Byte range in the original snippet, clamped for wrapper nodes.
    pub fn span(&self) -> Range<usize> {
        let off = self.tree.wrapper_offset;
        let len = self.tree.source.len();
        let Range { start, end } = self.data().span;
        start.saturating_sub(off).min(len)..end.saturating_sub(off).min(len)
    }

    /// True when the node starts inside the snippet rather than the wrapper.
    /// A node may still run past the snippet end when the parser borrowed the
    /// wrapper's closing brace.
    pub fn in_snippet(&self) -> bool {
        let off = self.tree.wrapper_offset;
        let start = self.data().span.start;
        start >= off && start < off + self.tree.source.len()
    }

    pub fn text(&self) -> &'t str {
        &self.tree.source[self.span()]
    }

    pub fn parent(&self) -> Option<Node<'t>> {
        self.data().parent.map(|index| Node {
            tree: self.tree,
            index,
        })
    }

    pub fn children(&self) -> impl Iterator<Item = Node<'t>> + 't {
        let tree = self.tree;
        self.data()
            .children
            .iter()
            .map(move |&index| Node { tree, index })
    }

    pub fn named_children(&self) -> impl Iterator<Item = Node<'t>> + 't {
        self.children().filter(|c| c.is_named())
    }

    pub fn child_by_field(&self, field: &str) -> Option<Node<'t>> {
        self.children().find(|c| c.field() == Some(field))
    }

    pub fn child_of_kind(&self, kind: &str) -> Option<Node<'t>> {
        self.children().find(|c| c.kind() == kind)
    }

    /// Preorder traversal of this subtree, including the node itself.
    pub fn descendants(&self) -> impl Iterator<Item = Node<'t>> + 't {
        let tree = self.tree;
        let end = self.subtree_end();
        (self.index..end).map(move |index| Node { tree, index })
    }

    fn subtree_end(&self) -> usize {
        let mut index = self.index;
        loop {
            match self.tree.nodes[index].children.last() {
                Some(&last) => index = last,
                None => return index + 1,
            }
        }
    }

    /// Named children of a block that are statements (comments excluded).
    pub fn statement_count(&self) -> usize {
        self.named_children().filter(|c| !c.is_comment()).count()
    }
}
