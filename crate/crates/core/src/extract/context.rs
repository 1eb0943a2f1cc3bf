use std::collections::HashMap;

use ego_tree::{NodeId, NodeRef};
use scraper::node::Node;
use scraper::Html;

use super::text::{is_skipped, words};

/// Maximum number of words kept on either side of a table.
pub const CONTEXT_WORDS: usize = 200;

/// Visible page text split into sections at headings, with the position of every
/// table inside that flow.
///
/// Text inside tables never enters the flow. A nested table shares the position of
/// the outermost table that contains it.
#[derive(Debug, Default)]
pub struct ContextIndex {
    sections: Vec<Vec<String>>,
    anchors: HashMap<NodeId, (usize, usize)>,
}

impl ContextIndex {
    pub fn build(doc: &Html) -> Self {
        let mut b = Builder {
            index: ContextIndex {
                sections: vec![Vec::new()],
                anchors: HashMap::new(),
            },
            buf: String::new(),
        };
        b.walk(doc.tree.root());
        b.flush();
        b.index
    }

    /// Words before and after the table element `table`, bounded by section
    /// headings and capped at [`CONTEXT_WORDS`] each.
    pub fn context(&self, table: NodeId) -> (Vec<String>, Vec<String>) {
        let Some(&(section, at)) = self.anchors.get(&table) else {
            return (Vec::new(), Vec::new());
        };
        let words = &self.sections[section];
        let before = words[at.saturating_sub(CONTEXT_WORDS)..at].to_vec();
        let after = words[at..(at + CONTEXT_WORDS).min(words.len())].to_vec();
        (before, after)
    }
}

struct Builder {
    index: ContextIndex,
    buf: String,
}

impl Builder {
    fn flush(&mut self) {
        if self.buf.is_empty() {
            return;
        }
        let section = self
            .index
            .sections
            .last_mut()
            .expect("at least one section");
        section.extend(words(&self.buf));
        self.buf.clear();
    }

    /// Record the current position for every table in the subtree rooted at `node`.
    fn anchor_subtree(&mut self, node: NodeRef<'_, Node>) {
        let pos = (
            self.index.sections.len() - 1,
            self.index.sections.last().map_or(0, Vec::len),
        );
        for d in node.descendants() {
            if matches!(d.value(), Node::Element(el) if el.name() == "table") {
                self.index.anchors.insert(d.id(), pos);
            }
        }
    }

    fn walk(&mut self, node: NodeRef<'_, Node>) {
        for child in node.children() {
            match child.value() {
                Node::Text(t) => self.buf.push_str(t),
                Node::Element(el) => {
                    let name = el.name();
                    if name == "table" || is_skipped(el) {
                        self.flush();
                        self.anchor_subtree(child);
                        continue;
                    }
                    if matches!(name, "h1" | "h2" | "h3" | "h4" | "h5" | "h6") {
                        self.flush();
                        self.anchor_subtree(child);
                        self.index.sections.push(Vec::new());
                        continue;
                    }
                    // any element boundary may separate words ("<p>a</p><p>b</p>")
                    // but inline ones must not split them ("<b>a</b>b" is one word)
                    let inline = matches!(
                        name,
                        "a" | "b"
                            | "i"
                            | "u"
                            | "s"
                            | "em"
                            | "strong"
                            | "span"
                            | "small"
                            | "big"
                            | "sup"
                            | "sub"
                            | "abbr"
                            | "code"
                            | "font"
                            | "bdi"
                            | "cite"
                            | "q"
                            | "mark"
                            | "time"
                            | "var"
                            | "kbd"
                            | "samp"
                            | "del"
                            | "ins"
                    );
                    if !inline {
                        self.buf.push(' ');
                    }
                    self.walk(child);
                    if !inline {
                        self.buf.push(' ');
                    }
                }
                _ => {}
            }
        }
    }
}
