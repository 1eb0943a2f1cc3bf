use std::sync::OnceLock;

use ego_tree::NodeRef;
use regex::Regex;
use scraper::node::{Element, Node};

fn footnote_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\d+\]").expect("footnote pattern"))
}

/// Elements whose content is never visible text.
pub(crate) fn is_skipped(el: &Element) -> bool {
    if matches!(
        el.name(),
        "script" | "style" | "noscript" | "template" | "head" | "title" | "meta" | "link"
    ) {
        return true;
    }
    if el.has_class(
        "mw-editsection",
        scraper::CaseSensitivity::AsciiCaseInsensitive,
    ) || el.has_class("sortkey", scraper::CaseSensitivity::AsciiCaseInsensitive)
    {
        return true;
    }
    el.attr("style").is_some_and(|s| {
        let s: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        s.contains("display:none")
    })
}

fn is_block(name: &str) -> bool {
    matches!(
        name,
        "p" | "div"
            | "li"
            | "ul"
            | "ol"
            | "dl"
            | "dt"
            | "dd"
            | "tr"
            | "td"
            | "th"
            | "caption"
            | "blockquote"
            | "pre"
            | "section"
            | "article"
            | "center"
            | "figure"
            | "figcaption"
            | "h1"
            | "h2"
            | "h3"
            | "h4"
            | "h5"
            | "h6"
            | "table"
            | "thead"
            | "tbody"
            | "tfoot"
            | "hr"
            | "br"
    )
}

/// Append the visible text below `node` to `out`. Nested `<table>` subtrees are
/// left out; block elements and `<br>` become word breaks.
pub(crate) fn collect_text(node: NodeRef<'_, Node>, out: &mut String) {
    for child in node.children() {
        match child.value() {
            Node::Text(t) => out.push_str(t),
            Node::Element(el) => {
                if is_skipped(el) || el.name() == "table" {
                    out.push(' ');
                    continue;
                }
                let block = is_block(el.name());
                if block {
                    out.push(' ');
                }
                collect_text(child, out);
                if block {
                    out.push(' ');
                }
            }
            _ => {}
        }
    }
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split(|c: char| c.is_whitespace() || c.is_control()) {
        if word.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Visible cell text: footnote markers like `[12]` removed, control characters
/// dropped, whitespace runs collapsed to one space, ends trimmed.
pub fn normalize_cell_text(raw: &str) -> String {
    let stripped = footnote_re().replace_all(raw, " ");
    collapse_whitespace(&stripped)
}

/// Whitespace-delimited words of `raw` with footnote markers removed.
pub(crate) fn words(raw: &str) -> impl Iterator<Item = String> + '_ {
    let stripped = footnote_re().replace_all(raw, " ").into_owned();
    stripped
        .split(|c: char| c.is_whitespace() || c.is_control())
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect::<Vec<_>>()
        .into_iter()
}
