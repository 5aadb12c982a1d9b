use std::borrow::Cow;

use super::{AttrValue, Element, MarkupError, MarkupNode};

/// Output layout for [`serialize`](super::serialize).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    #[default]
    Compact,
    /// Element-only content is broken over indented lines; elements that
    /// contain text are written inline so their text is unchanged.
    Indented,
}

fn needs_char_ref(c: char) -> bool {
    (c as u32) < 0x20 && c != '\t' && c != '\n'
}

/// Escapes text for use as element content.
pub fn quote_text(text: &str) -> Cow<'_, str> {
    if !text.chars().any(|c| matches!(c, '&' | '<' | '>') || needs_char_ref(c)) {
        return Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len() + 8);
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c if needs_char_ref(c) => out.push_str(&format!("&#{};", c as u32)),
            c => out.push(c),
        }
    }
    Cow::Owned(out)
}

/// Escapes text for use inside a quoted attribute value (either quote
/// character may delimit the value).
pub fn quote_attribute(text: &str) -> Cow<'_, str> {
    let special = |c: char| matches!(c, '&' | '<' | '>' | '"' | '\'' | '\t' | '\n') || needs_char_ref(c);
    if !text.chars().any(special) {
        return Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len() + 8);
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c if special(c) => out.push_str(&format!("&#{};", c as u32)),
            c => out.push(c),
        }
    }
    Cow::Owned(out)
}

/// True when `name` can be written as an element or attribute name.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    let start = |c: char| c.is_alphabetic() || c == '_' || c == ':';
    start(first) && chars.all(|c| start(c) || c.is_alphanumeric() || c == '-' || c == '.')
}

fn check_name(name: &str) -> Result<(), MarkupError> {
    if is_valid_name(name) {
        Ok(())
    } else {
        Err(MarkupError::InvalidName(name.to_string()))
    }
}

pub(crate) fn attr_text(value: &AttrValue) -> Cow<'_, str> {
    match value {
        AttrValue::Atomic(s) => Cow::Borrowed(s),
        AttrValue::Number(n) => Cow::Owned(n.to_string()),
        AttrValue::Multi(parts) => Cow::Owned(
            parts
                .iter()
                .map(|p| attr_text(p).into_owned())
                .collect::<Vec<_>>()
                .join(" "),
        ),
    }
}

pub(crate) struct Writer<'a> {
    out: &'a mut String,
    layout: Layout,
}

impl<'a> Writer<'a> {
    pub(crate) fn new(out: &'a mut String, layout: Layout) -> Self {
        Writer { out, layout }
    }

    pub(crate) fn nodes(&mut self, nodes: &[MarkupNode], depth: usize) -> Result<(), MarkupError> {
        let block = self.layout == Layout::Indented
            && !nodes.iter().any(|n| matches!(n, MarkupNode::Text(_)));
        for (i, node) in nodes.iter().enumerate() {
            if block && (depth > 0 || i > 0) {
                self.out.push('\n');
                for _ in 0..depth {
                    self.out.push_str("  ");
                }
            }
            self.node(node, depth)?;
        }
        if block && depth > 0 && !nodes.is_empty() {
            self.out.push('\n');
            for _ in 0..depth - 1 {
                self.out.push_str("  ");
            }
        }
        Ok(())
    }

    fn node(&mut self, node: &MarkupNode, depth: usize) -> Result<(), MarkupError> {
        match node {
            MarkupNode::Text(t) => self.out.push_str(&quote_text(t)),
            MarkupNode::ProcInstr(content) => {
                if content.contains("?>") {
                    return Err(MarkupError::InvalidName(content.clone()));
                }
                self.out.push_str("<?");
                self.out.push_str(content);
                self.out.push_str("?>");
            }
            MarkupNode::Element(e) => self.element(e, depth)?,
        }
        Ok(())
    }

    fn element(&mut self, e: &Element, depth: usize) -> Result<(), MarkupError> {
        check_name(&e.tag)?;
        self.out.push('<');
        self.out.push_str(&e.tag);
        for (name, value) in &e.attributes {
            check_name(name)?;
            self.out.push(' ');
            self.out.push_str(name);
            self.out.push_str("=\"");
            self.out.push_str(&quote_attribute(&attr_text(value)));
            self.out.push('"');
        }
        if e.children.is_empty() {
            self.out.push_str("/>");
            return Ok(());
        }
        self.out.push('>');
        self.nodes(&e.children, depth + 1)?;
        self.out.push_str("</");
        self.out.push_str(&e.tag);
        self.out.push('>');
        Ok(())
    }
}
