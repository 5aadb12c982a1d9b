//! Markup documents: a canonical tree model, a streaming event parser with
//! a mixed event/subtree mode, and a well-formed serializer.
//!
//! Two parse modes are supported. [`Mode::Xml`] requires well-formed input.
//! [`Mode::Html`] accepts a small HTML subset and canonicalizes it: omitted
//! end tags of `p`, `li`, `tr`, `td` and `th` are closed, a `tbody` is
//! inserted between `table` and `tr`, and `td`/`th` receive the default
//! attributes `rowspan="1"` and `colspan="1"`. Inputs that differ only in
//! such omissions produce equal trees.
//!
//! ```
//! use triplekit::markup::{parse_str, serialize, Layout, ParseOptions};
//!
//! let tree = parse_str("<table><tr><td>Hello</table>", &ParseOptions::html()).unwrap();
//! assert_eq!(
//!     serialize(&tree, Layout::Compact).unwrap(),
//!     r#"<table><tbody><tr><td rowspan="1" colspan="1">Hello</td></tr></tbody></table>"#
//! );
//! ```

mod input;
mod reader;
mod write;

use std::fmt;
use std::io::Read;

use thiserror::Error;

pub use reader::{Event, EventReader};
pub use write::{is_valid_name, quote_attribute, quote_text, Layout};

pub(crate) use reader::is_void_element;

/// Error raised by an event handler; aborts the parse.
pub type HandlerError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum MarkupError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: input is not valid UTF-8")]
    Encoding { line: usize },
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("handler error: {0}")]
    Handler(HandlerError),
}

impl MarkupError {
    pub(crate) fn syntax(line: usize, message: impl Into<String>) -> Self {
        MarkupError::Syntax { line, message: message.into() }
    }

    /// Source line of a syntax or encoding error.
    pub fn line(&self) -> Option<usize> {
        match self {
            MarkupError::Syntax { line, .. } | MarkupError::Encoding { line } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Xml,
    Html,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub mode: Mode,
    /// Map attribute values that are plain decimal numbers to
    /// [`AttrValue::Number`]. Values whose text would not be reproduced
    /// exactly by the number stay atomic.
    pub convert_numbers: bool,
    /// Used in diagnostics and by RDF parsing for blank node names.
    pub source_name: String,
    /// Attributes split on whitespace into [`AttrValue::Multi`]
    /// (HTML mode only).
    pub multi_value: Vec<String>,
}

impl ParseOptions {
    pub fn xml() -> Self {
        ParseOptions::default()
    }

    pub fn html() -> Self {
        ParseOptions { mode: Mode::Html, ..ParseOptions::default() }
    }

    pub fn convert_numbers(mut self, on: bool) -> Self {
        self.convert_numbers = on;
        self
    }

    pub fn source_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = name.into();
        self
    }

    pub fn multi_value<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.multi_value = names.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Numeric {
    Int(i64),
    Float(f64),
}

impl Numeric {
    /// Parses an optionally signed decimal integer or simple float, only
    /// when printing the number reproduces `text` exactly.
    pub fn parse_lossless(text: &str) -> Option<Numeric> {
        let digits = text.strip_prefix('-').unwrap_or(text);
        let (int, frac) = match digits.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (digits, None),
        };
        let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int) {
            return None;
        }
        let n = match frac {
            None => Numeric::Int(text.parse().ok()?),
            Some(f) if all_digits(f) => Numeric::Float(text.parse().ok()?),
            Some(_) => return None,
        };
        (n.to_string() == text).then_some(n)
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Numeric::Int(i) => i as f64,
            Numeric::Float(f) => f,
        }
    }
}

impl fmt::Display for Numeric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Numeric::Int(i) => write!(f, "{i}"),
            Numeric::Float(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Atomic(String),
    Number(Numeric),
    Multi(Vec<AttrValue>),
}

impl AttrValue {
    /// The value as attribute text.
    pub fn text(&self) -> std::borrow::Cow<'_, str> {
        write::attr_text(self)
    }
}

impl From<&str> for AttrValue {
    fn from(s: &str) -> Self {
        AttrValue::Atomic(s.to_string())
    }
}

impl From<String> for AttrValue {
    fn from(s: String) -> Self {
        AttrValue::Atomic(s)
    }
}

/// An element. Equality ignores attribute order.
#[derive(Debug, Clone, Default)]
pub struct Element {
    pub tag: String,
    pub attributes: Vec<(String, AttrValue)>,
    pub children: Vec<MarkupNode>,
}

impl Element {
    pub fn new(tag: impl Into<String>) -> Self {
        Element { tag: tag.into(), ..Element::default() }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<AttrValue>) -> Self {
        self.attributes.push((name.into(), value.into()));
        self
    }

    pub fn with_child(mut self, child: impl Into<MarkupNode>) -> Self {
        self.children.push(child.into());
        self
    }

    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        self.attributes.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Child elements, skipping text and processing instructions.
    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|c| match c {
            MarkupNode::Element(e) => Some(e),
            _ => None,
        })
    }

    /// Concatenated text of the direct text children.
    pub fn text(&self) -> String {
        self.children
            .iter()
            .filter_map(|c| match c {
                MarkupNode::Text(t) => Some(t.as_str()),
                _ => None,
            })
            .collect()
    }
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.tag == other.tag
            && self.children == other.children
            && self.attributes.len() == other.attributes.len()
            && self
                .attributes
                .iter()
                .all(|(n, v)| other.attr(n) == Some(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarkupNode {
    Element(Element),
    Text(String),
    ProcInstr(String),
}

impl From<Element> for MarkupNode {
    fn from(e: Element) -> Self {
        MarkupNode::Element(e)
    }
}

impl From<&str> for MarkupNode {
    fn from(s: &str) -> Self {
        MarkupNode::Text(s.to_string())
    }
}

/// Parses a whole document into its node sequence.
pub fn parse_tree<R: Read>(source: R, opts: &ParseOptions) -> Result<Vec<MarkupNode>, MarkupError> {
    let mut reader = EventReader::new(source, opts.clone());
    let mut builder = TreeBuilder::default();
    while let Some(ev) = reader.next_event()? {
        builder.push(ev);
    }
    Ok(builder.finish())
}

pub fn parse_str(text: &str, opts: &ParseOptions) -> Result<Vec<MarkupNode>, MarkupError> {
    parse_tree(text.as_bytes(), opts)
}

/// Builds nodes from a balanced event sequence.
#[derive(Default)]
pub(crate) struct TreeBuilder {
    roots: Vec<MarkupNode>,
    open: Vec<Element>,
}

impl TreeBuilder {
    pub(crate) fn push(&mut self, ev: Event) {
        match ev {
            Event::Begin { tag, attributes, .. } => {
                self.open.push(Element { tag, attributes, children: Vec::new() })
            }
            Event::End { .. } => {
                let done = self.open.pop().expect("balanced events");
                self.add(MarkupNode::Element(done));
            }
            Event::Text(t) => self.add(MarkupNode::Text(t)),
            Event::ProcInstr(p) => self.add(MarkupNode::ProcInstr(p)),
        }
    }

    fn add(&mut self, node: MarkupNode) {
        match self.open.last_mut() {
            Some(parent) => parent.children.push(node),
            None => self.roots.push(node),
        }
    }

    pub(crate) fn depth(&self) -> usize {
        self.open.len()
    }

    pub(crate) fn finish(self) -> Vec<MarkupNode> {
        self.roots
    }
}

/// What the parser does after an element has begun.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    /// Keep delivering events for the element's content.
    Descend,
    /// Build the element's subtree and deliver it to
    /// [`EventHandler::on_subtree`] instead of its nested events.
    Subtree,
}

/// Callbacks for [`parse_events`]. Every method has a no-op default.
pub trait EventHandler {
    fn on_begin(
        &mut self,
        _tag: &str,
        _attributes: &[(String, AttrValue)],
        _line: usize,
    ) -> Result<Control, HandlerError> {
        Ok(Control::Descend)
    }

    fn on_end(&mut self, _tag: &str) -> Result<(), HandlerError> {
        Ok(())
    }

    fn on_text(&mut self, _text: &str) -> Result<(), HandlerError> {
        Ok(())
    }

    fn on_pi(&mut self, _content: &str) -> Result<(), HandlerError> {
        Ok(())
    }

    /// Receives a subtree requested with [`Control::Subtree`]; `line` is
    /// where the element started.
    fn on_subtree(&mut self, _element: Element, _line: usize) -> Result<(), HandlerError> {
        Ok(())
    }
}

/// Streams `source` through `handler`. Memory use is bounded by the
/// largest requested subtree plus the open-element stack.
pub fn parse_events<R: Read, H: EventHandler + ?Sized>(
    source: R,
    opts: &ParseOptions,
    handler: &mut H,
) -> Result<(), MarkupError> {
    let mut reader = EventReader::new(source, opts.clone());
    while let Some(ev) = reader.next_event()? {
        match ev {
            Event::Begin { tag, attributes, line } => {
                match handler.on_begin(&tag, &attributes, line).map_err(MarkupError::Handler)? {
                    Control::Descend => {}
                    Control::Subtree => {
                        let element = collect_subtree(&mut reader, tag, attributes)?;
                        handler.on_subtree(element, line).map_err(MarkupError::Handler)?;
                    }
                }
            }
            Event::End { tag } => handler.on_end(&tag).map_err(MarkupError::Handler)?,
            Event::Text(t) => handler.on_text(&t).map_err(MarkupError::Handler)?,
            Event::ProcInstr(p) => handler.on_pi(&p).map_err(MarkupError::Handler)?,
        }
    }
    Ok(())
}

fn collect_subtree<R: Read>(
    reader: &mut EventReader<R>,
    tag: String,
    attributes: Vec<(String, AttrValue)>,
) -> Result<Element, MarkupError> {
    let mut builder = TreeBuilder::default();
    builder.push(Event::Begin { tag, attributes, line: 0 });
    while builder.depth() > 0 {
        let ev = reader
            .next_event()?
            .ok_or_else(|| MarkupError::syntax(reader.line(), "unexpected end of input"))?;
        builder.push(ev);
    }
    match builder.finish().pop() {
        Some(MarkupNode::Element(e)) => Ok(e),
        _ => unreachable!("subtree builder yields one element"),
    }
}

/// Writes nodes as well-formed markup.
pub fn serialize(nodes: &[MarkupNode], layout: Layout) -> Result<String, MarkupError> {
    let mut out = String::new();
    write::Writer::new(&mut out, layout).nodes(nodes, 0)?;
    Ok(out)
}

/// Drops whitespace-only text nodes everywhere in the tree; used to compare
/// documents modulo layout.
pub fn strip_layout(nodes: &[MarkupNode]) -> Vec<MarkupNode> {
    nodes
        .iter()
        .filter_map(|n| match n {
            MarkupNode::Text(t) if t.trim().is_empty() => None,
            MarkupNode::Element(e) => Some(MarkupNode::Element(Element {
                tag: e.tag.clone(),
                attributes: e.attributes.clone(),
                children: strip_layout(&e.children),
            })),
            other => Some(other.clone()),
        })
        .collect()
}
