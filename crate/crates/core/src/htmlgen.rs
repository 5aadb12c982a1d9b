//! HTML generation from a declarative specification.
//!
//! A page is described as a tree of [`HtmlSpec`] values. Reusable fragments
//! are plain functions returning specs, or [`rule`]s: generators that are
//! invoked while rendering and whose output is spliced in at their
//! position. Rendering yields a balanced [`Token`] stream; printing the
//! stream quotes all text and attribute values.
//!
//! ```
//! use triplekit::htmlgen::{render_to_string, tag, text};
//!
//! let page = tag("p").attr("class", "note").child(text("1 < 2"));
//! assert_eq!(render_to_string(&page).unwrap(), r#"<p class="note">1 &lt; 2</p>"#);
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::markup::{is_valid_name, is_void_element, quote_attribute, quote_text};

#[derive(Debug, Error)]
pub enum HtmlError {
    #[error("{path}: invalid name `{name}`")]
    InvalidName { path: String, name: String },
    #[error("{path}: void element <{tag}> cannot have content")]
    VoidContent { path: String, tag: String },
    #[error("{path}: non-finite number in attribute `{name}`")]
    BadNumber { path: String, name: String },
    #[error("{path}: rule `{rule}` failed: {message}")]
    RuleFailed { path: String, rule: String, message: String },
    #[error("unbalanced token stream: {0}")]
    Unbalanced(String),
}

/// Attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Text(String),
    Int(i64),
    Float(f64),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Text(s) => f.write_str(s),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Float(x) => write!(f, "{x}"),
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}

impl From<String> for Scalar {
    fn from(s: String) -> Self {
        Scalar::Text(s)
    }
}

impl From<&String> for Scalar {
    fn from(s: &String) -> Self {
        Scalar::Text(s.clone())
    }
}

impl From<i64> for Scalar {
    fn from(i: i64) -> Self {
        Scalar::Int(i)
    }
}

impl From<usize> for Scalar {
    fn from(i: usize) -> Self {
        Scalar::Int(i as i64)
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Float(x)
    }
}

pub type RuleResult = Result<Vec<HtmlSpec>, Box<dyn std::error::Error + Send + Sync>>;

/// A generator invoked at render time.
#[derive(Clone)]
pub struct Rule {
    name: String,
    generate: Arc<dyn Fn() -> RuleResult + Send + Sync>,
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\\{}", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum HtmlSpec {
    Text(String),
    Tag {
        name: String,
        attributes: Vec<(String, Scalar)>,
        body: Vec<HtmlSpec>,
    },
    Rule(Rule),
}

pub fn text(t: impl Into<String>) -> HtmlSpec {
    HtmlSpec::Text(t.into())
}

pub fn tag(name: impl Into<String>) -> HtmlSpec {
    HtmlSpec::Tag { name: name.into(), attributes: Vec::new(), body: Vec::new() }
}

/// A named generator; its output is rendered in place.
pub fn rule<F>(name: impl Into<String>, generate: F) -> HtmlSpec
where
    F: Fn() -> RuleResult + Send + Sync + 'static,
{
    HtmlSpec::Rule(Rule { name: name.into(), generate: Arc::new(generate) })
}

impl HtmlSpec {
    /// Adds an attribute. No effect on text and rule nodes.
    pub fn attr(mut self, name: impl Into<String>, value: impl Into<Scalar>) -> Self {
        if let HtmlSpec::Tag { attributes, .. } = &mut self {
            attributes.push((name.into(), value.into()));
        }
        self
    }

    pub fn child(mut self, spec: HtmlSpec) -> Self {
        if let HtmlSpec::Tag { body, .. } = &mut self {
            body.push(spec);
        }
        self
    }

    pub fn children(mut self, specs: impl IntoIterator<Item = HtmlSpec>) -> Self {
        if let HtmlSpec::Tag { body, .. } = &mut self {
            body.extend(specs);
        }
        self
    }
}

impl From<&str> for HtmlSpec {
    fn from(s: &str) -> Self {
        text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Open { tag: String, attributes: Vec<(String, String)> },
    Close(String),
    /// Unquoted text; quoting happens when the stream is printed.
    Text(String),
}

/// Expands a specification into a balanced token stream.
pub fn render(spec: &HtmlSpec) -> Result<Vec<Token>, HtmlError> {
    let mut tokens = Vec::new();
    let mut path = Vec::new();
    render_into(spec, &mut tokens, &mut path)?;
    Ok(tokens)
}

fn render_into(spec: &HtmlSpec, out: &mut Vec<Token>, path: &mut Vec<String>) -> Result<(), HtmlError> {
    match spec {
        HtmlSpec::Text(t) => {
            if !t.is_empty() {
                out.push(Token::Text(t.clone()));
            }
        }
        HtmlSpec::Tag { name, attributes, body } => {
            path.push(name.clone());
            let here = || path.join("/");
            if !is_valid_name(name) {
                return Err(HtmlError::InvalidName { path: here(), name: name.clone() });
            }
            if is_void_element(name) && !body.is_empty() {
                return Err(HtmlError::VoidContent { path: here(), tag: name.clone() });
            }
            let mut attrs = Vec::with_capacity(attributes.len());
            for (n, v) in attributes {
                if !is_valid_name(n) {
                    return Err(HtmlError::InvalidName { path: here(), name: n.clone() });
                }
                if matches!(v, Scalar::Float(x) if !x.is_finite()) {
                    return Err(HtmlError::BadNumber { path: here(), name: n.clone() });
                }
                attrs.push((n.clone(), v.to_string()));
            }
            out.push(Token::Open { tag: name.clone(), attributes: attrs });
            for child in body {
                render_into(child, out, path)?;
            }
            out.push(Token::Close(name.clone()));
            path.pop();
        }
        HtmlSpec::Rule(r) => {
            path.push(format!("\\{}", r.name));
            let generated = (r.generate)().map_err(|e| HtmlError::RuleFailed {
                path: path.join("/"),
                rule: r.name.clone(),
                message: e.to_string(),
            })?;
            for child in &generated {
                render_into(child, out, path)?;
            }
            path.pop();
        }
    }
    Ok(())
}

/// Prints a token stream as markup. Void elements are written in
/// self-closing form.
pub fn tokens_to_text(tokens: &[Token]) -> Result<String, HtmlError> {
    let mut out = String::new();
    let mut open: Vec<&str> = Vec::new();
    let mut iter = tokens.iter().peekable();
    while let Some(token) = iter.next() {
        match token {
            Token::Open { tag, attributes } => {
                out.push('<');
                out.push_str(tag);
                for (n, v) in attributes {
                    out.push(' ');
                    out.push_str(n);
                    out.push_str("=\"");
                    out.push_str(&quote_attribute(v));
                    out.push('"');
                }
                if is_void_element(tag) {
                    match iter.next() {
                        Some(Token::Close(t)) if t == tag => out.push_str("/>"),
                        _ => return Err(HtmlError::Unbalanced(format!("content inside void element <{tag}>"))),
                    }
                } else {
                    out.push('>');
                    open.push(tag);
                }
            }
            Token::Close(tag) => match open.pop() {
                Some(t) if t == tag => {
                    out.push_str("</");
                    out.push_str(tag);
                    out.push('>');
                }
                Some(t) => return Err(HtmlError::Unbalanced(format!("</{tag}> closes <{t}>"))),
                None => return Err(HtmlError::Unbalanced(format!("</{tag}> without open element"))),
            },
            Token::Text(t) => out.push_str(&quote_text(t)),
        }
    }
    if let Some(t) = open.pop() {
        return Err(HtmlError::Unbalanced(format!("<{t}> is never closed")));
    }
    Ok(out)
}

pub fn render_to_string(spec: &HtmlSpec) -> Result<String, HtmlError> {
    tokens_to_text(&render(spec)?)
}

/// Renders a complete page with a title and body content.
pub fn page(title: &str, body: Vec<HtmlSpec>) -> HtmlSpec {
    tag("html").children([
        tag("head").child(tag("title").child(text(title))),
        tag("body").children(body),
    ])
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use proptest::prelude::*;

    use super::*;
    use crate::markup::{parse_str, Element, MarkupNode, ParseOptions};

    #[test]
    fn bold() {
        let tokens = render(&tag("b").child(text("bold"))).unwrap();
        assert_eq!(
            tokens,
            vec![
                Token::Open { tag: "b".into(), attributes: vec![] },
                Token::Text("bold".into()),
                Token::Close("b".into())
            ]
        );
    }

    #[test]
    fn empty_rule_contributes_nothing() {
        let spec = tag("div").child(rule("nothing", || Ok(vec![])));
        assert_eq!(render_to_string(&spec).unwrap(), "<div></div>");
    }

    fn affiliation_rows(pairs: Vec<(&'static str, &'static str)>) -> HtmlSpec {
        rule("affiliations", move || {
            Ok(pairs
                .iter()
                .map(|(name, aff)| tag("tr").child(tag("td").child(text(*name))).child(tag("td").child(text(*aff))))
                .collect())
        })
    }

    #[test]
    fn affiliation_table() {
        let mut pairs = vec![("wielemaker", "uva"), ("huang", "vu"), ("van der meij", "vu")];
        pairs.sort();
        let spec = tag("table")
            .attr("border", 2i64)
            .attr("align", "center")
            .child(tag("tr").child(tag("th").child(text("Name"))).child(tag("th").child(text("Affiliation"))))
            .child(affiliation_rows(pairs));
        let tokens = render(&spec).unwrap();
        let mut balance: HashMap<&str, i64> = HashMap::new();
        for t in &tokens {
            match t {
                Token::Open { tag, .. } => *balance.entry(tag).or_default() += 1,
                Token::Close(tag) => *balance.entry(tag).or_default() -= 1,
                Token::Text(_) => {}
            }
        }
        assert!(balance.values().all(|v| *v == 0));
        let rows = tokens.iter().filter(|t| matches!(t, Token::Open { tag, .. } if tag == "tr")).count();
        let headers = tokens.iter().filter(|t| matches!(t, Token::Open { tag, .. } if tag == "th")).count();
        assert_eq!((rows, headers), (4, 2));
        let html = tokens_to_text(&tokens).unwrap();
        assert!(html.starts_with(r#"<table border="2" align="center"><tr><th>Name</th>"#));
        let tree = parse_str(&html, &ParseOptions::xml()).unwrap();
        let MarkupNode::Element(table) = &tree[0] else { panic!() };
        assert_eq!(table.elements().count(), 4);
        assert_eq!(table.elements().nth(1).unwrap().elements().next().unwrap().text(), "huang");
    }

    #[test]
    fn quoting_happens_once() {
        let spec = tag("p").attr("title", "a\"b&c").child(text("a<b &amp;"));
        assert_eq!(render_to_string(&spec).unwrap(), "<p title=\"a&quot;b&amp;c\">a&lt;b &amp;amp;</p>");
        let hand = vec![
            Token::Open { tag: "p".into(), attributes: vec![] },
            Token::Text("a<b".into()),
            Token::Close("p".into()),
        ];
        assert!(tokens_to_text(&hand).unwrap().contains("a&lt;b"));
        assert_eq!(
            tokens_to_text(&[Token::Open { tag: "p".into(), attributes: vec![] }, Token::Text("x".into()), Token::Close("p".into())])
                .unwrap(),
            "<p>x</p>"
        );
    }

    #[test]
    fn void_elements() {
        let spec = tag("p").child(tag("br")).child(tag("img").attr("src", "a.png").attr("width", 1.5));
        assert_eq!(render_to_string(&spec).unwrap(), "<p><br/><img src=\"a.png\" width=\"1.5\"/></p>");
        let err = render(&tag("div").child(tag("br").child(text("x")))).unwrap_err();
        assert!(matches!(err, HtmlError::VoidContent { ref path, .. } if path == "div/br"));
    }

    #[test]
    fn rule_failure_reports_path() {
        let spec = tag("html").child(tag("body").child(rule("rows", || Err("no data".into()))));
        let err = render(&spec).unwrap_err();
        match err {
            HtmlError::RuleFailed { path, rule, message } => {
                assert_eq!(path, "html/body/\\rows");
                assert_eq!(rule, "rows");
                assert_eq!(message, "no data");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_names_and_numbers() {
        assert!(matches!(render(&tag("a b")), Err(HtmlError::InvalidName { .. })));
        assert!(matches!(render(&tag("a").attr("x\"", "1")), Err(HtmlError::InvalidName { .. })));
        assert!(matches!(render(&tag("a").attr("w", f64::NAN)), Err(HtmlError::BadNumber { .. })));
    }

    #[test]
    fn unbalanced_streams_are_rejected() {
        let open = |t: &str| Token::Open { tag: t.into(), attributes: vec![] };
        assert!(tokens_to_text(&[open("a")]).is_err());
        assert!(tokens_to_text(&[Token::Close("a".into())]).is_err());
        assert!(tokens_to_text(&[open("a"), open("b"), Token::Close("a".into())]).is_err());
        assert!(tokens_to_text(&[open("br"), Token::Text("x".into()), Token::Close("br".into())]).is_err());
    }

    fn arb_spec() -> impl Strategy<Value = HtmlSpec> {
        let name = prop::sample::select(vec!["div", "span", "p", "td", "ul", "li", "b", "br", "img"]);
        let leaf = prop_oneof![
            "[ -~]{0,8}".prop_map(text),
            name.clone().prop_map(tag),
        ];
        leaf.prop_recursive(4, 48, 4, move |inner| {
            prop_oneof![
                (name.clone(), prop::collection::vec(inner.clone(), 0..4), prop::collection::vec(("[a-z]{1,4}", "[ -~]{0,6}"), 0..3))
                    .prop_map(|(n, body, attrs)| {
                        let mut attributes: Vec<(String, Scalar)> = Vec::new();
                        for (k, v) in attrs {
                            if !attributes.iter().any(|(e, _)| *e == k) {
                                attributes.push((k, Scalar::Text(v)));
                            }
                        }
                        let body = if is_void_element(n) { vec![] } else { body };
                        HtmlSpec::Tag { name: n.to_string(), attributes, body }
                    }),
                prop::collection::vec(inner, 0..3).prop_map(|generated| {
                    rule("gen", move || Ok(generated.clone()))
                }),
            ]
        })
    }

    /// Element skeleton implied by the spec: tag names and nesting only.
    fn skeleton(spec: &HtmlSpec, out: &mut Vec<String>) {
        match spec {
            HtmlSpec::Text(_) => {}
            HtmlSpec::Tag { name, body, .. } => {
                out.push(format!("<{name}"));
                for b in body {
                    skeleton(b, out);
                }
                out.push(format!("{name}>"));
            }
            HtmlSpec::Rule(r) => {
                for b in (r.generate)().unwrap() {
                    skeleton(&b, out);
                }
            }
        }
    }

    fn tree_skeleton(nodes: &[MarkupNode], out: &mut Vec<String>) {
        for n in nodes {
            if let MarkupNode::Element(Element { tag, children, .. }) = n {
                out.push(format!("<{tag}"));
                tree_skeleton(children, out);
                out.push(format!("{tag}>"));
            }
        }
    }

    proptest! {
        #[test]
        fn rendered_text_parses_to_spec_skeleton(spec in arb_spec()) {
            let html = render_to_string(&spec).unwrap();
            let tree = parse_str(&html, &ParseOptions::xml()).unwrap();
            let (mut want, mut got) = (Vec::new(), Vec::new());
            skeleton(&spec, &mut want);
            tree_skeleton(&tree, &mut got);
            prop_assert_eq!(got, want);
        }

        #[test]
        fn composition(a in arb_spec(), b in arb_spec()) {
            let whole = render(&tag("div").child(a.clone()).child(b.clone())).unwrap();
            let mut parts = vec![Token::Open { tag: "div".into(), attributes: vec![] }];
            parts.extend(render(&a).unwrap());
            parts.extend(render(&b).unwrap());
            parts.push(Token::Close("div".into()));
            prop_assert_eq!(whole, parts);
        }
    }
}
